//! Reverse Cuthill-McKee bandwidth reduction.

use std::collections::VecDeque;

use super::sparse::SparseBlock;

/// Adjacency lists of the symmetrized off-diagonal pattern of a square matrix.
pub fn symmetric_adjacency(m: &SparseBlock) -> Vec<Vec<usize>> {
    let n = m.rows();
    let mut adj = vec![Vec::new(); n];
    for (i, j, _) in m.iter() {
        if i != j {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    adj
}

/// Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    // components are seeded in ascending index order
    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        let start = pseudo_peripheral(adj, seed);
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (adj[w].len(), w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn bfs_levels(adj: &[Vec<usize>], start: usize) -> Vec<Vec<usize>> {
    let mut seen = vec![false; adj.len()];
    seen[start] = true;
    let mut levels = vec![vec![start]];
    loop {
        let mut next = Vec::new();
        for &v in levels.last().unwrap() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    next.push(w);
                }
            }
        }
        if next.is_empty() {
            return levels;
        }
        levels.push(next);
    }
}

/// George-Liu search for a node of (near) maximal eccentricity.
fn pseudo_peripheral(adj: &[Vec<usize>], seed: usize) -> usize {
    let mut current = seed;
    let mut depth = bfs_levels(adj, current).len();
    for _ in 0..adj.len() {
        let levels = bfs_levels(adj, current);
        let candidate = *levels
            .last()
            .unwrap()
            .iter()
            .min_by_key(|&&v| (adj[v].len(), v))
            .unwrap();
        let candidate_depth = bfs_levels(adj, candidate).len();
        if candidate_depth > depth {
            current = candidate;
            depth = candidate_depth;
        } else {
            break;
        }
    }
    current
}

/// Lower and upper bandwidth of `m` after applying `perm` (`perm[new] = old`).
pub fn bandwidths(m: &SparseBlock, perm: &[usize]) -> (usize, usize) {
    let mut inv = vec![0; perm.len()];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    let (mut kl, mut ku) = (0, 0);
    for (i, j, _) in m.iter() {
        let (pi, pj) = (inv[i], inv[j]);
        if pi > pj {
            kl = kl.max(pi - pj);
        } else {
            ku = ku.max(pj - pi);
        }
    }
    (kl, ku)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_graph_shuffled() -> SparseBlock {
        // path 0-3-1-4-2 stored with scrambled labels
        let edges = [(0, 3), (3, 1), (1, 4), (4, 2)];
        let mut t = Vec::new();
        for i in 0..5 {
            t.push((i, i, 2.0));
        }
        for &(a, b) in &edges {
            t.push((a, b, -1.0));
            t.push((b, a, -1.0));
        }
        SparseBlock::from_triplets(5, 5, t)
    }

    #[test]
    fn rcm_is_a_permutation() {
        let m = path_graph_shuffled();
        let mut perm = reverse_cuthill_mckee(&symmetric_adjacency(&m));
        perm.sort_unstable();
        assert_eq!(perm, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn rcm_reduces_path_to_tridiagonal() {
        let m = path_graph_shuffled();
        let identity: Vec<usize> = (0..5).collect();
        assert_eq!(bandwidths(&m, &identity), (3, 3));
        let perm = reverse_cuthill_mckee(&symmetric_adjacency(&m));
        assert_eq!(bandwidths(&m, &perm), (1, 1));
    }
}

//! Banded LU factorization with partial pivoting on a bandwidth-reducing
//! permutation of a sparse matrix.

use super::ordering::{bandwidths, reverse_cuthill_mckee, symmetric_adjacency};
use super::sparse::SparseBlock;
use crate::error::{Error, Result};

/// `P A P^T = L U` in LAPACK `gbtrf` layout: multipliers of step `k` stay in
/// the row position they were computed for, and row swaps only touch the
/// trailing columns.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
    pivots: Vec<usize>,
    perm: Vec<usize>,
}

impl BandLu {
    pub fn factor(m: &SparseBlock) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(Error::DimensionMismatch(format!(
                "cannot factor a {}x{} matrix",
                m.rows(),
                m.cols()
            )));
        }
        let n = m.rows();
        let perm = reverse_cuthill_mckee(&symmetric_adjacency(m));
        let (kl, ku) = bandwidths(m, &perm);
        let width = 2 * kl + ku + 1;
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut lu = Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
            pivots: vec![0; n],
            perm,
        };
        for (i, j, v) in m.iter() {
            let idx = lu.index(inv[i], inv[j]);
            lu.data[idx] += v;
        }
        let anorm = m.max_abs();
        lu.eliminate(anorm)?;
        Ok(lu)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Lower and upper bandwidth of the reordered matrix.
    pub fn bandwidth(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    #[inline]
    fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku);
        i * self.width + (j + self.kl - i)
    }

    fn eliminate(&mut self, anorm: f64) -> Result<()> {
        let n = self.n;
        let tiny = f64::MIN_POSITIVE.max(anorm * 1e-18);
        for k in 0..n {
            let last_row = (k + self.kl).min(n - 1);
            let last_col = (k + self.kl + self.ku).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.index(k, k)].abs();
            for r in k + 1..=last_row {
                let v = self.data[self.index(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best <= tiny {
                return Err(Error::Singular { column: self.perm[k] });
            }
            self.pivots[k] = p;
            if p != k {
                for j in k..=last_col {
                    let (a, b) = (self.index(k, j), self.index(p, j));
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.index(k, k)];
            let span = last_col - k;
            let krow = self.index(k, k + 1);
            for r in k + 1..=last_row {
                let rk = self.index(r, k);
                let l = self.data[rk] / pivot;
                self.data[rk] = l;
                if l == 0.0 {
                    continue;
                }
                let rrow = self.index(r, k + 1);
                let (head, tail) = self.data.split_at_mut(rrow);
                let pivot_row = &head[krow..krow + span];
                for (a, b) in tail[..span].iter_mut().zip(pivot_row) {
                    *a -= l * b;
                }
            }
        }
        Ok(())
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), self.n);
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&old| rhs[old]).collect();
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            if xk != 0.0 {
                for r in k + 1..=(k + self.kl).min(n - 1) {
                    x[r] -= self.data[self.index(r, k)] * xk;
                }
            }
        }
        for i in (0..n).rev() {
            let last_col = (i + self.kl + self.ku).min(n - 1);
            let row = self.index(i, i);
            let mut s = x[i];
            for (off, j) in (i + 1..=last_col).enumerate() {
                s -= self.data[row + 1 + off] * x[j];
            }
            x[i] = s / self.data[row];
        }
        let mut out = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            out[old] = x[new];
        }
        out
    }
}

/// A square sparse matrix together with its band factorization; solves apply
/// iterative refinement against the original matrix.
#[derive(Debug, Clone)]
pub struct SparseLu {
    matrix: SparseBlock,
    lu: BandLu,
}

impl SparseLu {
    pub fn new(matrix: SparseBlock) -> Result<Self> {
        let lu = BandLu::factor(&matrix)?;
        Ok(Self { matrix, lu })
    }

    pub fn dim(&self) -> usize {
        self.lu.dim()
    }

    pub fn matrix(&self) -> &SparseBlock {
        &self.matrix
    }

    pub fn bandwidth(&self) -> (usize, usize) {
        self.lu.bandwidth()
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = self.lu.solve(rhs);
        for _ in 0..2 {
            let mut r = rhs.to_vec();
            self.matrix.mul_vec_add(-1.0, &x, &mut r);
            let correction = self.lu.solve(&r);
            x.iter_mut().zip(&correction).for_each(|(xi, ci)| *xi += ci);
        }
        x
    }
}

//! Quadrature rules on intervals and tetrahedra.

use crate::error::{Error, Result};

/// Gauss-Legendre nodes and weights on `[-1, 1]` (Newton iteration on the
/// Legendre recurrence).
pub fn gauss_legendre(q: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(q >= 1);
    let mut nodes = vec![0.0; q];
    let mut weights = vec![0.0; q];
    let m = q.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (q as f64 + 0.5)).cos();
        let mut dp;
        loop {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 0..q {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            dp = q as f64 * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        // recompute derivative at the converged node
        let (mut p1, mut p2) = (1.0, 0.0);
        for j in 0..q {
            let p3 = p2;
            p2 = p1;
            p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
        }
        dp = q as f64 * (z * p1 - p2) / (z * z - 1.0);
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[q - 1 - i] = z;
        weights[i] = w;
        weights[q - 1 - i] = w;
    }
    (nodes, weights)
}

/// Two-point Gauss nodes on `[0, 1]`; weights are 1/2 each.
pub const GAUSS2_UNIT: [f64; 2] = [0.211_324_865_405_187_1, 0.788_675_134_594_812_9];

/// A quadrature rule on a tetrahedron in barycentric coordinates; weights
/// sum to one and are scaled by the element volume at use.
#[derive(Debug, Clone)]
pub struct TetRule {
    pub points: Vec<[f64; 4]>,
    pub weights: Vec<f64>,
    /// Polynomial degree integrated exactly.
    pub degree: usize,
}

impl TetRule {
    /// Four-point rule, exact for quadratics.
    pub fn order2() -> Self {
        let a = 0.585_410_196_624_968_5;
        let b = 0.138_196_601_125_010_5;
        Self {
            points: vec![[a, b, b, b], [b, a, b, b], [b, b, a, b], [b, b, b, a]],
            weights: vec![0.25; 4],
            degree: 2,
        }
    }

    /// Keast eleven-point rule, exact for quartics.
    pub fn order4() -> Self {
        let mut points = vec![[0.25; 4]];
        let mut weights = vec![-74.0 / 5625.0 * 6.0];
        let (p, q) = (11.0 / 14.0, 1.0 / 14.0);
        for i in 0..4 {
            let mut pt = [q; 4];
            pt[i] = p;
            points.push(pt);
            weights.push(343.0 / 45000.0 * 6.0);
        }
        let a = (1.0 + (5.0f64 / 14.0).sqrt()) / 4.0;
        let b = (1.0 - (5.0f64 / 14.0).sqrt()) / 4.0;
        for (i, j) in [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)] {
            let mut pt = [b; 4];
            pt[i] = a;
            pt[j] = a;
            points.push(pt);
            weights.push(56.0 / 2250.0 * 6.0);
        }
        Self {
            points,
            weights,
            degree: 4,
        }
    }

    /// Collapsed (conical) product of `q`-point Gauss rules; exact up to
    /// degree `2q - 3`.
    pub fn conical(q: usize) -> Self {
        assert!(q >= 2);
        let (x, w) = gauss_legendre(q);
        let unit: Vec<(f64, f64)> = x.iter().zip(&w).map(|(&x, &w)| (0.5 * (x + 1.0), 0.5 * w)).collect();
        let mut points = Vec::with_capacity(q * q * q);
        let mut weights = Vec::with_capacity(q * q * q);
        for &(u, wu) in &unit {
            for &(v, wv) in &unit {
                for &(t, wt) in &unit {
                    let x = u;
                    let y = v * (1.0 - u);
                    let z = t * (1.0 - u) * (1.0 - v);
                    let jac = (1.0 - u) * (1.0 - u) * (1.0 - v);
                    points.push([1.0 - x - y - z, x, y, z]);
                    // reference volume 1/6 normalised to one
                    weights.push(6.0 * wu * wv * wt * jac);
                }
            }
        }
        Self {
            points,
            weights,
            degree: 2 * q - 3,
        }
    }

    /// Rule of the requested exactness degree (2, 4, or conical for others).
    pub fn of_degree(degree: usize) -> Self {
        match degree {
            0..=2 => Self::order2(),
            4 => Self::order4(),
            d => Self::conical((d + 3).div_ceil(2)),
        }
    }
}

/// Integrates `integrand(s)` over `[0, S]` with two-point Gauss on every
/// subinterval of the union of the given breakpoint sets; exact for
/// integrands that are cubic on each merged subinterval.
pub fn merged_quadrature<F>(breakpoint_sets: &[&[f64]], tol: f64, integrand: F) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let merged = merge_breakpoints(breakpoint_sets, tol)?;
    let mut total = 0.0;
    for w in merged.windows(2) {
        let (s0, s1) = (w[0], w[1]);
        let len = s1 - s0;
        for &g in &GAUSS2_UNIT {
            total += 0.5 * len * integrand(s0 + g * len);
        }
    }
    Ok(total)
}

/// Sorted union of breakpoint sets with values closer than `tol` collapsed.
pub fn merge_breakpoints(breakpoint_sets: &[&[f64]], tol: f64) -> Result<Vec<f64>> {
    if breakpoint_sets.is_empty() || breakpoint_sets.iter().any(|s| s.len() < 2) {
        return Err(Error::InvalidDiscretization("empty breakpoint set".into()));
    }
    let mut all: Vec<f64> = breakpoint_sets.iter().flat_map(|s| s.iter().copied()).collect();
    all.sort_by(f64::total_cmp);
    let mut merged: Vec<f64> = Vec::with_capacity(all.len());
    for v in all {
        match merged.last() {
            Some(&last) if v - last <= tol => {}
            _ => merged.push(v),
        }
    }
    // keep the true right end
    let end = breakpoint_sets[0][breakpoint_sets[0].len() - 1];
    if let Some(last) = merged.last_mut() {
        *last = end;
    }
    Ok(merged)
}

//! Direct saddle-point and matrix-free reduced solves of the discrete
//! optimality system.

pub mod condition;
pub mod kkt;
pub mod reduced;

use std::time::Duration;

use crate::assembly::{ConstrainedSystem, CoupledBlocks};
use crate::linalg::{axpy, norm2};

pub use condition::{estimate_condition, DEFAULT_DENSE_CAP};
pub use kkt::{build_kkt, solve_kkt_direct, KktSystem};
pub use reduced::{
    minimize_quadratic, minimize_reduced, solve_reduced, DenseQuadratic, MinimizeOptions, MinimizeReport, QuadraticModel,
    ReducedMethod, ReducedOperator,
};

/// One iterate of a reduced minimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Gradient norm relative to the gradient at zero.
    pub gradient: f64,
    pub functional: f64,
}

/// Discrete fields and diagnostics of one solve. `p` holds the constraint
/// multipliers over the full state (zero on prescribed DOFs).
#[derive(Debug, Clone)]
pub struct SolveResult {
    /// Full state including the junction multipliers.
    pub state: Vec<f64>,
    pub u: Vec<f64>,
    pub u_hat: Vec<f64>,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    pub p: Vec<f64>,
    pub functional: f64,
    pub iterations: usize,
    /// Relative residual of the final system (KKT residual or reduced
    /// gradient).
    pub residual: f64,
    pub history: Vec<IterationRecord>,
    pub wall_time: Duration,
}

impl SolveResult {
    fn from_state(
        sys: &ConstrainedSystem,
        w_free: &[f64],
        phi: Vec<f64>,
        psi: Vec<f64>,
        p_free: &[f64],
        blocks: Option<&CoupledBlocks>,
    ) -> Self {
        let w = sys.expand(w_free);
        let mut p = vec![0.0; w.len()];
        for (&i, &v) in sys.free.iter().zip(p_free) {
            p[i] = v;
        }
        let u = w[..sys.n_u].to_vec();
        let u_hat = w[sys.n_u..sys.n_u + sys.n_u_hat].to_vec();
        let functional = match blocks {
            Some(b) => b.functional(&u, &u_hat, &psi),
            None => sys.functional(w_free, &psi),
        };
        Self {
            state: w,
            u,
            u_hat,
            phi,
            psi,
            p,
            functional: functional.max(0.0),
            iterations: 0,
            residual: 0.0,
            history: Vec::new(),
            wall_time: Duration::ZERO,
        }
    }

    /// Constraint residual `||A W - B Φ - Cᵅ Ψ - F|| / max(||F||, 1)` on
    /// the free rows.
    pub fn constraint_residual(&self, sys: &ConstrainedSystem) -> f64 {
        let w_free: Vec<f64> = sys.free.iter().map(|&i| self.state[i]).collect();
        let mut r = sys.state_op.mul_vec(&w_free);
        sys.flux_op.mul_vec_add(-1.0, &self.phi, &mut r);
        sys.pressure_op.mul_vec_add(-1.0, &self.psi, &mut r);
        axpy(-1.0, &sys.rhs, &mut r);
        norm2(&r) / norm2(&sys.rhs).max(1.0)
    }
}

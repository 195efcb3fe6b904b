//! The reduced functional `J*(X) = ½ XᵀMX + dᵀX + c` over the controls
//! `X = (Φ, Ψ)`, applied matrix-free through independent factorizations of
//! the bulk and line operators, and its minimization.

use std::time::Instant;

use nalgebra::DMatrix;

use super::{IterationRecord, SolveResult};
use crate::assembly::{ConstrainedSystem, CoupledBlocks};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm2, SparseLu};

/// A convex quadratic accessed through products with its Hessian.
pub trait QuadraticModel {
    fn dim(&self) -> usize;
    /// `M x`.
    fn apply(&self, x: &[f64]) -> Vec<f64>;
    /// The gradient at zero, `d`.
    fn linear(&self) -> &[f64];
    /// Value at zero.
    fn offset(&self) -> f64;

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.apply(x);
        axpy(1.0, self.linear(), &mut g);
        g
    }

    fn value(&self, x: &[f64]) -> f64 {
        0.5 * dot(x, &self.apply(x)) + dot(self.linear(), x) + self.offset()
    }
}

/// A quadratic with an explicit dense Hessian.
#[derive(Debug, Clone)]
pub struct DenseQuadratic {
    pub hessian: DMatrix<f64>,
    pub linear: Vec<f64>,
    pub offset: f64,
}

impl QuadraticModel for DenseQuadratic {
    fn dim(&self) -> usize {
        self.linear.len()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        (&self.hessian * nalgebra::DVector::from_column_slice(x)).as_slice().to_vec()
    }

    fn linear(&self) -> &[f64] {
        &self.linear
    }

    fn offset(&self) -> f64 {
        self.offset
    }
}

/// Matrix-free reduced functional of a constrained system.
#[derive(Debug)]
pub struct ReducedOperator<'a> {
    sys: &'a ConstrainedSystem,
    bulk: Option<SparseLu>,
    line: Option<SparseLu>,
    d: Vec<f64>,
    offset: f64,
}

impl<'a> ReducedOperator<'a> {
    pub fn new(sys: &'a ConstrainedSystem) -> Result<Self> {
        let bulk = (sys.a_free.rows() > 0).then(|| SparseLu::new(sys.a_free.clone())).transpose()?;
        let line = (sys.a_hat_star_free.rows() > 0).then(|| SparseLu::new(sys.a_hat_star_free.clone())).transpose()?;
        let mut op = Self {
            sys,
            bulk,
            line,
            d: Vec::new(),
            offset: 0.0,
        };
        let zero = vec![0.0; op.n_controls()];
        op.d = op.full_gradient(&zero);
        op.offset = op.functional(&zero);
        Ok(op)
    }

    pub fn n_phi(&self) -> usize {
        self.sys.n_phi()
    }

    pub fn n_controls(&self) -> usize {
        self.sys.n_phi() + self.sys.n_psi()
    }

    pub fn system(&self) -> &ConstrainedSystem {
        self.sys
    }

    /// Applies the inverse of the block-diagonal state operator.
    fn solve_state(&self, rhs: &[f64]) -> Vec<f64> {
        let nu = self.sys.n_free_u;
        let mut out = Vec::with_capacity(rhs.len());
        if let Some(lu) = &self.bulk {
            out.extend(lu.solve(&rhs[..nu]));
        }
        if let Some(lu) = &self.line {
            out.extend(lu.solve(&rhs[nu..]));
        }
        out
    }

    fn split<'x>(&self, x: &'x [f64]) -> (&'x [f64], &'x [f64]) {
        x.split_at(self.sys.n_phi())
    }

    /// State solving the constraint for the controls `x`.
    pub fn state(&self, x: &[f64]) -> Vec<f64> {
        self.state_part(x, true)
    }

    fn state_part(&self, x: &[f64], affine: bool) -> Vec<f64> {
        let (phi, psi) = self.split(x);
        let mut rhs = if affine { self.sys.rhs.clone() } else { vec![0.0; self.sys.rhs.len()] };
        self.sys.flux_op.mul_vec_add(1.0, phi, &mut rhs);
        self.sys.pressure_op.mul_vec_add(1.0, psi, &mut rhs);
        self.solve_state(&rhs)
    }

    /// Adjoint state `A⁻ᵀ (G W + c_w - C Ψ)`; the state operator is symmetric.
    pub fn adjoint(&self, w: &[f64], psi: &[f64]) -> Vec<f64> {
        self.adjoint_part(w, psi, true)
    }

    fn adjoint_part(&self, w: &[f64], psi: &[f64], affine: bool) -> Vec<f64> {
        let mut r = self.sys.functional_state.mul_vec(w);
        if affine {
            axpy(1.0, &self.sys.lin_state, &mut r);
        }
        self.sys.mismatch_op.mul_vec_add(-1.0, psi, &mut r);
        self.solve_state(&r)
    }

    /// `∇J*(x) = M x + d`, from one state and one adjoint solve.
    pub fn full_gradient(&self, x: &[f64]) -> Vec<f64> {
        self.gradient_part(x, true)
    }

    /// `M x` when `affine` is false, `M x + d` otherwise.
    fn gradient_part(&self, x: &[f64], affine: bool) -> Vec<f64> {
        let (_, psi) = self.split(x);
        let w = self.state_part(x, affine);
        let p = self.adjoint_part(&w, psi, affine);
        let mut g = self.sys.flux_op.tr_mul_vec(&p);
        let mut g_psi = self.sys.pressure_op.tr_mul_vec(&p);
        self.sys.mismatch_op.tr_mul_vec_add(-1.0, &w, &mut g_psi);
        if affine {
            axpy(1.0, &self.sys.lin_psi, &mut g_psi);
        }
        self.sys.g_psi.mul_vec_add(2.0, psi, &mut g_psi);
        g.extend(g_psi);
        g
    }

    /// `J*(x)` evaluated through the state.
    pub fn functional(&self, x: &[f64]) -> f64 {
        let (_, psi) = self.split(x);
        self.sys.functional(&self.state(x), psi)
    }
}

impl QuadraticModel for ReducedOperator<'_> {
    fn dim(&self) -> usize {
        self.n_controls()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.gradient_part(x, false)
    }

    fn linear(&self) -> &[f64] {
        &self.d
    }

    fn offset(&self) -> f64 {
        self.offset
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.full_gradient(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReducedMethod {
    ConjugateGradient,
    /// Steepest descent with the exact step `ζ = -(g·g)/(g·Mg)`.
    SteepestDescent,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizeOptions {
    pub method: ReducedMethod,
    /// Stop when `||M x + d|| <= tol ||d||`.
    pub tol: f64,
    /// Defaults to ten times the number of controls.
    pub max_iter: Option<usize>,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            method: ReducedMethod::ConjugateGradient,
            tol: 1e-10,
            max_iter: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MinimizeReport {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub history: Vec<IterationRecord>,
}

/// Minimizes a convex quadratic by exact line searches along conjugate or
/// steepest-descent directions, starting from `x0`.
pub fn minimize_quadratic<Q: QuadraticModel + ?Sized>(model: &Q, x0: &[f64], options: &MinimizeOptions) -> Result<MinimizeReport> {
    let n = model.dim();
    let max_iter = options.max_iter.unwrap_or(10 * n.max(1));
    let d_norm = norm2(model.linear());
    let scale = if d_norm > 0.0 { d_norm } else { 1.0 };
    let mut x = x0.to_vec();
    let mut g = model.gradient(&x);
    let value = |x: &[f64], g: &[f64]| {
        // ½ xᵀMx + dᵀx + c = ½ xᵀ(g + d) + c
        0.5 * x.iter().zip(g).zip(model.linear()).map(|((x, g), d)| x * (g + d)).sum::<f64>() + model.offset()
    };
    let mut history = vec![IterationRecord {
        iteration: 0,
        gradient: norm2(&g) / scale,
        functional: value(&x, &g),
    }];
    let mut dir: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut gg = dot(&g, &g);
    let mut iter = 0;
    while gg.sqrt() > options.tol * d_norm && gg > 0.0 {
        if iter == max_iter {
            return Err(Error::NotConverged {
                iterations: iter,
                residual: gg.sqrt() / scale,
            });
        }
        iter += 1;
        let md = model.apply(&dir);
        let curvature = dot(&dir, &md);
        if !(curvature > 0.0) {
            return Err(Error::NonDescent { iteration: iter, curvature });
        }
        let step = -dot(&g, &dir) / curvature;
        axpy(step, &dir, &mut x);
        axpy(step, &md, &mut g);
        let mut gg_new = dot(&g, &g);
        // the recursive gradient drifts; confirm convergence against the true one
        let restart = gg_new.sqrt() <= options.tol * d_norm;
        if restart {
            g = model.gradient(&x);
            gg_new = dot(&g, &g);
        }
        match options.method {
            ReducedMethod::ConjugateGradient if !restart => {
                let beta = gg_new / gg;
                for (di, gi) in dir.iter_mut().zip(&g) {
                    *di = -gi + beta * *di;
                }
            }
            _ => {
                for (di, gi) in dir.iter_mut().zip(&g) {
                    *di = -gi;
                }
            }
        }
        gg = gg_new;
        history.push(IterationRecord {
            iteration: iter,
            gradient: gg.sqrt() / scale,
            functional: value(&x, &g),
        });
    }
    // guard against drift of the recursively updated gradient
    let true_g = model.gradient(&x);
    Ok(MinimizeReport {
        residual: norm2(&true_g) / scale,
        x,
        iterations: iter,
        history,
    })
}

/// Minimizes the reduced functional from zero controls.
pub fn minimize_reduced(op: &ReducedOperator<'_>, options: &MinimizeOptions) -> Result<MinimizeReport> {
    minimize_quadratic(op, &vec![0.0; op.n_controls()], options)
}

/// Reduced solve: minimization over the controls, then one state and one
/// adjoint solve to recover the fields.
pub fn solve_reduced(sys: &ConstrainedSystem, blocks: Option<&CoupledBlocks>, options: &MinimizeOptions) -> Result<SolveResult> {
    let start = Instant::now();
    let op = ReducedOperator::new(sys)?;
    let report = minimize_reduced(&op, options)?;
    let w = op.state(&report.x);
    let (phi, psi) = report.x.split_at(sys.n_phi());
    let p = op.adjoint(&w, psi);
    let mut out = SolveResult::from_state(sys, &w, phi.to_vec(), psi.to_vec(), &p, blocks);
    out.iterations = report.iterations;
    out.residual = report.residual;
    out.history = report.history;
    out.wall_time = start.elapsed();
    Ok(out)
}

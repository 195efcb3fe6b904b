//! Assembly and direct solution of the symmetric saddle-point system.

use std::time::Instant;

use super::SolveResult;
use crate::assembly::{ConstrainedSystem, CoupledBlocks};
use crate::error::Result;
use crate::linalg::{norm2, stack_blocks, SparseBlock, SparseLu};

/// The optimality system in the unknowns `(W, Φ, Ψ, -P)`:
///
/// ```text
/// [ G    0    -C    Aᵀ  ] [ W  ]   [ -c_w ]
/// [ 0    0     0   -Bᵀ  ] [ Φ  ] = [  0   ]
/// [ -Cᵀ  0   2G_ψ  -Cᵅᵀ ] [ Ψ  ]   [ -c_ψ ]
/// [ A   -B   -Cᵅ    0   ] [ -P ]   [  F   ]
/// ```
#[derive(Debug, Clone)]
pub struct KktSystem {
    pub matrix: SparseBlock,
    pub rhs: Vec<f64>,
    pub n_state: usize,
    pub n_phi: usize,
    pub n_psi: usize,
}

impl KktSystem {
    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }
}

pub fn build_kkt(sys: &ConstrainedSystem) -> KktSystem {
    let (nw, nf, np) = (sys.n_free(), sys.n_phi(), sys.n_psi());
    let (o_phi, o_psi, o_mult) = (nw, nw + nf, nw + nf + np);
    let dim = 2 * nw + nf + np;
    let a_t = sys.state_op.transpose();
    let neg_b = sys.flux_op.scaled(-1.0);
    let neg_b_t = neg_b.transpose();
    let neg_c = sys.mismatch_op.scaled(-1.0);
    let neg_c_t = neg_c.transpose();
    let two_g_psi = sys.g_psi.scaled(2.0);
    let neg_ca = sys.pressure_op.scaled(-1.0);
    let neg_ca_t = neg_ca.transpose();
    let matrix = stack_blocks(
        dim,
        dim,
        &[
            (0, 0, &sys.functional_state),
            (0, o_psi, &neg_c),
            (0, o_mult, &a_t),
            (o_phi, o_mult, &neg_b_t),
            (o_psi, 0, &neg_c_t),
            (o_psi, o_psi, &two_g_psi),
            (o_psi, o_mult, &neg_ca_t),
            (o_mult, 0, &sys.state_op),
            (o_mult, o_phi, &neg_b),
            (o_mult, o_psi, &neg_ca),
        ],
    );
    let mut rhs = vec![0.0; dim];
    for (r, v) in rhs[..nw].iter_mut().zip(&sys.lin_state) {
        *r = -v;
    }
    for (r, v) in rhs[o_psi..o_mult].iter_mut().zip(&sys.lin_psi) {
        *r = -v;
    }
    rhs[o_mult..].copy_from_slice(&sys.rhs);
    KktSystem {
        matrix,
        rhs,
        n_state: nw,
        n_phi: nf,
        n_psi: np,
    }
}

/// Factorizes and solves the saddle-point system. `blocks`, when given, is
/// used to report the functional from the unreduced blocks.
pub fn solve_kkt_direct(sys: &ConstrainedSystem, blocks: Option<&CoupledBlocks>) -> Result<SolveResult> {
    let start = Instant::now();
    let kkt = build_kkt(sys);
    let lu = SparseLu::new(kkt.matrix.clone())?;
    let x = lu.solve(&kkt.rhs);
    let mut r = kkt.rhs.clone();
    kkt.matrix.mul_vec_add(-1.0, &x, &mut r);
    let residual = norm2(&r) / norm2(&kkt.rhs).max(f64::MIN_POSITIVE);
    let (nw, nf, np) = (kkt.n_state, kkt.n_phi, kkt.n_psi);
    let w = &x[..nw];
    let phi = x[nw..nw + nf].to_vec();
    let psi = x[nw + nf..nw + nf + np].to_vec();
    let p_free: Vec<f64> = x[nw + nf + np..].iter().map(|v| -v).collect();
    let mut out = SolveResult::from_state(sys, w, phi, psi, &p_free, blocks);
    out.iterations = 1;
    out.residual = if norm2(&kkt.rhs) == 0.0 { norm2(&r) } else { residual };
    out.wall_time = start.elapsed();
    log::debug!("KKT solve: dim {}, bandwidth {:?}, residual {:e}", kkt.dim(), lu.bandwidth(), out.residual);
    Ok(out)
}

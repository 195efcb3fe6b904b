//! Spectral condition numbers by dense decomposition.

use crate::error::{Error, Result};
use crate::linalg::SparseBlock;

pub const DEFAULT_DENSE_CAP: usize = 5000;

/// 2-norm condition number `σ_max / σ_min`; infinite for a singular matrix.
/// Symmetric matrices use the eigenvalue moduli, others the singular values.
pub fn estimate_condition(m: &SparseBlock, cap: usize) -> Result<f64> {
    let dim = m.rows().max(m.cols());
    if dim > cap {
        return Err(Error::DenseCapExceeded { dim, cap });
    }
    if dim == 0 {
        return Err(Error::Undefined("condition number of an empty matrix"));
    }
    let dense = m.to_dense();
    let values: Vec<f64> = if m.rows() == m.cols() && m.symmetry_defect() <= 1e-14 * m.max_abs() {
        dense.symmetric_eigenvalues().iter().map(|v| v.abs()).collect()
    } else {
        dense.singular_values().iter().copied().collect()
    };
    let max = values.iter().copied().fold(0.0, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(if min == 0.0 { f64::INFINITY } else { max / min })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn simple_condition_numbers() {
        assert_eq!(estimate_condition(&SparseBlock::identity(4), 10).unwrap(), 1.0);
        let d = SparseBlock::from_dense(&DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 10.0])));
        assert!((estimate_condition(&d, 10).unwrap() - 10.0).abs() < 1e-12);
        assert!(matches!(estimate_condition(&SparseBlock::identity(11), 10), Err(Error::DenseCapExceeded { .. })));
    }
}

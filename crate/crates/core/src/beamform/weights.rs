use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

use super::CovarianceEstimate;

/// Minimum variance weights `w = R⁻¹1 / (1ᵀR⁻¹1)` via Cholesky.
pub fn mv_weights(cov: &CovarianceEstimate) -> Result<DVector<f64>> {
    let l = cov.r.nrows();
    let ones = DVector::from_element(l, 1.0);
    let chol = cov.r.clone().cholesky().ok_or_else(|| {
        Error::Numerical(format!(
            "covariance is not positive definite (condition number {})",
            condition_number(&cov.r)
        ))
    })?;
    let z = chol.solve(&ones);
    let denom = z.sum();
    if !(denom.is_finite() && denom != 0.0) {
        return Err(Error::Numerical(format!(
            "1ᵀR⁻¹1 = {denom} (condition number {})",
            condition_number(&cov.r)
        )));
    }
    Ok(z / denom)
}

fn condition_number(r: &DMatrix<f64>) -> f64 {
    let ev = r.clone().symmetric_eigenvalues();
    let max = ev.iter().fold(f64::NEG_INFINITY, |m, v| m.max(v.abs()));
    let min = ev.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    max / min
}

/// Eigenpairs sorted by descending eigenvalue and the size of the signal
/// subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenBasis {
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors as columns, in the order of `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
    pub selected: usize,
}

impl EigenBasis {
    /// The first `selected` eigenvectors.
    pub fn signal_vectors(&self) -> DMatrix<f64> {
        self.eigenvectors.columns(0, self.selected).into_owned()
    }
}

/// Eigendecomposition of `R`, keeping every eigenvector whose eigenvalue is
/// at least `criterion · λ_max` (ties included).
pub fn signal_subspace(cov: &CovarianceEstimate, criterion: f64) -> Result<EigenBasis> {
    let l = cov.r.nrows();
    let eig = SymmetricEigen::try_new(cov.r.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical(format!("eigensolver did not converge on a {l}×{l} covariance")))?;
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite eigenvalue".into()));
    }
    let mut order: Vec<usize> = (0..l).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut eigenvectors = DMatrix::zeros(l, l);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    let cutoff = criterion * eigenvalues[0];
    let selected = eigenvalues.iter().take_while(|&&v| v >= cutoff).count().max(1);
    Ok(EigenBasis {
        eigenvalues,
        eigenvectors,
        selected,
    })
}

/// Projects MV weights onto the signal subspace: `E_s E_sᵀ w`.
pub fn ebmv_weights(w_mv: &DVector<f64>, basis: &EigenBasis) -> DVector<f64> {
    let es = basis.eigenvectors.columns(0, basis.selected);
    let coeffs = es.transpose() * w_mv;
    es * coeffs
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cov(r: DMatrix<f64>) -> CovarianceEstimate {
        let l = r.nrows();
        CovarianceEstimate {
            r,
            subarray_length: l,
            loading: 0.0,
        }
    }

    #[test]
    fn identity_gives_uniform_weights_exactly() {
        let w = mv_weights(&cov(DMatrix::identity(4, 4))).unwrap();
        assert!(w.iter().all(|&v| v == 0.25));
    }

    #[test]
    fn diagonal_two_by_two() {
        let w = mv_weights(&cov(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0])))).unwrap();
        assert!((w[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((w[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn indefinite_matrix_reports_condition() {
        let r = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        match mv_weights(&cov(r)) {
            Err(Error::Numerical(msg)) => assert!(msg.contains("condition number")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn threshold_rule() {
        let basis = signal_subspace(&cov(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 10.0, 0.4]))), 0.05).unwrap();
        assert_eq!(basis.eigenvalues, vec![10.0, 1.0, 0.4]);
        assert_eq!(basis.selected, 2);
        let basis = signal_subspace(&cov(DMatrix::identity(5, 5)), 0.05).unwrap();
        assert_eq!(basis.selected, 5);
    }

    #[test]
    fn tie_at_cutoff_is_included() {
        let basis = signal_subspace(&cov(DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0, 0.5]))), 0.25).unwrap();
        assert_eq!(basis.selected, 2);
    }

    #[test]
    fn coordinate_projection() {
        let basis = EigenBasis {
            eigenvalues: vec![3.0, 2.0, 1.0],
            eigenvectors: DMatrix::identity(3, 3),
            selected: 1,
        };
        let w = DVector::from_vec(vec![0.5, 0.3, 0.2]);
        assert_eq!(ebmv_weights(&w, &basis).as_slice(), &[0.5, 0.0, 0.0]);
    }
}

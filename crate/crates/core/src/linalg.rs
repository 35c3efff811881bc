//! Small dense linear-algebra helpers shared by the guiding terms.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

/// Inverse of a symmetric positive definite matrix, `None` if the Cholesky
/// factorisation fails.
pub fn spd_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let sym = symmetrize(m);
    Cholesky::new(sym).map(|c| c.inverse())
}

pub fn spd_cholesky(m: &DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    Cholesky::new(symmetrize(m))
}

/// `r' M^{-1} r` via a Cholesky solve.
pub fn inv_quad_form(chol: &Cholesky<f64, Dyn>, r: &DVector<f64>) -> f64 {
    let w = chol.solve(r);
    r.dot(&w)
}

pub fn log_det_spd(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn eigenvalues_sym(m: &DMatrix<f64>) -> DVector<f64> {
    SymmetricEigen::new(symmetrize(m)).eigenvalues
}

/// Raises every eigenvalue of a symmetric PSD matrix to at least
/// `rel_floor * lambda_max` (or to 1 when the matrix vanishes), which turns
/// rank-deficient Langevin covariances into usable metrics.
pub fn floor_eigenvalues(m: &DMatrix<f64>, rel_floor: f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(symmetrize(m));
    let max = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let floor = if max > 0.0 { rel_floor * max } else { 1.0 };
    let vals = eig.eigenvalues.map(|v| v.max(floor));
    let q = &eig.eigenvectors;
    symmetrize(&(q * DMatrix::from_diagonal(&vals) * q.transpose()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_of_spd() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let inv = spd_inverse(&m).unwrap();
        assert!((&m * inv - DMatrix::identity(2, 2)).norm() < 1e-12);
        assert!(spd_inverse(&DMatrix::zeros(2, 2)).is_none());
    }

    #[test]
    fn floor_fixes_rank_deficiency() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let f = floor_eigenvalues(&m, 1e-3);
        let e = eigenvalues_sym(&f);
        assert!(e.min() >= 2e-3 * (1.0 - 1e-12));
        assert!((e.max() - 2.0).abs() < 1e-12);
        assert_eq!(floor_eigenvalues(&DMatrix::zeros(2, 2), 1e-3), DMatrix::identity(2, 2));
    }

    #[test]
    fn quad_form_and_log_det() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 8.0]);
        let c = spd_cholesky(&m).unwrap();
        let r = DVector::from_vec(vec![2.0, 4.0]);
        assert!((inv_quad_form(&c, &r) - 4.0).abs() < 1e-12);
        assert!((log_det_spd(&c) - 16f64.ln()).abs() < 1e-12);
    }
}

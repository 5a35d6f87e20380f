//! Small complex linear-algebra helpers shared by the estimators and the
//! combiners.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CVector = DVector<Complex64>;
pub type CMatrix = DMatrix<Complex64>;

/// Relative ridge added to a Hermitian system that fails to factor.
pub const RIDGE: f64 = 1e-12;

/// Solves `m x = rhs` for a Hermitian positive (semi)definite `m`.
///
/// Falls back to a ridge of `RIDGE * max(mean diagonal, 1)` when the
/// Cholesky factorization fails. The returned flag reports the fallback.
pub fn hermitian_solve(m: &CMatrix, rhs: &CMatrix) -> (CMatrix, bool) {
    if let Some(ch) = m.clone().cholesky() {
        return (ch.solve(rhs), false);
    }
    let k = m.nrows().max(1);
    let scale = (m.diagonal().iter().map(|d| d.re.abs()).sum::<f64>() / k as f64).max(1.0);
    let mut mut_m = m.clone();
    let mut ridge = RIDGE * scale;
    loop {
        for i in 0..m.nrows() {
            mut_m[(i, i)] = m[(i, i)] + Complex64::new(ridge, 0.0);
        }
        if let Some(ch) = mut_m.clone().cholesky() {
            log::warn!("singular Hermitian system regularized with ridge {ridge:.3e}");
            return (ch.solve(rhs), true);
        }
        ridge *= 10.0;
    }
}

pub fn hermitian_solve_vec(m: &CMatrix, rhs: &CVector) -> (CVector, bool) {
    let rhs = CMatrix::from_column_slice(rhs.len(), 1, rhs.as_slice());
    let (x, reg) = hermitian_solve(m, &rhs);
    (CVector::from_column_slice(x.as_slice()), reg)
}

/// Least-squares coefficients `(A^H A)^{-1} A^H y`.
pub fn least_squares(a: &CMatrix, y: &CVector) -> (CVector, bool) {
    let gram = a.adjoint() * a;
    let rhs = a.adjoint() * y;
    hermitian_solve_vec(&gram, &rhs)
}

pub fn norm_sqr(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// `exp(j phase)`.
#[inline]
pub fn cis(phase: f64) -> Complex64 {
    let (s, c) = phase.sin_cos();
    Complex64::new(c, s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ridge_fallback_on_rank_deficient_gram() {
        let col = CVector::from_element(4, Complex64::new(1.0, 0.0));
        let a = CMatrix::from_columns(&[col.clone(), col.clone()]);
        let y = col * Complex64::new(2.0, 0.0);
        let (c, reg) = least_squares(&a, &y);
        assert!(reg);
        let fit = &a * &c;
        assert!((fit - y).norm() < 1e-6);
    }

    #[test]
    fn exact_solve_without_ridge() {
        let m = CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(2.0, 0.0),
                Complex64::new(0.0, 1.0),
                Complex64::new(0.0, -1.0),
                Complex64::new(3.0, 0.0),
            ],
        );
        let rhs = CVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 2.0)]);
        let (x, reg) = hermitian_solve_vec(&m, &rhs);
        assert!(!reg);
        assert!((&m * x - rhs).norm() < 1e-14);
    }
}

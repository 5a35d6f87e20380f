//! Uplink multiuser combining and rate evaluation.
//!
//! Channels are the columns of an `N x K` matrix `H`. A combiner matrix `F`
//! has one column per user and the SINR of user `k` is
//! `|h_k^H f_k|^2 / (sum_{i != k} |h_k^H f_i|^2 + sigma2)`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_solve, CMatrix, CVector};

/// MMSE combiner `H (H^H H + sigma2 I)^{-1}` scaled to `||F||_F^2 = K`.
///
/// Falls back to a tiny ridge when the Gram matrix is singular (`sigma2 = 0`
/// with rank-deficient channels); the flag reports that.
pub fn mmse_combiner(h_hat: &CMatrix, sigma2: f64) -> Result<(CMatrix, bool)> {
    let k = h_hat.ncols();
    if k == 0 {
        return Ok((h_hat.clone(), false));
    }
    if !(sigma2.is_finite() && sigma2 >= 0.0) {
        return Err(Error::arg(
            "sigma2",
            format!("must be finite and nonnegative, got {sigma2}"),
        ));
    }
    let mut gram = h_hat.ad_mul(h_hat);
    for i in 0..k {
        gram[(i, i)] += Complex64::new(sigma2, 0.0);
    }
    let (inv, regularized) = hermitian_solve(&gram, &CMatrix::identity(k, k));
    let f = h_hat * inv;
    let norm = f.norm();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(Error::NonFinite("MMSE combiner"));
    }
    Ok((f * Complex64::new((k as f64).sqrt() / norm, 0.0), regularized))
}

/// Maximum ratio combiner `h / (h^H h)`, so that `h^H f = 1`.
pub fn mrc_combiner(h: &CVector) -> Result<CVector> {
    let power = h.norm_squared();
    if !(power > 0.0) {
        return Err(Error::arg("h", "zero channel has no matched combiner"));
    }
    Ok(h.unscale(power))
}

/// SINR of user `k`.
pub fn sinr(h_all: &CMatrix, f_all: &CMatrix, k: usize, sigma2: f64) -> f64 {
    let hk = h_all.column(k);
    let mut signal = 0.0;
    let mut interference = 0.0;
    for i in 0..f_all.ncols() {
        let power = hk.dotc(&f_all.column(i)).norm_sqr();
        if i == k {
            signal = power;
        } else {
            interference += power;
        }
    }
    signal / (interference + sigma2)
}

/// Sum of `log2(1 + SINR_k)` over all users, in bits/s/Hz.
pub fn sum_rate(h_all: &CMatrix, f_all: &CMatrix, sigma2: f64) -> f64 {
    (0..h_all.ncols())
        .map(|k| (1.0 + sinr(h_all, f_all, k, sigma2)).log2())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_user_matched_sinr() {
        let h = CMatrix::from_column_slice(2, 1, &[Complex64::new(3.0, 0.0), Complex64::new(0.0, 4.0)]);
        let f = h.unscale(5.0);
        assert!((sinr(&h, &f, 0, 0.5) - 50.0).abs() < 1e-12);
    }

    #[test]
    fn mrc_is_unit_matched() {
        let h = CVector::from_vec(vec![Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)]);
        let f = mrc_combiner(&h).unwrap();
        assert!((f - &h).norm() < 1e-15);
        assert!(mrc_combiner(&CVector::zeros(2)).is_err());
    }

    #[test]
    fn orthogonal_user_gets_zero_rate() {
        let h = CMatrix::from_column_slice(2, 1, &[Complex64::ONE, Complex64::ZERO]);
        let f = CMatrix::from_column_slice(2, 1, &[Complex64::ZERO, Complex64::ONE]);
        assert_eq!(sinr(&h, &f, 0, 1.0), 0.0);
        assert_eq!(sum_rate(&h, &f, 1.0), 0.0);
    }
}

//! Dense determinant helpers on top of nalgebra's LU factorization.

use crate::error::{Error, Result};
use nalgebra::{ComplexField, DMatrix, DVector};

/// `log|det M|` with the determinant's sign.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogDet {
    pub log_abs: f64,
    /// `+1`, `-1`, or `0` for an exactly singular factor.
    pub sign: f64,
    /// `max|u_ii| / min|u_ii|` of the LU factor, a cheap conditioning proxy.
    pub pivot_ratio: f64,
}

/// Log-determinant via partial-pivoting LU, summing `log|u_ii|`.
pub fn log_det(m: &DMatrix<f64>) -> LogDet {
    assert!(m.is_square(), "log_det of a non-square matrix");
    let lu = m.clone().lu();
    let mut sign: f64 = lu.p().determinant();
    let u = lu.u();
    let mut log_abs = 0.0;
    let mut umax = 0.0f64;
    let mut umin = f64::INFINITY;
    for i in 0..u.nrows() {
        let d = u[(i, i)];
        if d == 0.0 {
            sign = 0.0;
        }
        sign *= d.signum();
        log_abs += d.abs().ln();
        umax = umax.max(d.abs());
        umin = umin.min(d.abs());
    }
    LogDet {
        log_abs,
        sign,
        pivot_ratio: umax / umin,
    }
}

/// `log det M`, failing loudly unless the determinant is finite and positive.
pub fn log_det_positive(m: &DMatrix<f64>, what: &str) -> Result<f64> {
    let ld = log_det(m);
    if !(ld.sign > 0.0) || !ld.log_abs.is_finite() {
        return Err(Error::Breakdown {
            message: format!(
                "{what}: determinant is not positive (sign {}, log|det| {})",
                ld.sign, ld.log_abs
            ),
            condition: ld.pivot_ratio,
        });
    }
    Ok(ld.log_abs)
}

/// `W^{1/2} M W^{-1/2}` for a positive diagonal `W`.
pub fn weight_similarity(m: &DMatrix<f64>, weights: &DVector<f64>) -> DMatrix<f64> {
    let sq = weights.map(f64::sqrt);
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| sq[i] * m[(i, j)] / sq[j])
}

/// Frobenius norm of `W^{1/2} M W^{-1/2}`.
pub fn weighted_norm(m: &DMatrix<f64>, weights: &DVector<f64>) -> f64 {
    weight_similarity(m, weights).norm()
}

/// Dense inverse with a breakdown error carrying the pivot ratio.
pub fn inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let lu = m.clone().lu();
    let ld = log_det(m);
    lu.try_inverse().ok_or(Error::Breakdown {
        message: format!("{what}: matrix is singular"),
        condition: ld.pivot_ratio,
    })
}

/// Solves `A X = B`.
pub fn solve(a: &DMatrix<f64>, b: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let lu = a.clone().lu();
    lu.solve(b).ok_or_else(|| Error::Breakdown {
        message: format!("{what}: matrix is singular"),
        condition: log_det(a).pivot_ratio,
    })
}

/// `tr(A^{-1} B)`.
pub fn trace_solve(a: &DMatrix<f64>, b: &DMatrix<f64>, what: &str) -> Result<f64> {
    Ok(solve(a, b, what)?.trace())
}

/// Frobenius bound under which [`log_det_near_identity`] uses its series.
pub const NEAR_IDENTITY_BOUND: f64 = 0.1;

/// `log det(I + X) = Σ_k (-1)^{k+1} tr(X^k)/k` when `‖X‖_F ≤ NEAR_IDENTITY_BOUND`.
///
/// Unlike an LU of `I + X`, this keeps relative accuracy when the result is
/// far below machine epsilon. Returns `None` outside the bound.
pub fn log_det_near_identity<T: ComplexField<RealField = f64>>(x: &DMatrix<T>) -> Option<T> {
    assert!(x.is_square(), "log_det_near_identity of a non-square matrix");
    let norm = x.norm();
    if !(norm <= NEAR_IDENTITY_BOUND) {
        return None;
    }
    if norm == 0.0 {
        return Some(T::zero());
    }
    // tr(P_j P_j) and tr(P_{j+1} P_j) give the even and odd powers from X^j
    let tr_prod = |a: &DMatrix<T>, b: &DMatrix<T>| a.component_mul(&b.transpose()).sum();
    let mut sum = x.trace();
    let mut low = x.clone();
    let mut k = 2usize;
    loop {
        let even = tr_prod(&low, &low);
        let high = &low * x;
        let odd = tr_prod(&high, &low);
        let term_even = even / T::from_subset(&(k as f64));
        let term_odd = odd / T::from_subset(&((k + 1) as f64));
        sum += term_odd - term_even;
        // the tail is bounded by a geometric series in ‖X‖_F
        let bound = norm.powi(k as i32 + 2) / (1.0 - norm);
        if bound <= 1e-17 * sum.clone().modulus() || bound < f64::MIN_POSITIVE || k > 400 {
            return Some(sum);
        }
        low = high;
        k += 2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_determinants() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 3.0, 0.0]);
        let ld = log_det(&m);
        assert_eq!(ld.sign, -1.0);
        assert!((ld.log_abs - 6f64.ln()).abs() < 1e-15);
        assert!(log_det_positive(&m, "swap").is_err());
        let z = DMatrix::<f64>::zeros(3, 3);
        assert_eq!(log_det(&z).sign, 0.0);
        let id = DMatrix::<f64>::identity(4, 4) * 2.0;
        assert!((log_det_positive(&id, "id").unwrap() - 4.0 * 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn near_identity_keeps_relative_accuracy() {
        let x = DMatrix::from_row_slice(2, 2, &[0.0, 1e-10, 2e-10, 0.0]);
        let v = log_det_near_identity(&x).unwrap();
        assert!((v - (-2e-20f64).ln_1p()).abs() < 1e-35);
        assert!(log_det_near_identity(&(DMatrix::<f64>::identity(2, 2) * 0.5)).is_none());
        let c = DMatrix::from_row_slice(
            2,
            2,
            &[
                num_complex::Complex64::new(0.0, 0.0),
                num_complex::Complex64::new(0.01, 0.02),
                num_complex::Complex64::new(0.01, -0.02),
                num_complex::Complex64::new(0.0, 0.0),
            ],
        );
        let v = log_det_near_identity(&c).unwrap();
        assert!((v.re - (-5e-4f64).ln_1p()).abs() < 1e-17 && v.im.abs() < 1e-20);
    }

    proptest! {
        #[test]
        fn near_identity_matches_lu(entries in prop::collection::vec(-1.0..1.0f64, 16)) {
            // at the edge of the bound, so high powers matter
            let x = DMatrix::from_row_slice(4, 4, &entries);
            prop_assume!(x.norm() > 1e-3);
            let x = &x * (0.099 / x.norm());
            let series = log_det_near_identity(&x).unwrap();
            let lu = log_det_positive(&(DMatrix::identity(4, 4) + &x), "near identity").unwrap();
            prop_assert!((series - lu).abs() < 1e-15);
        }

        #[test]
        fn matches_nalgebra_determinant(entries in prop::collection::vec(-1.0..1.0f64, 25)) {
            let m = DMatrix::from_row_slice(5, 5, &entries) + DMatrix::<f64>::identity(5, 5) * 0.3;
            let det = m.determinant();
            let ld = log_det(&m);
            prop_assume!(det.abs() > 1e-8);
            prop_assert_eq!(ld.sign, det.signum());
            prop_assert!((ld.log_abs - det.abs().ln()).abs() < 1e-10);
        }

        #[test]
        fn similarity_preserves_log_det(entries in prop::collection::vec(-0.2..0.2f64, 16), w in prop::collection::vec(0.1..3.0f64, 4)) {
            let m = DMatrix::from_row_slice(4, 4, &entries) + DMatrix::<f64>::identity(4, 4);
            let w = DVector::from_vec(w);
            let a = log_det(&m).log_abs;
            let b = log_det(&weight_similarity(&m, &w)).log_abs;
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}

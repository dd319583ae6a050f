//! Thin wrappers over `nalgebra` for the dense solves the Prony code needs.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

fn all_finite(a: &CMatrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Singular values in descending order; NaN entries for non-finite input.
pub fn singular_values(a: &CMatrix) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    if !all_finite(a) {
        return alloc::vec![f64::NAN; a.nrows().min(a.ncols())];
    }
    let mut sv: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

/// Ratio of extreme singular values; infinite for rank-deficient input.
pub fn condition_number(a: &CMatrix) -> f64 {
    let sv = singular_values(a);
    match (sv.first(), sv.last()) {
        (Some(&hi), _) if hi.is_nan() => f64::NAN,
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 0.0,
    }
}

/// Number of singular values above `ratio * σ_max`.
pub fn effective_rank(a: &CMatrix, ratio: f64) -> usize {
    let sv = singular_values(a);
    match sv.first() {
        Some(&hi) if hi > 0.0 && hi.is_finite() => sv.iter().filter(|&&s| s > ratio * hi).count(),
        _ => 0,
    }
}

/// Minimum-norm least-squares solution of `a x ≈ b`; NaN for non-finite
/// input so that callers see the failure in their residuals.
pub fn lstsq(a: &CMatrix, b: &CVector) -> CVector {
    let n = a.ncols();
    if a.nrows() == 0 || n == 0 {
        return CVector::zeros(n);
    }
    if !all_finite(a) || !b.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return CVector::from_element(n, Complex64::new(f64::NAN, f64::NAN));
    }
    // Householder QR is more accurate than the iterative SVD when the
    // columns are comfortably independent; the SVD handles the rest.
    if a.nrows() >= n {
        let qr = a.clone().qr();
        let r = qr.r();
        let diag: Vec<f64> = (0..n).map(|i| r[(i, i)].norm()).collect();
        let hi = diag.iter().copied().fold(0.0, f64::max);
        let lo = diag.iter().copied().fold(f64::INFINITY, f64::min);
        if hi > 0.0 && lo > hi * 1e-8 {
            let qtb = qr.q().adjoint() * b;
            if let Some(x) = r.solve_upper_triangular(&qtb) {
                return x;
            }
        }
    }
    let solve = |rhs: &CVector| {
        let svd = a.clone().svd(true, true);
        let hi = svd.singular_values.iter().copied().fold(0.0, f64::max);
        if hi == 0.0 || !hi.is_finite() {
            return CVector::zeros(n);
        }
        let eps = hi * 1e-15 * (a.nrows().max(n) as f64);
        svd.solve(rhs, eps).unwrap_or_else(|_| CVector::zeros(n))
    };
    let x = solve(b);
    // one refinement step recovers digits the SVD iteration leaves behind
    let r = b - a * &x;
    x + solve(&r)
}

/// Solves a small symmetric positive (semi)definite real system.
pub fn solve_symmetric(a: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        return Some(ch.solve(b));
    }
    a.lu().solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tall_unit_vandermonde_solves_to_rounding() {
        let xs = [0.13243278119071, 0.6074349900808, 1.0873432046276];
        let a = CMatrix::from_fn(11, 3, |l, q| Complex64::from_polar(1.0, -xs[q] * l as f64));
        let truth = CVector::from_fn(3, |q, _| Complex64::new(1.0 + q as f64 * 0.3, 0.0));
        let x = lstsq(&a, &(&a * &truth));
        assert!((x - truth).norm() < 1e-13);
    }

    #[test]
    fn non_finite_input_does_not_panic() {
        let a = CMatrix::from_fn(3, 2, |i, _| Complex64::new(if i == 1 { f64::INFINITY } else { 1.0 }, 0.0));
        let b = CVector::from_element(3, Complex64::new(1.0, 0.0));
        assert!(lstsq(&a, &b)[0].re.is_nan());
        assert!(condition_number(&a).is_nan());
    }

    #[test]
    fn least_squares_recovers_exact_solution() {
        let a = CMatrix::from_fn(5, 2, |i, j| Complex64::new((i + 1) as f64, (j * i) as f64));
        let x = CVector::from_vec(alloc::vec![Complex64::new(1.0, -2.0), Complex64::new(0.5, 0.25)]);
        let b = &a * &x;
        let got = lstsq(&a, &b);
        assert!((got - x).norm() < 1e-12);
        assert_eq!(effective_rank(&a, 1e-10), 2);
        assert_eq!(effective_rank(&CMatrix::zeros(3, 3), 1e-10), 0);
    }
}

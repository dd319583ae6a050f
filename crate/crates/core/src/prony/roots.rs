//! Simultaneous polynomial root finding (Durand–Kerner) with randomized
//! restarts and a Newton-deflation fallback.

use alloc::vec::Vec;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOLERANCE: f64 = 1e-13;
const MAX_ITERATIONS: usize = 500;
const MAX_RESTARTS: usize = 8;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("polynomial root finding failed after {restarts} restarts")]
pub struct RootFindingFailure {
    pub restarts: usize,
}

/// Horner evaluation; `coeffs` are in ascending order of degree.
pub fn eval(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

fn eval_with_derivative(coeffs: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let zero = Complex64::new(0.0, 0.0);
    coeffs.iter().rev().fold((zero, zero), |(p, dp), &c| (p * z + c, dp * z + p))
}

/// All roots of `Σ coeffs[k] z^k`. Trailing (leading-degree) zeros are
/// ignored; a constant polynomial has no roots.
pub fn polynomial_roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>, RootFindingFailure> {
    let degree = match coeffs.iter().rposition(|c| c.norm() > 0.0) {
        Some(d) => d,
        None => return Ok(Vec::new()),
    };
    if degree == 0 {
        return Ok(Vec::new());
    }
    let lead = coeffs[degree];
    let monic: Vec<Complex64> = coeffs[..=degree].iter().map(|c| c / lead).collect();
    if degree == 1 {
        return Ok(alloc::vec![-monic[0]]);
    }

    let radius = 1.0 + monic[..degree].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0f_d00d);
    for attempt in 0..=MAX_RESTARTS {
        let mut z: Vec<Complex64> = (0..degree)
            .map(|k| {
                let angle = 2.0 * core::f64::consts::PI * k as f64 / degree as f64 + 0.4;
                Complex64::from_polar(0.5 * radius, angle)
            })
            .collect();
        if attempt > 0 {
            for zk in &mut z {
                *zk *= Complex64::from_polar(rng.random_range(0.5..1.5), rng.random_range(-0.5..0.5));
            }
        }
        if durand_kerner(&monic, &mut z) {
            for zk in &mut z {
                *zk = polish(&monic, *zk);
            }
            return Ok(z);
        }
    }
    deflation_roots(&monic).ok_or(RootFindingFailure {
        restarts: MAX_RESTARTS,
    })
}

fn durand_kerner(monic: &[Complex64], z: &mut [Complex64]) -> bool {
    let n = z.len();
    for _ in 0..MAX_ITERATIONS {
        let mut max_change: f64 = 0.0;
        for k in 0..n {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..n {
                if j != k {
                    denom *= z[k] - z[j];
                }
            }
            if denom.norm() == 0.0 {
                return false;
            }
            let delta = eval(monic, z[k]) / denom;
            if !delta.re.is_finite() || !delta.im.is_finite() {
                return false;
            }
            z[k] -= delta;
            max_change = max_change.max(delta.norm() / z[k].norm().max(1.0));
        }
        if max_change < TOLERANCE || z.iter().all(|&zk| at_rounding_level(monic, zk)) {
            return true;
        }
    }
    false
}

/// `|p(z)|` within a small multiple of the rounding error of evaluating it,
/// where clustered roots stop Durand–Kerner from settling further.
fn at_rounding_level(coeffs: &[Complex64], z: Complex64) -> bool {
    let r = z.norm();
    let scale = coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.norm());
    eval(coeffs, z).norm() <= 16.0 * f64::EPSILON * coeffs.len() as f64 * scale
}

/// A few Newton steps on the full polynomial, kept only while they help.
fn polish(coeffs: &[Complex64], mut z: Complex64) -> Complex64 {
    let mut best = eval(coeffs, z).norm();
    for _ in 0..4 {
        let (p, dp) = eval_with_derivative(coeffs, z);
        if dp.norm() == 0.0 {
            break;
        }
        let cand = z - p / dp;
        let val = eval(coeffs, cand).norm();
        if val < best {
            z = cand;
            best = val;
        } else {
            break;
        }
    }
    z
}

fn deflation_roots(monic: &[Complex64]) -> Option<Vec<Complex64>> {
    let mut poly = monic.to_vec();
    let mut roots = Vec::with_capacity(monic.len() - 1);
    while poly.len() > 2 {
        let mut z = Complex64::new(0.4, 0.9);
        let mut converged = false;
        for _ in 0..MAX_ITERATIONS {
            let (p, dp) = eval_with_derivative(&poly, z);
            if dp.norm() == 0.0 {
                z += Complex64::new(0.1, 0.05);
                continue;
            }
            let step = p / dp;
            z -= step;
            if step.norm() < TOLERANCE * z.norm().max(1.0) {
                converged = true;
                break;
            }
        }
        if !converged || !z.re.is_finite() || !z.im.is_finite() {
            return None;
        }
        let z = polish(monic, z);
        roots.push(z);
        // synthetic division by (x - z)
        let deg = poly.len() - 1;
        let mut quotient = alloc::vec![Complex64::new(0.0, 0.0); deg];
        let mut carry = poly[deg];
        for k in (0..deg).rev() {
            quotient[k] = carry;
            carry = poly[k] + carry * z;
        }
        poly = quotient;
    }
    roots.push(-poly[0] / poly[1]);
    Some(roots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn from_roots(roots: &[Complex64]) -> Vec<Complex64> {
        let mut c = vec![Complex64::new(1.0, 0.0)];
        for &r in roots {
            let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
            for (k, &ck) in c.iter().enumerate() {
                next[k + 1] += ck;
                next[k] -= ck * r;
            }
            c = next;
        }
        c
    }

    fn matched(found: &[Complex64], truth: &[Complex64], tol: f64) -> bool {
        let mut used = vec![false; truth.len()];
        found.iter().all(|f| {
            let best = (0..truth.len())
                .filter(|&i| !used[i])
                .min_by(|&a, &b| (truth[a] - f).norm().total_cmp(&(truth[b] - f).norm()));
            match best {
                Some(i) if (truth[i] - f).norm() < tol => {
                    used[i] = true;
                    true
                }
                _ => false,
            }
        })
    }

    #[test]
    fn unit_circle_roots() {
        let truth: Vec<Complex64> = [0.1, 0.35, 2.0, -1.2, 3.0]
            .iter()
            .map(|&t| Complex64::from_polar(1.0, t))
            .collect();
        let roots = polynomial_roots(&from_roots(&truth)).unwrap();
        assert_eq!(roots.len(), truth.len());
        assert!(matched(&roots, &truth, 1e-12));
    }

    #[test]
    fn deflation_fallback_agrees() {
        let truth = [Complex64::new(2.0, 0.0), Complex64::new(-1.0, 0.5), Complex64::new(0.3, -0.7)];
        let roots = deflation_roots(&from_roots(&truth)).unwrap();
        assert!(matched(&roots, &truth, 1e-12));
    }

    #[test]
    fn degenerate_inputs() {
        assert!(polynomial_roots(&[Complex64::new(3.0, 0.0)]).unwrap().is_empty());
        let r = polynomial_roots(&[Complex64::new(-6.0, 0.0), Complex64::new(2.0, 0.0)]).unwrap();
        assert_eq!(r, vec![Complex64::new(3.0, 0.0)]);
    }
}

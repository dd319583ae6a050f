use alloc::boxed::Box;
use alloc::vec::Vec;

use num_complex::Complex64;

use super::roots::polynomial_roots;
use super::{PronyError, PronySolution, PronyTerm, StandardPronySystem};
use crate::linalg::{condition_number, effective_rank, lstsq, CMatrix, CVector};

/// Singular values below this fraction of the largest count as zero when
/// estimating the order of a standard system.
pub const RANK_RATIO: f64 = 1e-10;

pub(super) fn moment_residual(moments: &[Complex64], terms: &[PronyTerm]) -> f64 {
    let mut powers: Vec<Complex64> = terms.iter().map(|_| Complex64::new(1.0, 0.0)).collect();
    let mut worst: f64 = 0.0;
    for m in moments {
        let fit: Complex64 = terms.iter().zip(&powers).map(|(t, p)| t.amplitude * p).sum();
        worst = worst.max((fit - m).norm());
        for (p, t) in powers.iter_mut().zip(terms) {
            *p *= t.node;
        }
    }
    worst
}

pub(crate) fn vandermonde(nodes: &[Complex64], rows: usize) -> CMatrix {
    CMatrix::from_fn(rows, nodes.len(), |l, q| nodes[q].powi(l as i32))
}

/// Amplitudes by least squares against fixed nodes.
pub(crate) fn fit_amplitudes(moments: &[Complex64], nodes: &[Complex64]) -> PronySolution {
    let v = vandermonde(nodes, moments.len());
    let alpha = lstsq(&v, &CVector::from_column_slice(moments));
    let mut terms: Vec<PronyTerm> = nodes
        .iter()
        .zip(alpha.iter())
        .map(|(&node, &amplitude)| PronyTerm { amplitude, node })
        .collect();
    terms.sort_by(|a, b| a.node.arg().total_cmp(&b.node.arg()).then(a.node.norm().total_cmp(&b.node.norm())));
    PronySolution {
        residual: moment_residual(moments, &terms),
        condition_estimate: condition_number(&v),
        terms,
    }
}

/// Classical Prony: linear prediction by least squares on the Hankel matrix
/// of moments, roots of the prediction polynomial, then Vandermonde least
/// squares for the amplitudes.
///
/// When the Hankel matrix has numerical rank below `order`, the error
/// carries the fit of the lower effective order.
pub fn solve_standard_prony(sys: &StandardPronySystem, order: usize) -> Result<PronySolution, PronyError> {
    let m = sys.moments.len();
    if m < 2 * order {
        return Err(PronyError::InsufficientMoments {
            needed: 2 * order,
            available: m,
        });
    }
    if order == 0 {
        return Ok(fit_amplitudes(&sys.moments, &[]));
    }
    let moments = &sys.moments;
    let rows = m - order;
    let hankel = CMatrix::from_fn(rows, order, |i, j| moments[i + j]);
    let rank = effective_rank(&hankel, RANK_RATIO);
    if rank < order {
        let fit = if rank == 0 {
            fit_amplitudes(moments, &[])
        } else {
            match solve_standard_prony(sys, rank) {
                Ok(sol) => sol,
                Err(PronyError::RankDeficient { fit: Some(fit), .. }) => *fit,
                Err(e) => return Err(e),
            }
        };
        return Err(PronyError::RankDeficient {
            effective_order: rank,
            fit: Some(Box::new(fit)),
        });
    }
    let rhs = CVector::from_fn(rows, |i, _| -moments[i + order]);
    let p = lstsq(&hankel, &rhs);
    let mut coeffs: Vec<Complex64> = p.iter().copied().collect();
    coeffs.push(Complex64::new(1.0, 0.0));
    let nodes = polynomial_roots(&coeffs)?;
    Ok(fit_amplitudes(moments, &nodes))
}

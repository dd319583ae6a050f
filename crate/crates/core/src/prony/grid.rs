//! Two-dimensional Prony on a rectangular lattice of samples
//! `base + i·h1 + j·h2`, solved one direction at a time and then paired.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::roots::polynomial_roots;
use super::standard::RANK_RATIO;
use super::{compare_log_nodes, wrap, GeneralizedPronySystem, GeneralizedTerm, PronyError, ShiftEstimate};
use crate::linalg::{condition_number, effective_rank, lstsq, CMatrix, CVector};
use crate::{distance, norm, Point};

/// Values on the lattice, indexed `i + counts[0]·j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPronySystem {
    pub base: Point,
    pub steps: [Point; 2],
    pub counts: [usize; 2],
    pub values: Vec<Complex64>,
}

impl GridPronySystem {
    /// Checks that the exponents of `sys` are the stated lattice in order.
    pub fn from_generalized(
        sys: &GeneralizedPronySystem,
        base: &[f64],
        steps: &[Point; 2],
        counts: [usize; 2],
    ) -> Result<Self, PronyError> {
        if sys.dimension != 2 || base.len() != 2 || steps.iter().any(|h| h.len() != 2) {
            return Err(PronyError::InvalidSystem("grid systems are two-dimensional".into()));
        }
        if sys.len() != counts[0] * counts[1] {
            return Err(PronyError::NotAProgression);
        }
        for j in 0..counts[1] {
            for i in 0..counts[0] {
                let expect: Point = (0..2)
                    .map(|d| base[d] + i as f64 * steps[0][d] + j as f64 * steps[1][d])
                    .collect();
                if distance(&sys.exponents[i + counts[0] * j], &expect) > 1e-9 * norm(&expect).max(1.0) {
                    return Err(PronyError::NotAProgression);
                }
            }
        }
        Ok(Self {
            base: base.to_vec(),
            steps: steps.clone(),
            counts,
            values: sys.rhs.clone(),
        })
    }

    fn at(&self, i: usize, j: usize) -> Complex64 {
        self.values[i + self.counts[0] * j]
    }

    fn lines(&self, direction: usize) -> Vec<Vec<Complex64>> {
        let [m1, m2] = self.counts;
        if direction == 0 {
            (0..m2).map(|j| (0..m1).map(|i| self.at(i, j)).collect()).collect()
        } else {
            (0..m1).map(|i| (0..m2).map(|j| self.at(i, j)).collect()).collect()
        }
    }
}

/// Result of the cascaded solve. Terms are generalized (`a`, `λ`) with
/// `λ = H^{-1} log ξ`, `H` having rows `h1`, `h2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSolution {
    pub terms: Vec<GeneralizedTerm>,
    pub residual: f64,
    pub condition_estimate: f64,
}

/// Common prediction polynomial of several sequences sharing `order` nodes.
fn joint_nodes(seqs: &[Vec<Complex64>], order: usize) -> Result<Option<Vec<Complex64>>, PronyError> {
    let len = seqs.first().map_or(0, Vec::len);
    if len < order + 1 {
        return Ok(None);
    }
    let per = len - order;
    let rows = per * seqs.len();
    let h = CMatrix::from_fn(rows, order, |r, c| seqs[r / per][r % per + c]);
    if effective_rank(&h, RANK_RATIO) < order {
        return Ok(None);
    }
    let b = CVector::from_fn(rows, |r, _| -seqs[r / per][r % per + order]);
    let p = lstsq(&h, &b);
    let mut coeffs: Vec<Complex64> = p.iter().copied().collect();
    coeffs.push(Complex64::new(1.0, 0.0));
    Ok(Some(polynomial_roots(&coeffs)?))
}

fn fit(sys: &GridPronySystem, xi1: &[Complex64], xi2: &[Complex64]) -> (Vec<Complex64>, f64, f64) {
    let [m1, m2] = sys.counts;
    let v = CMatrix::from_fn(m1 * m2, xi1.len(), |k, q| {
        xi1[q].powi((k % m1) as i32) * xi2[q].powi((k / m1) as i32)
    });
    let alpha = lstsq(&v, &CVector::from_column_slice(&sys.values));
    let res = (&v * &alpha - CVector::from_column_slice(&sys.values)).iter().map(|z| z.norm()).fold(0.0, f64::max);
    (alpha.iter().copied().collect(), res, condition_number(&v))
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    // Heap's algorithm
    let mut p: Vec<usize> = (0..n).collect();
    let mut out = alloc::vec![p.clone()];
    let mut c = alloc::vec![0usize; n];
    let mut i = 1;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                p.swap(0, i);
            } else {
                p.swap(c[i], i);
            }
            out.push(p.clone());
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    out
}

/// Pairs the second-direction nodes with `first` by following the
/// per-line amplitudes of each first-direction node across lines.
fn pair_by_amplitudes(sys: &GridPronySystem, first: &[Complex64], direction: usize) -> Vec<Complex64> {
    let lines = sys.lines(direction);
    let len = lines[0].len();
    let v = CMatrix::from_fn(len, first.len(), |l, q| first[q].powi(l as i32));
    let coef: Vec<CVector> = lines
        .iter()
        .map(|line| lstsq(&v, &CVector::from_column_slice(line)))
        .collect();
    (0..first.len())
        .map(|q| {
            // c_{j+1} ≈ ξ c_j in least squares
            let (mut num, mut den) = (Complex64::new(0.0, 0.0), 0.0);
            for w in coef.windows(2) {
                num += w[1][q] * w[0][q].conj();
                den += w[0][q].norm_sqr();
            }
            if den > 0.0 {
                num / den
            } else {
                Complex64::new(1.0, 0.0)
            }
        })
        .collect()
}

/// Cascaded two-direction Prony. Requires `counts[d] ≥ 2·order` for at least
/// one direction and `≥ 2` for the other.
pub fn solve_grid_prony(sys: &GridPronySystem, order: usize) -> Result<GridSolution, PronyError> {
    let [m1, m2] = sys.counts;
    if m1.max(m2) < 2 * order || m1.min(m2) < 2 {
        return Err(PronyError::InsufficientMoments {
            needed: 2 * order,
            available: m1.max(m2),
        });
    }
    let det = sys.steps[0][0] * sys.steps[1][1] - sys.steps[0][1] * sys.steps[1][0];
    if det.abs() < 1e-12 * norm(&sys.steps[0]) * norm(&sys.steps[1]) {
        return Err(PronyError::InvalidSystem("grid steps are parallel".into()));
    }
    let nodes1 = if m1 >= 2 * order { joint_nodes(&sys.lines(0), order)? } else { None };
    let nodes2 = if m2 >= 2 * order { joint_nodes(&sys.lines(1), order)? } else { None };

    let mut candidates: Vec<(Vec<Complex64>, Vec<Complex64>)> = Vec::new();
    match (&nodes1, &nodes2) {
        (Some(a), Some(b)) if order <= 6 => {
            for perm in permutations(order) {
                candidates.push((a.clone(), perm.iter().map(|&k| b[k]).collect()));
            }
            candidates.push((a.clone(), pair_by_amplitudes(sys, a, 0)));
        }
        (Some(a), _) => candidates.push((a.clone(), pair_by_amplitudes(sys, a, 0))),
        (None, Some(b)) => candidates.push((pair_by_amplitudes(sys, b, 1), b.clone())),
        (None, None) => {
            return Err(PronyError::RankDeficient {
                effective_order: 0,
                fit: None,
            })
        }
    }
    let (xi1, xi2, alpha, res, cond) = candidates
        .into_iter()
        .map(|(a, b)| {
            let (alpha, res, cond) = fit(sys, &a, &b);
            (a, b, alpha, res, cond)
        })
        .min_by(|x, y| x.3.total_cmp(&y.3))
        .expect("nonempty candidate list");

    // λ = H^{-1} [log ξ1, log ξ2]
    let h = &sys.steps;
    let inv = [[h[1][1] / det, -h[0][1] / det], [-h[1][0] / det, h[0][0] / det]];
    let mut terms: Vec<GeneralizedTerm> = (0..order)
        .map(|q| {
            let l = [xi1[q].ln(), xi2[q].ln()];
            let log_node: Vec<Complex64> = (0..2).map(|d| l[0] * inv[d][0] + l[1] * inv[d][1]).collect();
            let s0: Complex64 = log_node.iter().zip(&sys.base).map(|(z, &b)| z * b).sum();
            GeneralizedTerm {
                amplitude: alpha[q] * (-s0).exp(),
                log_node,
            }
        })
        .collect();
    terms.sort_by(compare_log_nodes);
    Ok(GridSolution {
        terms,
        residual: res,
        condition_estimate: cond,
    })
}

/// Shifts of a grid solution reduced to the fundamental cell of the alias
/// lattice `2π H^{-1} Z²`, with amplitudes adjusted to the representative.
pub fn recover_grid_shifts(sol: &GridSolution, base: &[f64], steps: &[Point; 2]) -> Vec<ShiftEstimate> {
    let h = steps;
    let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
    let inv = [[h[1][1] / det, -h[0][1] / det], [-h[1][0] / det, h[0][0] / det]];
    // columns of 2π H^{-1}
    let basis: Vec<Point> = (0..2)
        .map(|k| (0..2).map(|d| 2.0 * PI * inv[d][k]).collect())
        .collect();
    let periods: Vec<f64> = h.iter().map(|v| 2.0 * PI / norm(v)).collect();
    sol.terms
        .iter()
        .map(|t| {
            let x = t.shift();
            let u: Vec<f64> = (0..2)
                .map(|k| wrap(h[k][0] * x[0] + h[k][1] * x[1], 2.0 * PI))
                .collect();
            let rep: Point = (0..2).map(|d| inv[d][0] * u[0] + inv[d][1] * u[1]).collect();
            // a e^{s·λ} is unchanged on the sample lattice; keep it so at base
            let old: Complex64 = t.log_node.iter().zip(base).map(|(z, &b)| z * b).sum();
            let new: Complex64 = t
                .log_node
                .iter()
                .zip(&rep)
                .zip(base)
                .map(|((z, &xr), &b)| Complex64::new(z.re, -xr) * b)
                .sum();
            let modulus_deviation = (0..2)
                .map(|k| (libm::exp(h[k][0] * t.log_node[0].re + h[k][1] * t.log_node[1].re) - 1.0).abs())
                .fold(0.0, f64::max);
            ShiftEstimate {
                amplitude: t.amplitude * (old - new).exp(),
                shift: rep,
                alias_period: Some(periods.clone()),
                alias_basis: Some(basis.clone()),
                alias_note: format!(
                    "shift determined modulo the lattice spanned by ({:.6}, {:.6}) and ({:.6}, {:.6})",
                    basis[0][0], basis[0][1], basis[1][0], basis[1][1]
                ),
                modulus_deviation,
            }
        })
        .collect()
}

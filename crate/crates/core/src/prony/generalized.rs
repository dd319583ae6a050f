//! Nonlinear least squares for generalized Prony systems by variable
//! projection: amplitudes are eliminated by linear least squares and the
//! log-nodes are refined with Levenberg–Marquardt from several starts.

use alloc::boxed::Box;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{compare_log_nodes, residual, GeneralizedPronySystem, GeneralizedSolution, GeneralizedTerm, PronyError};
use crate::linalg::{condition_number, lstsq, solve_symmetric, CMatrix, CVector};

/// Admissible nodes. `UnitModulus` matches shifted atoms (`|y| = 1`).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeDomain {
    #[default]
    Complex,
    UnitModulus,
    PositiveReal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedOptions {
    pub domain: NodeDomain,
    /// Random starts used when no initial guess is supplied.
    pub starts: usize,
    pub seed: u64,
    pub max_iterations: usize,
    /// Starts draw `Im λ_d` uniformly from `[-phase_range[d], phase_range[d]]`;
    /// defaults to `π / max_ℓ |s_ℓd|`.
    pub phase_range: Option<Vec<f64>>,
    /// Starts draw `Re λ_d` uniformly from `[-r, r]`.
    pub log_modulus_range: f64,
}

impl Default for GeneralizedOptions {
    fn default() -> Self {
        Self {
            domain: NodeDomain::Complex,
            starts: 16,
            seed: 0,
            max_iterations: 200,
            phase_range: None,
            log_modulus_range: 0.1,
        }
    }
}

struct Problem<'a> {
    sys: &'a GeneralizedPronySystem,
    order: usize,
    domain: NodeDomain,
    rhs: CVector,
}

impl Problem<'_> {
    fn params_per_coord(&self) -> usize {
        match self.domain {
            NodeDomain::Complex => 2,
            _ => 1,
        }
    }

    fn n_params(&self) -> usize {
        self.order * self.sys.dimension * self.params_per_coord()
    }

    fn log_nodes(&self, theta: &[f64]) -> Vec<Vec<Complex64>> {
        let n = self.sys.dimension;
        let k = self.params_per_coord();
        (0..self.order)
            .map(|q| {
                (0..n)
                    .map(|d| {
                        let p = &theta[(q * n + d) * k..(q * n + d + 1) * k];
                        match self.domain {
                            NodeDomain::Complex => Complex64::new(p[0], p[1]),
                            NodeDomain::UnitModulus => Complex64::new(0.0, p[0]),
                            NodeDomain::PositiveReal => Complex64::new(p[0], 0.0),
                        }
                    })
                    .collect()
            })
            .collect()
    }

    fn theta_from(&self, log_nodes: &[Vec<Complex64>]) -> Vec<f64> {
        let mut theta = Vec::with_capacity(self.n_params());
        for l in log_nodes {
            for z in l {
                match self.domain {
                    NodeDomain::Complex => theta.extend([z.re, z.im]),
                    NodeDomain::UnitModulus => theta.push(z.im),
                    NodeDomain::PositiveReal => theta.push(z.re),
                }
            }
        }
        theta
    }

    fn basis(&self, log_nodes: &[Vec<Complex64>]) -> CMatrix {
        CMatrix::from_fn(self.sys.len(), self.order, |l, q| {
            let s = &self.sys.exponents[l];
            log_nodes[q].iter().zip(s).map(|(z, &x)| z * x).sum::<Complex64>().exp()
        })
    }

    /// Basis, amplitudes, residual vector `m − Φa` and its squared norm.
    fn evaluate(&self, theta: &[f64]) -> (CMatrix, CVector, CVector, f64) {
        let phi = self.basis(&self.log_nodes(theta));
        let a = lstsq(&phi, &self.rhs);
        let r = &self.rhs - &phi * &a;
        let f = r.norm_squared();
        (phi, a, r, f)
    }

    /// Real Jacobian of the projected residual (Kaufman's approximation),
    /// stacked as `[Re; Im]`.
    fn jacobian(&self, phi: &CMatrix, a: &CVector) -> DMatrix<f64> {
        let m = self.sys.len();
        let n = self.sys.dimension;
        let k = self.params_per_coord();
        let mut jac = DMatrix::<f64>::zeros(2 * m, self.n_params());
        for q in 0..self.order {
            for d in 0..n {
                for c in 0..k {
                    let unit = match (self.domain, c) {
                        (NodeDomain::Complex, 0) | (NodeDomain::PositiveReal, _) => Complex64::new(1.0, 0.0),
                        _ => Complex64::new(0.0, 1.0),
                    };
                    let v = CVector::from_fn(m, |l, _| unit * self.sys.exponents[l][d] * phi[(l, q)] * a[q]);
                    let proj = &v - phi * lstsq(phi, &v);
                    let col = (q * n + d) * k + c;
                    for l in 0..m {
                        jac[(l, col)] = -proj[l].re;
                        jac[(m + l, col)] = -proj[l].im;
                    }
                }
            }
        }
        jac
    }

    fn solution(&self, theta: &[f64]) -> GeneralizedSolution {
        let log_nodes = self.log_nodes(theta);
        let phi = self.basis(&log_nodes);
        let a = lstsq(&phi, &self.rhs);
        let mut terms: Vec<GeneralizedTerm> = log_nodes
            .into_iter()
            .zip(a.iter())
            .map(|(log_node, &amplitude)| GeneralizedTerm { amplitude, log_node })
            .collect();
        terms.sort_by(compare_log_nodes);
        GeneralizedSolution {
            residual: residual(self.sys, &terms),
            condition_estimate: condition_number(&phi),
            terms,
            degenerate: false,
        }
    }

    /// Levenberg–Marquardt with Marquardt (diagonal) damping; returns the
    /// final parameters and whether a stopping criterion other than the
    /// iteration cap was met.
    fn levenberg_marquardt(&self, mut theta: Vec<f64>, max_iterations: usize) -> (Vec<f64>, bool) {
        let (mut phi, mut a, mut r, mut f) = self.evaluate(&theta);
        if !f.is_finite() {
            return (theta, false);
        }
        let floor = 1e-30 * self.rhs.norm_squared().max(f64::MIN_POSITIVE);
        let m = self.sys.len();
        let mut mu = 1e-3;
        let mut stalled = 0;
        for _ in 0..max_iterations {
            if f <= floor {
                return (theta, true);
            }
            let jac = self.jacobian(&phi, &a);
            let rr = DVector::from_fn(2 * m, |i, _| if i < m { r[i].re } else { r[i - m].im });
            let g = jac.transpose() * &rr;
            let jtj = jac.transpose() * &jac;
            let top = jtj.diagonal().iter().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
            let mut accepted = false;
            while mu < 1e16 {
                let mut lhs = jtj.clone();
                for i in 0..lhs.nrows() {
                    lhs[(i, i)] += mu * jtj[(i, i)].max(1e-12 * top);
                }
                let Some(delta) = solve_symmetric(lhs, &(-&g)) else {
                    mu *= 10.0;
                    continue;
                };
                let cand: Vec<f64> = theta.iter().zip(delta.iter()).map(|(t, d)| t + d).collect();
                let (phi2, a2, r2, f2) = self.evaluate(&cand);
                if f2.is_finite() && f2 < f {
                    let step = delta.norm();
                    let size = 1.0 + libm::sqrt(theta.iter().map(|t| t * t).sum::<f64>());
                    let gain = (f - f2) / f;
                    theta = cand;
                    (phi, a, r, f) = (phi2, a2, r2, f2);
                    mu = (mu * 0.1).max(1e-16);
                    accepted = true;
                    stalled = if gain < 1e-10 { stalled + 1 } else { 0 };
                    if step < 1e-15 * size || stalled >= 3 {
                        return (theta, true);
                    }
                    break;
                }
                mu *= 10.0;
            }
            if !accepted {
                // no descent direction left at any damping
                return (theta, true);
            }
        }
        (theta, f <= floor)
    }
}

/// Multistart solver with default options and the given node domain.
pub fn solve_generalized(
    sys: &GeneralizedPronySystem,
    order: usize,
    domain: NodeDomain,
) -> Result<GeneralizedSolution, PronyError> {
    solve_generalized_with(
        sys,
        order,
        None,
        &GeneralizedOptions {
            domain,
            ..GeneralizedOptions::default()
        },
    )
}

/// Solves `Σ_{q<order} a_q e^{s_ℓ·λ_q} ≈ m_ℓ` in the least-squares sense.
///
/// With `init` only that start is refined; otherwise `options.starts`
/// seeded random starts are tried and the smallest residual wins. A
/// vanishing right-hand side yields a `degenerate` solution with zero
/// amplitudes.
pub fn solve_generalized_with(
    sys: &GeneralizedPronySystem,
    order: usize,
    init: Option<&[GeneralizedTerm]>,
    options: &GeneralizedOptions,
) -> Result<GeneralizedSolution, PronyError> {
    let per_coord = if options.domain == NodeDomain::Complex { 2 } else { 1 };
    let unknowns = 2 * order + order * sys.dimension * per_coord;
    if sys.len() < 2 * order || 2 * sys.len() < unknowns {
        return Err(PronyError::UnderdeterminedSystem {
            equations: sys.len(),
            unknowns,
        });
    }
    if let Some(init) = init {
        if init.len() != order || init.iter().any(|t| t.log_node.len() != sys.dimension) {
            return Err(PronyError::InvalidSystem("initial guess has the wrong shape".into()));
        }
    }
    let problem = Problem {
        sys,
        order,
        domain: options.domain,
        rhs: CVector::from_column_slice(&sys.rhs),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let phase_range: Vec<f64> = match &options.phase_range {
        Some(r) => r.clone(),
        None => (0..sys.dimension)
            .map(|d| {
                let top = sys.exponents.iter().map(|s| s[d].abs()).fold(0.0, f64::max);
                if top > 0.0 {
                    core::f64::consts::PI / top
                } else {
                    1.0
                }
            })
            .collect(),
    };
    let random_start = |rng: &mut ChaCha8Rng| -> Vec<Vec<Complex64>> {
        (0..order)
            .map(|_| {
                (0..sys.dimension)
                    .map(|d| {
                        let re = match options.domain {
                            NodeDomain::UnitModulus => 0.0,
                            _ => options.log_modulus_range * rng.random_range(-1.0..=1.0),
                        };
                        let im = match options.domain {
                            NodeDomain::PositiveReal => 0.0,
                            _ => phase_range[d] * rng.random_range(-1.0..=1.0),
                        };
                        Complex64::new(re, im)
                    })
                    .collect()
            })
            .collect()
    };

    let starts: Vec<Vec<Vec<Complex64>>> = match init {
        Some(init) => alloc::vec![init.iter().map(|t| t.log_node.clone()).collect()],
        None => (0..options.starts.max(1)).map(|_| random_start(&mut rng)).collect(),
    };

    if sys.rhs.iter().all(|v| v.norm() == 0.0) {
        let theta = problem.theta_from(&starts[0]);
        let mut sol = problem.solution(&theta);
        for t in &mut sol.terms {
            t.amplitude = Complex64::new(0.0, 0.0);
        }
        sol.residual = 0.0;
        sol.degenerate = true;
        return Ok(sol);
    }

    let mut best: Option<(GeneralizedSolution, bool)> = None;
    for start in &starts {
        let (theta, converged) = problem.levenberg_marquardt(problem.theta_from(start), options.max_iterations);
        let mut sol = problem.solution(&theta);
        // a start whose basis overflows is not a candidate
        let converged = converged && sol.residual.is_finite();
        if sol.residual.is_nan() {
            sol.residual = f64::INFINITY;
        }
        let better = match &best {
            None => true,
            Some((b, _)) => {
                sol.residual < b.residual
                    || (sol.residual == b.residual
                        && sol
                            .terms
                            .iter()
                            .zip(&b.terms)
                            .map(|(x, y)| compare_log_nodes(x, y))
                            .find(|o| o.is_ne())
                            .is_some_and(|o| o.is_lt()))
            }
        };
        if better {
            best = Some((sol, converged));
        }
    }
    let (sol, converged) = best.expect("at least one start");
    if converged {
        Ok(sol)
    } else {
        Err(PronyError::NonConvergence { best: Box::new(sol) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Point;
    use alloc::vec;

    fn system(terms: &[GeneralizedTerm], exps: Vec<Point>) -> GeneralizedPronySystem {
        let rhs = exps
            .iter()
            .map(|s| terms.iter().map(|t| t.amplitude * t.power(s)).sum())
            .collect();
        GeneralizedPronySystem::new(exps, rhs, terms.len()).unwrap()
    }

    #[test]
    fn overflowing_starts_are_skipped() {
        let truth = [GeneralizedTerm {
            amplitude: Complex64::new(1.0, 0.0),
            log_node: vec![Complex64::new(0.01, 0.0)],
        }];
        let exps: Vec<Point> = (0..8).map(|k| vec![200.0 * k as f64]).collect();
        let sys = system(&truth, exps);
        let opts = GeneralizedOptions {
            domain: NodeDomain::PositiveReal,
            log_modulus_range: 10.0,
            ..GeneralizedOptions::default()
        };
        // must not panic; whichever start wins has a finite residual
        if let Ok(sol) = solve_generalized_with(&sys, 1, None, &opts) {
            assert!(sol.residual.is_finite());
        }
    }

    fn unit(a: f64, x: f64) -> GeneralizedTerm {
        GeneralizedTerm {
            amplitude: Complex64::new(a, 0.0),
            log_node: vec![Complex64::new(0.0, -x)],
        }
    }

    #[test]
    fn recovers_shifts_from_irregular_exponents() {
        let truth = [unit(1.0, 0.4), unit(0.6, 1.1)];
        let exps: Vec<Point> = [0.3, 0.9, 1.7, 2.2, 2.9, 3.4, 4.1].iter().map(|v| vec![*v]).collect();
        let sys = system(&truth, exps);
        let sol = solve_generalized(&sys, 2, NodeDomain::UnitModulus).unwrap();
        assert!(sol.residual < 1e-10, "{}", sol.residual);
        let shifts: Vec<f64> = sol.terms.iter().map(|t| t.shift()[0]).collect();
        let mut sorted = shifts.clone();
        sorted.sort_by(f64::total_cmp);
        assert!((sorted[0] - 0.4).abs() < 1e-8 && (sorted[1] - 1.1).abs() < 1e-8, "{shifts:?}");
    }

    #[test]
    fn polishes_from_nearby_guess() {
        let truth = [unit(1.0, 0.4), unit(0.6, 1.1)];
        let exps: Vec<Point> = (0..8).map(|l| vec![0.5 + 0.7 * l as f64]).collect();
        let sys = system(&truth, exps);
        let guess = [unit(1.0, 0.42), unit(0.6, 1.05)];
        let opts = GeneralizedOptions {
            domain: NodeDomain::Complex,
            ..Default::default()
        };
        let sol = solve_generalized_with(&sys, 2, Some(&guess), &opts).unwrap();
        assert!(sol.residual < 1e-10);
    }

    #[test]
    fn zero_rhs_is_degenerate() {
        let exps: Vec<Point> = (0..4).map(|l| vec![l as f64]).collect();
        let sys = GeneralizedPronySystem::new(exps, vec![Complex64::new(0.0, 0.0); 4], 1).unwrap();
        let sol = solve_generalized(&sys, 1, NodeDomain::Complex).unwrap();
        assert!(sol.degenerate);
        assert_eq!(sol.terms[0].amplitude, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn underdetermined() {
        let exps: Vec<Point> = (0..3).map(|l| vec![l as f64]).collect();
        let sys = system(&[unit(1.0, 0.2), unit(1.0, 0.9)], exps);
        assert!(matches!(
            solve_generalized(&sys, 2, NodeDomain::Complex),
            Err(PronyError::UnderdeterminedSystem { .. })
        ));
    }
}

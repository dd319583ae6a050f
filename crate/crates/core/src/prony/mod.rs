//! Decoupled generalized Prony systems: assembly from measurements,
//! reduction of arithmetic-progression samples to standard Prony form,
//! solvers, and recovery of shift vectors from nodes.
//!
//! A term `(a, x)` of the target atom contributes `a · y^s` with node
//! `y = e^{-i x}`. Solutions of generalized systems carry the logarithm
//! `λ = log y` so that `y^s = e^{s·λ}` is unambiguous for non-integer `s`.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::point_index::PointIndex;
use crate::sampling_geometry::is_progression;
use crate::signal_model::{atom_ft_real, MeasurementSet, SignalAtom};
use crate::{distance, dot, lex_cmp, norm, Point};

mod generalized;
mod grid;
pub mod roots;
mod standard;

pub use generalized::{solve_generalized, solve_generalized_with, GeneralizedOptions, NodeDomain};
pub use grid::{recover_grid_shifts, solve_grid_prony, GridPronySystem, GridSolution};
pub use standard::{solve_standard_prony, RANK_RATIO};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum PronyError {
    #[error("|F(f_r)(s)| = {value:e} at sample {index} is too small to divide by")]
    DivisionNearZero { index: usize, value: f64 },
    #[error("exponents do not form the requested arithmetic progression")]
    NotAProgression,
    #[error("{available} moments given, at least {needed} required")]
    InsufficientMoments { needed: usize, available: usize },
    #[error("effective order {effective_order} is below the requested order")]
    RankDeficient {
        effective_order: usize,
        /// Best fit of the effective order, when one is available.
        fit: Option<Box<PronySolution>>,
    },
    #[error(transparent)]
    RootFinding(#[from] roots::RootFindingFailure),
    #[error("generalized solver did not converge (best residual {:e})", best.residual)]
    NonConvergence { best: Box<GeneralizedSolution> },
    #[error("{equations} equations cannot determine {unknowns} real unknowns")]
    UnderdeterminedSystem { equations: usize, unknowns: usize },
    #[error("inconsistent system: {0}")]
    InvalidSystem(String),
}

/// `Σ_q a_q y_q^{s_ℓ} = m_ℓ` over arbitrary real exponents `s_ℓ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedPronySystem {
    pub exponents: Vec<Point>,
    pub rhs: Vec<Complex64>,
    pub order: usize,
    pub dimension: usize,
}

impl GeneralizedPronySystem {
    pub fn new(exponents: Vec<Point>, rhs: Vec<Complex64>, order: usize) -> Result<Self, PronyError> {
        if exponents.len() != rhs.len() {
            return Err(PronyError::InvalidSystem(format!(
                "{} exponents but {} right-hand values",
                exponents.len(),
                rhs.len()
            )));
        }
        let dimension = exponents.first().map_or(0, Vec::len);
        if exponents.iter().any(|s| s.len() != dimension) {
            return Err(PronyError::InvalidSystem("exponents of mixed dimension".into()));
        }
        let mut seen = PointIndex::new(1e-12);
        if !exponents.iter().all(|s| seen.insert(s.clone())) {
            return Err(PronyError::InvalidSystem("repeated exponent".into()));
        }
        Ok(Self {
            exponents,
            rhs,
            order,
            dimension,
        })
    }

    pub fn len(&self) -> usize {
        self.rhs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rhs.is_empty()
    }
}

/// Divides each measurement by the target atom's transform at the same
/// frequency, which leaves `Σ_q a_rq y_rq^{s}` on every decoupling point.
pub fn assemble_decoupled(
    atoms: &[SignalAtom],
    r: usize,
    measurements: &MeasurementSet,
    order: usize,
    nonzero_tol: f64,
) -> Result<GeneralizedPronySystem, PronyError> {
    let atom = atoms
        .get(r)
        .ok_or_else(|| PronyError::InvalidSystem(format!("no atom with index {r}")))?;
    let mut exponents = Vec::with_capacity(measurements.samples.len());
    let mut rhs = Vec::with_capacity(measurements.samples.len());
    for (index, smp) in measurements.samples.iter().enumerate() {
        if smp.frequency.len() != atom.dimension() {
            return Err(PronyError::InvalidSystem("sample dimension differs from atom".into()));
        }
        let value = atom_ft_real(atom, &smp.frequency);
        if value.abs() <= nonzero_tol {
            return Err(PronyError::DivisionNearZero {
                index,
                value: value.abs(),
            });
        }
        exponents.push(smp.frequency.clone());
        rhs.push(smp.value / value);
    }
    GeneralizedPronySystem::new(exponents, rhs, order)
}

/// Exponents `base + ℓ · step`, `ℓ = 0..m-1`, with standard moments `M_ℓ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StandardPronySystem {
    pub base: Point,
    pub step: Point,
    pub moments: Vec<Complex64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PronyTerm {
    pub amplitude: Complex64,
    pub node: Complex64,
}

/// Solution `M_ℓ ≈ Σ_q α_q ξ_q^ℓ` of a standard system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PronySolution {
    pub terms: Vec<PronyTerm>,
    /// `max_ℓ |Σ_q α_q ξ_q^ℓ − M_ℓ|`.
    pub residual: f64,
    /// Condition number of the Vandermonde amplitude solve.
    pub condition_estimate: f64,
}

/// One term `a · e^{s·λ}` of a generalized solution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedTerm {
    pub amplitude: Complex64,
    pub log_node: Vec<Complex64>,
}

impl GeneralizedTerm {
    pub fn power(&self, s: &[f64]) -> Complex64 {
        let z: Complex64 = self.log_node.iter().zip(s).map(|(l, &x)| l * x).sum();
        z.exp()
    }

    /// Shift vector encoded by the node, `x = -Im λ`.
    pub fn shift(&self) -> Point {
        self.log_node.iter().map(|l| -l.im).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedSolution {
    pub terms: Vec<GeneralizedTerm>,
    pub residual: f64,
    pub condition_estimate: f64,
    /// Set when the right-hand side vanishes and any nodes fit.
    pub degenerate: bool,
}

/// `max_ℓ |Σ_q a_q y_q^{s_ℓ} − m_ℓ|`; zero for an empty system.
pub fn residual(sys: &GeneralizedPronySystem, terms: &[GeneralizedTerm]) -> f64 {
    sys.exponents
        .iter()
        .zip(&sys.rhs)
        .map(|(s, m)| (terms.iter().map(|t| t.amplitude * t.power(s)).sum::<Complex64>() - m).norm())
        .fold(0.0, f64::max)
}

impl StandardPronySystem {
    pub fn residual(&self, terms: &[PronyTerm]) -> f64 {
        standard::moment_residual(&self.moments, terms)
    }

    /// Back-substitutes a standard solution into generalized terms:
    /// `λ = h log ξ / |h|²` and `a = α e^{-s0·λ}`.
    pub fn lift(&self, sol: &PronySolution) -> Vec<GeneralizedTerm> {
        let h2 = dot(&self.step, &self.step);
        sol.terms
            .iter()
            .map(|t| {
                let log_xi = t.node.ln();
                let log_node: Vec<Complex64> = self.step.iter().map(|h| log_xi * (h / h2)).collect();
                let s0: Complex64 = log_node.iter().zip(&self.base).map(|(l, &b)| l * b).sum();
                GeneralizedTerm {
                    amplitude: t.amplitude * (-s0).exp(),
                    log_node,
                }
            })
            .collect()
    }

    /// Inverse of [`lift`](Self::lift): `ξ = e^{h·λ}`, `α = a e^{s0·λ}`.
    pub fn project(&self, terms: &[GeneralizedTerm], condition_estimate: f64) -> PronySolution {
        let terms: Vec<PronyTerm> = terms
            .iter()
            .map(|t| {
                let along = |v: &[f64]| -> Complex64 { t.log_node.iter().zip(v).map(|(l, &x)| l * x).sum() };
                PronyTerm {
                    amplitude: t.amplitude * along(&self.base).exp(),
                    node: along(&self.step).exp(),
                }
            })
            .collect();
        PronySolution {
            residual: self.residual(&terms),
            terms,
            condition_estimate,
        }
    }
}

/// Arithmetic progression found inside a sample set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Progression {
    pub base: Point,
    pub step: Point,
    pub members: Vec<usize>,
}

fn is_canonical(h: &[f64]) -> bool {
    let scale = norm(h).max(1.0) * 1e-12;
    h.iter().find(|v| v.abs() > scale).is_some_and(|v| *v > 0.0)
}

/// Maximal arithmetic progressions of length ≥ 4 inside `samples`.
///
/// Progressions whose step is an integer multiple of another reported
/// progression's step and whose members all belong to it are dropped.
pub fn detect_progressions(samples: &[Point], tol: f64) -> Vec<Progression> {
    if samples.len() < 2 {
        return Vec::new();
    }
    let index = PointIndex::from_points(samples, tol);
    let lookup = |p: &[f64]| index.find(p);
    // PointIndex deduplicates; map its ids back to sample positions
    let position: Vec<usize> = index
        .points()
        .iter()
        .map(|p| samples.iter().position(|q| distance(p, q) <= tol).unwrap_or(0))
        .collect();

    let mut found: Vec<Progression> = Vec::new();
    for (i, a) in samples.iter().enumerate() {
        for (j, b) in samples.iter().enumerate() {
            if i == j {
                continue;
            }
            let h: Point = b.iter().zip(a).map(|(x, y)| x - y).collect();
            if norm(&h) <= tol || !is_canonical(&h) {
                continue;
            }
            let prev: Point = a.iter().zip(&h).map(|(x, y)| x - y).collect();
            if lookup(&prev).is_some() {
                continue;
            }
            let mut members = alloc::vec![i];
            let mut next: Point = b.clone();
            while let Some(k) = lookup(&next) {
                members.push(position[k]);
                next = next.iter().zip(&h).map(|(x, y)| x + y).collect();
            }
            if members.len() >= 4 {
                found.push(Progression {
                    base: a.clone(),
                    step: h,
                    members,
                });
            }
        }
    }

    let dominated = |p: &Progression| {
        found.iter().any(|o| {
            if core::ptr::eq(o, p) || o.members.len() <= p.members.len() && o.step == p.step {
                return false;
            }
            let ratio = norm(&p.step) / norm(&o.step);
            let k = libm::round(ratio);
            k >= 2.0
                && (ratio - k).abs() < 1e-9
                && p.step.iter().zip(&o.step).all(|(x, y)| (x - k * y).abs() <= tol * k)
                && p.members.iter().all(|m| o.members.contains(m))
        })
    };
    let keep: Vec<bool> = found.iter().map(|p| !dominated(p)).collect();
    let mut out: Vec<Progression> = found
        .into_iter()
        .zip(keep)
        .filter_map(|(p, k)| k.then_some(p))
        .collect();
    out.sort_by(|a, b| {
        b.members
            .len()
            .cmp(&a.members.len())
            .then_with(|| norm(&a.step).total_cmp(&norm(&b.step)))
            .then_with(|| lex_cmp(&a.base, &b.base))
    });
    out
}

/// Rewrites a system whose exponents are `s0 + ℓh` as a standard system with
/// unknowns `α_q = a_q y_q^{s0}` and `ξ_q = y_q^h`.
pub fn reduce_to_standard(
    sys: &GeneralizedPronySystem,
    s0: &[f64],
    h: &[f64],
) -> Result<StandardPronySystem, PronyError> {
    if s0.len() != sys.dimension || h.len() != sys.dimension || norm(h) == 0.0 {
        return Err(PronyError::NotAProgression);
    }
    if !is_progression(&sys.exponents, s0, h, 1e-9) {
        return Err(PronyError::NotAProgression);
    }
    Ok(StandardPronySystem {
        base: s0.to_vec(),
        step: h.to_vec(),
        moments: sys.rhs.clone(),
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RealnessPolicy {
    #[default]
    AsIs,
    /// When `s0/|h| = p/q` with small `q`, pick the alias whose amplitude is
    /// closest to real.
    PreferReal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftEstimate {
    pub amplitude: Complex64,
    pub shift: Point,
    /// Period of the alias class along each sampling direction.
    pub alias_period: Option<Vec<f64>>,
    /// Lattice of indistinguishable shift offsets.
    pub alias_basis: Option<Vec<Point>>,
    pub alias_note: String,
    /// `| |ξ| − 1 |` per direction; nonzero values indicate model mismatch.
    pub modulus_deviation: f64,
}

pub(crate) fn wrap(v: f64, period: f64) -> f64 {
    let w = v - period * libm::floor(v / period);
    if w >= period {
        0.0
    } else {
        w
    }
}

fn small_denominator(r: f64) -> Option<u32> {
    (1..=8u32).find(|&q| {
        let x = r * q as f64;
        (x - libm::round(x)).abs() < 1e-9
    })
}

/// Maps nodes `ξ_q = e^{-i h·x_q}` back to shifts along `h`, in the
/// fundamental domain `[0, 2π/|h|)`, with amplitudes `a = α e^{i s0·x}`.
pub fn recover_shifts(
    sol: &PronySolution,
    s0: &[f64],
    h: &[f64],
    policy: RealnessPolicy,
) -> Vec<ShiftEstimate> {
    let hn = norm(h);
    let unit: Point = h.iter().map(|v| v / hn).collect();
    let period = 2.0 * PI / hn;
    let s0_along = dot(s0, &unit);
    sol.terms
        .iter()
        .map(|t| {
            let mut along = wrap(-t.node.arg() / hn, period);
            let amp_at = |x: f64| t.amplitude * Complex64::from_polar(1.0, s0_along * x);
            let mut amplitude = amp_at(along);
            let mut class_period = period;
            let mut note = if unit.len() == 1 {
                format!("shift determined modulo {period:.6}")
            } else {
                format!("only the component along the step is determined, modulo {period:.6}")
            };
            if policy == RealnessPolicy::PreferReal {
                if let Some(q) = small_denominator(s0_along / hn).filter(|&q| q > 1) {
                    let mut cands: Vec<(f64, f64, Complex64)> = (0..q)
                        .map(|k| {
                            let x = along + k as f64 * period;
                            let a = amp_at(x);
                            (a.im.abs(), x, a)
                        })
                        .collect();
                    let first_im = cands[0].0;
                    cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
                    let gap = first_im - cands[0].0;
                    let runner_up = cands.get(1).map_or(f64::INFINITY, |c| c.0);
                    if runner_up - cands[0].0 > 1e-9 * t.amplitude.norm() {
                        if gap > 0.0 {
                            along = cands[0].1;
                            amplitude = cands[0].2;
                        }
                        class_period = q as f64 * period;
                        note = format!(
                            "real-amplitude preference resolves {q} aliases; shift determined modulo {class_period:.6}"
                        );
                    } else {
                        note.push_str("; real-amplitude preference is ambiguous here");
                    }
                }
            }
            ShiftEstimate {
                amplitude,
                shift: unit.iter().map(|u| u * along).collect(),
                alias_period: Some(alloc::vec![class_period]),
                alias_basis: Some(alloc::vec![unit.iter().map(|u| u * class_period).collect()]),
                alias_note: note,
                modulus_deviation: (t.node.norm() - 1.0).abs(),
            }
        })
        .collect()
}

/// Shift estimates for generalized solutions whose exponents are not on a
/// lattice, so no aliasing is implied.
pub fn shifts_from_log_nodes(terms: &[GeneralizedTerm]) -> Vec<ShiftEstimate> {
    terms
        .iter()
        .map(|t| ShiftEstimate {
            amplitude: t.amplitude,
            shift: t.shift(),
            alias_period: None,
            alias_basis: None,
            alias_note: String::from("non-lattice exponents; no alias class assumed"),
            modulus_deviation: t.log_node.iter().map(|l| (libm::exp(l.re) - 1.0).abs()).fold(0.0, f64::max),
        })
        .collect()
}

pub(crate) fn compare_log_nodes(a: &GeneralizedTerm, b: &GeneralizedTerm) -> Ordering {
    let im = |t: &GeneralizedTerm| -> Point { t.log_node.iter().map(|l| l.im).collect() };
    let re = |t: &GeneralizedTerm| -> Point { t.log_node.iter().map(|l| l.re).collect() };
    lex_cmp(&im(a), &im(b)).then_with(|| lex_cmp(&re(a), &re(b)))
}

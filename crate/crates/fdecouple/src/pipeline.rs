//! End-to-end reconstruction: decoupling, sampling, assembly, solve, shift
//! recovery and certificates, one independent pipeline per atom.

use std::time::Instant;

use fdecouple_core::prony::{
    assemble_decoupled, detect_progressions, recover_grid_shifts, recover_shifts, reduce_to_standard, residual,
    shifts_from_log_nodes, solve_generalized_with, solve_grid_prony, solve_standard_prony, GeneralizedOptions,
    GeneralizedPronySystem, GeneralizedTerm, GridPronySystem, GridSolution, NodeDomain, PronyError, PronySolution,
    ShiftEstimate, StandardPronySystem,
};
use fdecouple_core::sampling_geometry::{
    choose_samples, decoupling_set, DecouplingSet, GeometryError, Provenance, SampleLayout, SampleSet, POINT_TOL,
};
use fdecouple_core::signal_model::{synthesize_exact_zeros, synthesize_measurements, MeasurementSet, SignalAtom};
use fdecouple_core::uniqueness::{
    net_certificate, one_d_window, span_certificate, NetCertificate, SpanCertificate, WindowCertificate1D,
};
use fdecouple_core::{norm, Point};
use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, ExperimentConfig};
use crate::io::{read_measurements, IoError, MeasurementTable};
use crate::scoring::{match_and_score, MatchScore};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Measurements(#[from] IoError),
}

/// Which solver produced the estimates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "path", rename_all = "snake_case")]
pub enum SolvePath {
    /// Standard Prony on the progression `base + ℓ·step` (members index the
    /// assembled system).
    Progression { base: Point, step: Point, members: Vec<usize> },
    Grid { base: Point, steps: [Point; 2], counts: [usize; 2] },
    Generalized,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveSummary {
    #[serde(flatten)]
    pub path: SolvePath,
    /// Sup-norm residual of the reported terms on the full assembled system.
    pub residual: f64,
    pub condition_estimate: f64,
    pub polished: bool,
    /// Terms `a·e^{s·λ}` behind the estimates.
    pub terms: Vec<GeneralizedTerm>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecouplingSummary {
    pub points: usize,
    pub provenance: Provenance,
    pub rejected: usize,
    /// Atoms whose zero sets define the set (active atoms other than the target).
    pub constraining_atoms: Vec<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AtomCertificates {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<Result<WindowCertificate1D, String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub span: Option<SpanCertificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub net: Option<Result<NetCertificate, String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum AtomStatus {
    Ok,
    /// Order 0: the atom takes part in the model but has nothing to recover.
    Inactive,
    Failed { stage: String, kind: String, message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomReport {
    pub atom: usize,
    pub name: String,
    pub order: usize,
    #[serde(flatten)]
    pub status: AtomStatus,
    pub decoupling: Option<DecouplingSummary>,
    pub samples: Option<SampleSet>,
    pub system: Option<GeneralizedPronySystem>,
    pub solve: Option<SolveSummary>,
    pub estimates: Vec<ShiftEstimate>,
    pub certificates: AtomCertificates,
    pub warnings: Vec<String>,
}

impl AtomReport {
    fn new(atom: usize, a: &SignalAtom, order: usize) -> Self {
        Self {
            atom,
            name: a.name().to_string(),
            order,
            status: AtomStatus::Ok,
            decoupling: None,
            samples: None,
            system: None,
            solve: None,
            estimates: Vec::new(),
            certificates: AtomCertificates::default(),
            warnings: Vec::new(),
        }
    }

    fn fail(&mut self, stage: &str, kind: &str, message: String) {
        self.warnings.push(format!("{stage}: {message}"));
        self.status = AtomStatus::Failed {
            stage: stage.into(),
            kind: kind.into(),
            message,
        };
    }

    pub fn is_failed(&self) -> bool {
        matches!(self.status, AtomStatus::Failed { .. })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_ms: f64,
    pub per_atom_ms: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub config: ExperimentConfig,
    pub atoms: Vec<AtomReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score: Option<MatchScore>,
    pub warnings: Vec<String>,
    /// Wall-clock data; the only non-deterministic part of the report.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

impl ReconstructionReport {
    pub fn has_failures(&self) -> bool {
        self.atoms.iter().any(AtomReport::is_failed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// JSON without timing; identical across reruns of the same config.
    pub fn deterministic_json(&self) -> String {
        let mut copy = self.clone();
        copy.timing = None;
        copy.to_json()
    }

    pub fn estimates(&self) -> Vec<Vec<ShiftEstimate>> {
        self.atoms.iter().map(|a| a.estimates.clone()).collect()
    }
}

fn geometry_kind(e: &GeometryError) -> &'static str {
    match e {
        GeometryError::DimensionMismatch => "DimensionMismatch",
        GeometryError::TargetOutOfRange { .. } => "TargetOutOfRange",
        GeometryError::TooFewAtoms => "TooFewAtoms",
        GeometryError::EmptyDecouplingSet { .. } => "EmptyDecouplingSet",
        GeometryError::NoBracket => "NoBracket",
        GeometryError::InsufficientPoints { .. } => "InsufficientPoints",
        GeometryError::NoProgression => "NoProgression",
        GeometryError::InvalidWindow => "InvalidWindow",
    }
}

fn prony_kind(e: &PronyError) -> &'static str {
    match e {
        PronyError::DivisionNearZero { .. } => "DivisionNearZero",
        PronyError::NotAProgression => "NotAProgression",
        PronyError::InsufficientMoments { .. } => "InsufficientMoments",
        PronyError::RankDeficient { .. } => "RankDeficient",
        PronyError::RootFinding(_) => "RootFinding",
        PronyError::NonConvergence { .. } => "NonConvergence",
        PronyError::UnderdeterminedSystem { .. } => "UnderdeterminedSystem",
        PronyError::InvalidSystem(_) => "InvalidSystem",
    }
}

/// Decoupling set of `target` with respect to the other atoms of nonzero
/// order; atoms without terms do not constrain the sampling.
pub fn active_decoupling_set(cfg: &ExperimentConfig, target: usize) -> Result<(DecouplingSet, Vec<usize>), GeometryError> {
    let orders = cfg.orders();
    let others: Vec<usize> = (0..cfg.atoms.len()).filter(|&l| l != target && orders[l] > 0).collect();
    if others.is_empty() {
        return Err(GeometryError::TooFewAtoms);
    }
    let mut atoms = vec![cfg.atoms[target]];
    atoms.extend(others.iter().map(|&l| cfg.atoms[l]));
    let mut w = decoupling_set(&atoms, 0, &cfg.window, cfg.zero_tol, cfg.nonzero_tol).map_err(|e| match e {
        GeometryError::EmptyDecouplingSet { .. } => GeometryError::EmptyDecouplingSet { target },
        other => other,
    })?;
    w.target = target;
    Ok((w, others))
}

/// Chosen samples of `target` per the config's strategy.
pub fn sample_set(cfg: &ExperimentConfig, w: &DecouplingSet) -> Result<SampleSet, GeometryError> {
    let spec = cfg.sampling_for(w.target);
    choose_samples(w, spec.count, spec.strategy)
}

enum Source {
    Truth,
    Table(MeasurementTable),
}

/// Runs every atom's pipeline. Per-atom failures are recorded in the
/// report; only configuration and measurement-file problems abort.
pub fn run_reconstruction(cfg: &ExperimentConfig) -> Result<ReconstructionReport, PipelineError> {
    cfg.validate()?;
    let started = Instant::now();
    let source = match &cfg.measurements {
        Some(m) => {
            let samples = read_measurements(&m.path, cfg.dimension())?;
            Source::Table(MeasurementTable::from_samples(&samples, cfg.dimension())?)
        }
        None => Source::Truth,
    };
    let orders = cfg.orders();
    let mut atoms = Vec::with_capacity(cfg.atoms.len());
    let mut per_atom_ms = Vec::with_capacity(cfg.atoms.len());
    for r in 0..cfg.atoms.len() {
        let t0 = Instant::now();
        atoms.push(run_atom(cfg, &source, r, orders[r])?);
        per_atom_ms.push(t0.elapsed().as_secs_f64() * 1e3);
    }
    let score = cfg.truth_model().map(|m| {
        let est: Vec<Vec<ShiftEstimate>> = atoms.iter().map(|a| a.estimates.clone()).collect();
        match_and_score(&m, &est)
    });
    let warnings = atoms
        .iter()
        .flat_map(|a| a.warnings.iter().map(move |w| format!("atom {}: {w}", a.atom)))
        .collect();
    Ok(ReconstructionReport {
        config: cfg.clone(),
        atoms,
        score,
        warnings,
        timing: Some(Timing {
            total_ms: started.elapsed().as_secs_f64() * 1e3,
            per_atom_ms,
        }),
    })
}

fn measurements(cfg: &ExperimentConfig, source: &Source, r: usize, set: &SampleSet) -> Result<MeasurementSet, PipelineError> {
    match source {
        Source::Table(t) => Ok(t.measurements_for(set)?),
        Source::Truth => {
            let model = cfg.truth_model().expect("validated config has truth");
            let seed = cfg.seed.wrapping_add(r as u64);
            let m = if cfg.exact_zeros {
                synthesize_exact_zeros(&model, set, cfg.noise_level, seed, cfg.zero_tol)
            } else {
                synthesize_measurements(&model, set, cfg.noise_level, seed)
            };
            Ok(m.map_err(|e| ConfigError::Invalid(e.to_string()))?)
        }
    }
}

fn run_atom(cfg: &ExperimentConfig, source: &Source, r: usize, order: usize) -> Result<AtomReport, PipelineError> {
    let mut rep = AtomReport::new(r, &cfg.atoms[r], order);
    let (w, others) = match active_decoupling_set(cfg, r) {
        Ok(x) => x,
        Err(e) => {
            rep.fail("decoupling", geometry_kind(&e), e.to_string());
            return Ok(rep);
        }
    };
    rep.decoupling = Some(DecouplingSummary {
        points: w.points.len(),
        provenance: w.provenance,
        rejected: w.rejected,
        constraining_atoms: others,
    });
    if order == 0 {
        rep.status = AtomStatus::Inactive;
        return Ok(rep);
    }
    let set = match sample_set(cfg, &w) {
        Ok(s) => s,
        Err(e) => {
            rep.fail("sampling", geometry_kind(&e), e.to_string());
            return Ok(rep);
        }
    };
    let meas = measurements(cfg, source, r, &set)?;
    rep.certificates = certificates(cfg, &set, order);
    rep.samples = Some(set.clone());
    let sys = match assemble_decoupled(&cfg.atoms, r, &meas, order, cfg.nonzero_tol) {
        Ok(s) => s,
        Err(e) => {
            rep.fail("assembly", prony_kind(&e), e.to_string());
            return Ok(rep);
        }
    };
    rep.system = Some(sys.clone());
    match solve(cfg, &sys, set.layout.as_ref(), order, &mut rep.warnings) {
        Ok((summary, estimates)) => {
            if estimates.iter().any(|e| e.alias_period.is_some()) {
                rep.warnings.push(format!("aliasing: {}", estimates[0].alias_note));
            }
            rep.solve = Some(summary);
            rep.estimates = estimates;
        }
        Err(e) => rep.fail("solve", prony_kind(&e), e.to_string()),
    }
    Ok(rep)
}

pub fn certificates(cfg: &ExperimentConfig, set: &SampleSet, order: usize) -> AtomCertificates {
    let toggles = &cfg.certificates;
    let n = cfg.dimension();
    let mut out = AtomCertificates::default();
    if toggles.window && n == 1 {
        let xs: Vec<f64> = set.frequencies.iter().map(|p| p[0]).collect();
        out.window = Some(one_d_window(&xs, order).map_err(|e| e.to_string()));
    }
    if toggles.span {
        let radius = set.frequencies.iter().map(|p| norm(p)).fold(0.0, f64::max) * (1.0 + 1e-12);
        if radius > 0.0 {
            out.span = Some(span_certificate(&set.frequencies, radius, order, n, &cfg.khovanski));
        }
    }
    if let Some(params) = &toggles.net {
        out.net = Some(
            net_certificate(&set.frequencies, params, order, &cfg.khovanski, &cfg.window).map_err(|e| e.to_string()),
        );
    }
    out
}

fn polish(
    cfg: &ExperimentConfig,
    sys: &GeneralizedPronySystem,
    order: usize,
    init: &[GeneralizedTerm],
) -> Option<(Vec<GeneralizedTerm>, f64)> {
    if !cfg.polish {
        return None;
    }
    let before = residual(sys, init);
    let opts = GeneralizedOptions {
        domain: NodeDomain::UnitModulus,
        seed: cfg.seed,
        ..GeneralizedOptions::default()
    };
    let refined = match solve_generalized_with(sys, order, Some(init), &opts) {
        Ok(s) => s,
        Err(PronyError::NonConvergence { best }) => *best,
        Err(_) => return None,
    };
    (refined.residual <= before).then_some((refined.terms, refined.residual))
}

fn standard_on(
    sys: &GeneralizedPronySystem,
    members: &[usize],
    base: &[f64],
    step: &[f64],
    order: usize,
    warnings: &mut Vec<String>,
) -> Result<(StandardPronySystem, PronySolution), PronyError> {
    let sub = GeneralizedPronySystem::new(
        members.iter().map(|&i| sys.exponents[i].clone()).collect(),
        members.iter().map(|&i| sys.rhs[i]).collect(),
        order,
    )?;
    let st = reduce_to_standard(&sub, base, step)?;
    let sol = match solve_standard_prony(&st, order) {
        Ok(s) => s,
        Err(PronyError::RankDeficient {
            effective_order,
            fit: Some(fit),
        }) => {
            warnings.push(format!(
                "rank deficiency: effective order {effective_order} below requested {order}; reporting the lower-order fit"
            ));
            *fit
        }
        Err(e) => return Err(e),
    };
    Ok((st, sol))
}

fn solve(
    cfg: &ExperimentConfig,
    sys: &GeneralizedPronySystem,
    layout: Option<&SampleLayout>,
    order: usize,
    warnings: &mut Vec<String>,
) -> Result<(SolveSummary, Vec<ShiftEstimate>), PronyError> {
    let all: Vec<usize> = (0..sys.len()).collect();
    let progression = match layout {
        Some(SampleLayout::Progression { base, step }) => Some((base.clone(), step.clone(), all.clone())),
        Some(SampleLayout::Grid { base, steps, counts }) => {
            let grid = GridPronySystem::from_generalized(sys, base, steps, *counts)?;
            return solve_grid(cfg, sys, &grid, order);
        }
        None => detect_progressions(&sys.exponents, POINT_TOL)
            .into_iter()
            .find(|p| p.members.len() >= 2 * order)
            .map(|p| (p.base, p.step, p.members)),
    };
    match progression {
        Some((base, step, members)) => {
            let (st, sol) = standard_on(sys, &members, &base, &step, order, warnings)?;
            let lifted = st.lift(&sol);
            let full = members.len() == sys.len();
            let (terms, polished) = match full.then(|| polish(cfg, sys, sol.terms.len(), &lifted)).flatten() {
                Some((t, _)) => (t, true),
                None => (lifted, false),
            };
            let projected = st.project(&terms, sol.condition_estimate);
            let estimates = recover_shifts(&projected, &base, &step, cfg.realness);
            if !full {
                warnings.push(format!(
                    "progression covers {} of {} samples; shifts are determined along its step only",
                    members.len(),
                    sys.len()
                ));
            }
            Ok((
                SolveSummary {
                    path: SolvePath::Progression { base, step, members },
                    residual: residual(sys, &terms),
                    condition_estimate: sol.condition_estimate,
                    polished,
                    terms,
                },
                estimates,
            ))
        }
        None => {
            let opts = GeneralizedOptions {
                domain: NodeDomain::UnitModulus,
                seed: cfg.seed,
                ..GeneralizedOptions::default()
            };
            let sol = match solve_generalized_with(sys, order, None, &opts) {
                Ok(s) => s,
                Err(PronyError::NonConvergence { best }) => {
                    warnings.push(format!(
                        "generalized solver did not converge; reporting best residual {:e}",
                        best.residual
                    ));
                    *best
                }
                Err(e) => return Err(e),
            };
            Ok((
                SolveSummary {
                    path: SolvePath::Generalized,
                    residual: sol.residual,
                    condition_estimate: sol.condition_estimate,
                    polished: false,
                    terms: sol.terms.clone(),
                },
                shifts_from_log_nodes(&sol.terms),
            ))
        }
    }
}

fn solve_grid(
    cfg: &ExperimentConfig,
    sys: &GeneralizedPronySystem,
    grid: &GridPronySystem,
    order: usize,
) -> Result<(SolveSummary, Vec<ShiftEstimate>), PronyError> {
    let sol = solve_grid_prony(grid, order)?;
    let (terms, polished) = match polish(cfg, sys, order, &sol.terms) {
        Some((t, _)) => (t, true),
        None => (sol.terms.clone(), false),
    };
    let refined = GridSolution {
        terms: terms.clone(),
        residual: residual(sys, &terms),
        condition_estimate: sol.condition_estimate,
    };
    let estimates = recover_grid_shifts(&refined, &grid.base, &grid.steps);
    Ok((
        SolveSummary {
            path: SolvePath::Grid {
                base: grid.base.clone(),
                steps: grid.steps.clone(),
                counts: grid.counts,
            },
            residual: refined.residual,
            condition_estimate: sol.condition_estimate,
            polished,
            terms,
        },
        estimates,
    ))
}

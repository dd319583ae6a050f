//! Atom catalog, shift-combination model and closed-form Fourier evaluation.
//!
//! Transforms use the non-unitary convention `F(f)(s) = ∫ e^{-i s·x} f(x) dx`.
//! A shift by `x` multiplies the transform by `e^{-i s·x}`, so the node of a
//! term is `y = e^{-i x}` componentwise and `y^s = e^{-i s·x}`.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::sampling_geometry::{zero_set, SampleSet, ZeroSetDesc};
use crate::{dot, Point};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid atom: {0}")]
    InvalidAtom(String),
    #[error("negative or non-finite noise level {0}")]
    InvalidNoise(f64),
}

/// One known base signal `f_j`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalAtom {
    /// Indicator of `[-b, b]`.
    Box1d { halfwidth: f64 },
    /// `δ(x - c) + δ(x + c)`.
    DeltaPair { offset: f64 },
    Dirac,
    /// `exp(-x² / 2σ²)`; its transform has no zeros.
    Gaussian { width: f64 },
    /// Indicator of `[-b1, b1] × [-b2, b2]`.
    Box2d { halfwidths: [f64; 2] },
    /// Indicator of the square `|x + y| ≤ d, |x - y| ≤ d`, i.e. an axis square
    /// rotated by π/4 whose vertices sit at distance `d` from the origin.
    RotatedSquare { half_diagonal: f64 },
}

impl SignalAtom {
    pub fn dimension(&self) -> usize {
        match self {
            SignalAtom::Box1d { .. }
            | SignalAtom::DeltaPair { .. }
            | SignalAtom::Dirac
            | SignalAtom::Gaussian { .. } => 1,
            SignalAtom::Box2d { .. } | SignalAtom::RotatedSquare { .. } => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SignalAtom::Box1d { .. } => "box1d",
            SignalAtom::DeltaPair { .. } => "delta_pair",
            SignalAtom::Dirac => "dirac",
            SignalAtom::Gaussian { .. } => "gaussian",
            SignalAtom::Box2d { .. } => "box2d",
            SignalAtom::RotatedSquare { .. } => "rotated_square",
        }
    }

    /// Checks that every size parameter is finite and strictly positive.
    pub fn validate(&self) -> Result<(), ModelError> {
        let sizes: &[f64] = match self {
            SignalAtom::Box1d { halfwidth } => core::slice::from_ref(halfwidth),
            SignalAtom::DeltaPair { offset } => core::slice::from_ref(offset),
            SignalAtom::Dirac => &[],
            SignalAtom::Gaussian { width } => core::slice::from_ref(width),
            SignalAtom::Box2d { halfwidths } => halfwidths,
            SignalAtom::RotatedSquare { half_diagonal } => core::slice::from_ref(half_diagonal),
        };
        match sizes.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            Some(v) => Err(ModelError::InvalidAtom(alloc::format!(
                "{} size parameter must be positive, got {v}",
                self.name()
            ))),
            None => Ok(()),
        }
    }
}

/// `2 sin(b s) / s`, the transform of the indicator of `[-b, b]`.
pub(crate) fn box_factor(b: f64, s: f64) -> f64 {
    let t = b * s;
    if t.abs() < 1e-4 {
        let t2 = t * t;
        2.0 * b * (1.0 - t2 / 6.0 + t2 * t2 / 120.0)
    } else {
        2.0 * libm::sin(t) / s
    }
}

fn sinc(t: f64) -> f64 {
    if t.abs() < 1e-4 {
        let t2 = t * t;
        1.0 - t2 / 6.0 + t2 * t2 / 120.0
    } else {
        libm::sin(t) / t
    }
}

/// Real-valued transform of a catalog atom (all catalog atoms are even).
pub(crate) fn atom_ft_real(atom: &SignalAtom, s: &[f64]) -> f64 {
    match *atom {
        SignalAtom::Box1d { halfwidth } => box_factor(halfwidth, s[0]),
        SignalAtom::DeltaPair { offset } => 2.0 * libm::cos(offset * s[0]),
        SignalAtom::Dirac => 1.0,
        SignalAtom::Gaussian { width } => {
            libm::sqrt(2.0 * core::f64::consts::PI) * width * libm::exp(-0.5 * width * width * s[0] * s[0])
        }
        SignalAtom::Box2d { halfwidths } => {
            box_factor(halfwidths[0], s[0]) * box_factor(halfwidths[1], s[1])
        }
        SignalAtom::RotatedSquare { half_diagonal: d } => {
            let (w, r) = (s[0], s[1]);
            2.0 * d * d * sinc(0.5 * d * (w + r)) * sinc(0.5 * d * (w - r))
        }
    }
}

/// Transform of `atom` at frequency `s`.
pub fn atom_ft(atom: &SignalAtom, s: &[f64]) -> Result<Complex64, ModelError> {
    if s.len() != atom.dimension() {
        return Err(ModelError::DimensionMismatch {
            expected: atom.dimension(),
            found: s.len(),
        });
    }
    Ok(Complex64::new(atom_ft_real(atom, s), 0.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftTerm {
    pub amplitude: f64,
    pub shift: Point,
}

impl ShiftTerm {
    pub fn new(amplitude: f64, shift: impl Into<Point>) -> Self {
        Self {
            amplitude,
            shift: shift.into(),
        }
    }
}

/// `F(x) = Σ_j Σ_q a_jq f_j(x - x_jq)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftModel {
    pub atoms: Vec<SignalAtom>,
    /// `terms[j]` holds the shifted copies of `atoms[j]`.
    pub terms: Vec<Vec<ShiftTerm>>,
    pub dimension: usize,
}

impl ShiftModel {
    pub fn new(atoms: Vec<SignalAtom>, terms: Vec<Vec<ShiftTerm>>) -> Self {
        let dimension = atoms.first().map_or(0, SignalAtom::dimension);
        Self {
            atoms,
            terms,
            dimension,
        }
    }

    pub fn orders(&self) -> Vec<usize> {
        self.terms.iter().map(Vec::len).collect()
    }
}

/// Exponential sum `Σ_q a_q e^{-i s·x_q}` of one atom's terms.
pub fn shift_sum(terms: &[ShiftTerm], s: &[f64]) -> Complex64 {
    terms
        .iter()
        .map(|t| Complex64::from_polar(t.amplitude, -dot(s, &t.shift)))
        .sum()
}

/// Exact transform of the whole model via the shift identity.
pub fn model_ft(model: &ShiftModel, s: &[f64]) -> Result<Complex64, ModelError> {
    let mut total = Complex64::new(0.0, 0.0);
    for (atom, terms) in model.atoms.iter().zip(&model.terms) {
        let a = atom_ft(atom, s)?;
        if terms.iter().any(|t| t.shift.len() != s.len()) {
            return Err(ModelError::DimensionMismatch {
                expected: s.len(),
                found: terms.iter().map(|t| t.shift.len()).find(|&l| l != s.len()).unwrap_or(0),
            });
        }
        total += a * shift_sum(terms, s);
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierSample {
    pub frequency: Point,
    pub value: Complex64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSet {
    pub samples: Vec<FourierSample>,
    pub noise_level: f64,
    pub seed: u64,
}

/// Evaluates the model on every frequency of `samples` and adds complex
/// Gaussian noise with per-component standard deviation `noise_level`.
pub fn synthesize_measurements(
    model: &ShiftModel,
    samples: &SampleSet,
    noise_level: f64,
    seed: u64,
) -> Result<MeasurementSet, ModelError> {
    synthesize(model, samples, noise_level, seed, None)
}

/// Like [`synthesize_measurements`], but an atom whose closed-form zero set
/// contains the frequency (within `zero_tol`) contributes exactly zero.
///
/// Floating-point sample locations only approximate the true zeros, which
/// leaves off-target leakage of order `ulp(s)`; this variant models samples
/// taken at the exact zeros.
pub fn synthesize_exact_zeros(
    model: &ShiftModel,
    samples: &SampleSet,
    noise_level: f64,
    seed: u64,
    zero_tol: f64,
) -> Result<MeasurementSet, ModelError> {
    synthesize(model, samples, noise_level, seed, Some(zero_tol))
}

fn synthesize(
    model: &ShiftModel,
    samples: &SampleSet,
    noise_level: f64,
    seed: u64,
    snap: Option<f64>,
) -> Result<MeasurementSet, ModelError> {
    if !(noise_level.is_finite() && noise_level >= 0.0) {
        return Err(ModelError::InvalidNoise(noise_level));
    }
    let zero_sets: Vec<ZeroSetDesc> = match snap {
        Some(_) => model.atoms.iter().map(zero_set).collect(),
        None => Vec::new(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_level).map_err(|_| ModelError::InvalidNoise(noise_level))?;
    let mut out = Vec::with_capacity(samples.frequencies.len());
    for s in &samples.frequencies {
        let mut value = model_ft(model, s)?;
        if let Some(tol) = snap {
            value = Complex64::new(0.0, 0.0);
            for ((atom, terms), zs) in model.atoms.iter().zip(&model.terms).zip(&zero_sets) {
                if !zs.contains(s, tol) {
                    value += atom_ft(atom, s)? * shift_sum(terms, s);
                }
            }
        }
        if noise_level > 0.0 {
            value += Complex64::new(noise.sample(&mut rng), noise.sample(&mut rng));
        }
        out.push(FourierSample {
            frequency: s.clone(),
            value,
        });
    }
    Ok(MeasurementSet {
        samples: out,
        noise_level,
        seed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum ModelViolation {
    TooFewAtoms { k: usize },
    InvalidAtom { atom: usize, reason: String },
    AtomDimension { atom: usize, expected: usize, found: usize },
    TermListMismatch { atoms: usize, term_lists: usize },
    EmptyTerms { atom: usize },
    ShiftDimension { atom: usize, term: usize, expected: usize, found: usize },
    BadAmplitude { atom: usize, term: usize, value: f64 },
    NonFiniteShift { atom: usize, term: usize },
}

impl fmt::Display for ModelViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelViolation::TooFewAtoms { k } => write!(f, "k ≥ 2 required (model has k = {k})"),
            ModelViolation::InvalidAtom { atom, reason } => write!(f, "atom {atom}: {reason}"),
            ModelViolation::AtomDimension { atom, expected, found } => {
                write!(f, "atom {atom} has dimension {found}, model dimension is {expected}")
            }
            ModelViolation::TermListMismatch { atoms, term_lists } => {
                write!(f, "{atoms} atoms but {term_lists} term lists")
            }
            ModelViolation::EmptyTerms { atom } => write!(f, "atom {atom} has no terms"),
            ModelViolation::ShiftDimension { atom, term, expected, found } => write!(
                f,
                "atom {atom} term {term}: shift has dimension {found}, expected {expected}"
            ),
            ModelViolation::BadAmplitude { atom, term, value } => {
                write!(f, "atom {atom} term {term}: amplitude {value} must be finite and nonzero")
            }
            ModelViolation::NonFiniteShift { atom, term } => {
                write!(f, "atom {atom} term {term}: shift is not finite")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<ModelViolation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_model(model: &ShiftModel) -> ValidationReport {
    let mut violations = Vec::new();
    let k = model.atoms.len();
    if k < 2 {
        violations.push(ModelViolation::TooFewAtoms { k });
    }
    if model.terms.len() != k {
        violations.push(ModelViolation::TermListMismatch {
            atoms: k,
            term_lists: model.terms.len(),
        });
    }
    let n = model.dimension;
    for (j, atom) in model.atoms.iter().enumerate() {
        if let Err(ModelError::InvalidAtom(reason)) = atom.validate() {
            violations.push(ModelViolation::InvalidAtom { atom: j, reason });
        }
        if atom.dimension() != n {
            violations.push(ModelViolation::AtomDimension {
                atom: j,
                expected: n,
                found: atom.dimension(),
            });
        }
    }
    for (j, terms) in model.terms.iter().enumerate() {
        if terms.is_empty() {
            violations.push(ModelViolation::EmptyTerms { atom: j });
        }
        for (q, t) in terms.iter().enumerate() {
            if t.shift.len() != n {
                violations.push(ModelViolation::ShiftDimension {
                    atom: j,
                    term: q,
                    expected: n,
                    found: t.shift.len(),
                });
            } else if t.shift.iter().any(|v| !v.is_finite()) {
                violations.push(ModelViolation::NonFiniteShift { atom: j, term: q });
            }
            if !t.amplitude.is_finite() || t.amplitude == 0.0 {
                violations.push(ModelViolation::BadAmplitude {
                    atom: j,
                    term: q,
                    value: t.amplitude,
                });
            }
        }
    }
    ValidationReport { violations }
}

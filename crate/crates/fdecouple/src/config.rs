//! Experiment configuration (JSON, versioned).

use std::path::{Path, PathBuf};

use fdecouple_core::prony::RealnessPolicy;
use fdecouple_core::sampling_geometry::{SampleStrategy, Window, DEFAULT_NONZERO_TOL, DEFAULT_ZERO_TOL};
use fdecouple_core::signal_model::{validate_model, ShiftModel, ShiftTerm, SignalAtom};
use fdecouple_core::uniqueness::{KhovanskiConstant, NetParams};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unsupported schema_version {0} (expected {SCHEMA_VERSION})")]
    Schema(u32),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSpec {
    pub strategy: SampleStrategy,
    /// Number of samples; for `grid`, points per direction.
    pub count: usize,
}

/// Reference to externally measured samples (CSV with columns
/// `s_1..s_n,re,im`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSource {
    pub path: PathBuf,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CertificateToggles {
    /// Shortest-window certificate on each 1D decoupling set.
    pub window: bool,
    /// Covering-number certificate on each sample set.
    pub span: bool,
    /// `(α,h)`-net check of each sample set.
    pub net: Option<NetParams>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    pub atoms: Vec<SignalAtom>,
    /// Ground-truth terms per atom; mutually exclusive with `measurements`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<Vec<Vec<ShiftTerm>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measurements: Option<MeasurementSource>,
    /// Number of terms per atom; required with `measurements`, otherwise
    /// taken from `truth`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orders: Option<Vec<usize>>,
    pub window: Window,
    /// One entry per atom, or a single entry applied to every atom.
    pub sampling: Vec<SamplingSpec>,
    #[serde(default)]
    pub noise_level: f64,
    #[serde(default)]
    pub seed: u64,
    /// Synthesize with off-target atoms exactly zero on their closed-form
    /// zero sets (see `synthesize_exact_zeros`).
    #[serde(default = "yes")]
    pub exact_zeros: bool,
    #[serde(default)]
    pub certificates: CertificateToggles,
    #[serde(default)]
    pub khovanski: KhovanskiConstant,
    #[serde(default = "default_zero_tol")]
    pub zero_tol: f64,
    #[serde(default = "default_nonzero_tol")]
    pub nonzero_tol: f64,
    /// Refine lattice solutions with the unit-modulus generalized solver.
    #[serde(default = "yes")]
    pub polish: bool,
    #[serde(default)]
    pub realness: RealnessPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn yes() -> bool {
    true
}

fn default_zero_tol() -> f64 {
    DEFAULT_ZERO_TOL
}

fn default_nonzero_tol() -> f64 {
    DEFAULT_NONZERO_TOL
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config; a relative measurement path is
    /// resolved against the config's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_json(&text)?;
        if let (Some(m), Some(dir)) = (cfg.measurements.as_mut(), path.parent()) {
            if m.path.is_relative() {
                m.path = dir.join(&m.path);
            }
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn dimension(&self) -> usize {
        self.atoms.first().map_or(0, SignalAtom::dimension)
    }

    pub fn orders(&self) -> Vec<usize> {
        match (&self.orders, &self.truth) {
            (Some(o), _) => o.clone(),
            (None, Some(t)) => t.iter().map(Vec::len).collect(),
            (None, None) => vec![0; self.atoms.len()],
        }
    }

    pub fn truth_model(&self) -> Option<ShiftModel> {
        self.truth
            .as_ref()
            .map(|t| ShiftModel::new(self.atoms.clone(), t.clone()))
    }

    pub fn sampling_for(&self, atom: usize) -> &SamplingSpec {
        if self.sampling.len() == 1 {
            &self.sampling[0]
        } else {
            &self.sampling[atom]
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::Schema(self.schema_version));
        }
        if self.atoms.len() < 2 {
            return bad("at least two atoms are required".into());
        }
        let n = self.dimension();
        for (j, atom) in self.atoms.iter().enumerate() {
            if let Err(e) = atom.validate() {
                return bad(format!("atom {j}: {e}"));
            }
            if atom.dimension() != n {
                return bad(format!("atom {j} has dimension {}, expected {n}", atom.dimension()));
            }
        }
        match (&self.truth, &self.measurements) {
            (Some(_), Some(_)) => return bad("give either truth or measurements, not both".into()),
            (None, None) => return bad("one of truth or measurements is required".into()),
            (None, Some(_)) if self.orders.is_none() => {
                return bad("orders are required with external measurements".into())
            }
            _ => {}
        }
        if let Some(model) = self.truth_model() {
            let report = validate_model(&model);
            if let Some(v) = report
                .violations
                .iter()
                .find(|v| !matches!(v, fdecouple_core::signal_model::ModelViolation::EmptyTerms { .. }))
            {
                return bad(format!("truth: {v}"));
            }
        }
        if let (Some(o), Some(t)) = (&self.orders, &self.truth) {
            if o.len() != t.len() || o.iter().zip(t).any(|(k, ts)| *k != ts.len()) {
                return bad("orders disagree with truth".into());
            }
        }
        if self.orders().len() != self.atoms.len() {
            return bad("one order per atom is required".into());
        }
        if self.window.dimension() != n || Window::new(self.window.center.clone(), self.window.edge).is_err() {
            return bad("window must be a cube of positive edge in the atoms' dimension".into());
        }
        if self.sampling.len() != 1 && self.sampling.len() != self.atoms.len() {
            return bad("sampling needs one entry or one per atom".into());
        }
        if self.sampling.iter().any(|s| s.strategy == SampleStrategy::Grid) && n != 2 {
            return bad("grid sampling is two-dimensional".into());
        }
        if !(self.noise_level.is_finite() && self.noise_level >= 0.0) {
            return bad("noise_level must be finite and non-negative".into());
        }
        if !(self.zero_tol > 0.0 && self.nonzero_tol > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if self.khovanski.validate().is_err() {
            return bad("khovanski constants must be finite and at least 1".into());
        }
        if let Some(net) = &self.certificates.net {
            if net.validate().is_err() || net.anchor.len() != n {
                return bad("net parameters need 0 < alpha < 1/2, h > 0 and an anchor in the atoms' dimension".into());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "schema_version": 1,
        "atoms": [{"kind": "box1d", "halfwidth": 1.0}, {"kind": "delta_pair", "offset": 1.0}],
        "truth": [[{"amplitude": 1.0, "shift": [0.05]}], [{"amplitude": 0.7, "shift": [0.02]}]],
        "window": {"center": [0.0], "edge": 62.83},
        "sampling": [{"strategy": "consecutive_progression", "count": 8}]
    }"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.orders(), vec![1, 1]);
        assert!(cfg.polish && cfg.exact_zeros);
        assert_eq!(cfg.zero_tol, DEFAULT_ZERO_TOL);
        assert_eq!(cfg.sampling_for(1).count, 8);
        let again = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn rejects_bad_configs() {
        let swap = |from: &str, to: &str| ExperimentConfig::from_json(&MINIMAL.replace(from, to));
        assert!(matches!(swap("\"schema_version\": 1", "\"schema_version\": 7"), Err(ConfigError::Schema(7))));
        assert!(matches!(
            swap("\"window\"", "\"measurements\": {\"path\": \"m.csv\"}, \"window\""),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(swap("62.83", "-1.0"), Err(ConfigError::Invalid(_))));
        assert!(matches!(swap("\"strategy\"", "\"bogus\": 1, \"strategy\""), Err(ConfigError::Parse(_))));
        assert!(matches!(swap("consecutive_progression", "grid"), Err(ConfigError::Invalid(_))));
    }
}

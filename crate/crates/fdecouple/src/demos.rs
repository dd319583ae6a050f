//! Bundled example configurations.

use crate::config::ExperimentConfig;

/// Box `[-1,1]` and the delta pair at `±1`, two terms each, shifts inside
/// the window-certified range.
pub const DEMO_1D: &str = include_str!("../configs/demo-1d.json");

/// Axis squares of half-width 3 and 5 and the rotated square of
/// half-diagonal 2, two terms each, sampled on 4×4 grids.
pub const DEMO_2D: &str = include_str!("../configs/demo-2d.json");

pub fn demo_1d() -> ExperimentConfig {
    ExperimentConfig::from_json(DEMO_1D).expect("bundled config is valid")
}

pub fn demo_2d() -> ExperimentConfig {
    ExperimentConfig::from_json(DEMO_2D).expect("bundled config is valid")
}

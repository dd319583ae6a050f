//! Experiment driver for decoupled Fourier reconstruction: JSON configs,
//! the per-atom pipeline, scoring against ground truth, CSV and SVG output.

pub mod cli;
pub mod config;
pub mod demos;
pub mod io;
pub mod pipeline;
pub mod scoring;
pub mod svg;

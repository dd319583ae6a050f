//! Command-line front end.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use fdecouple_core::sampling_geometry::{zero_set, SampleSet};
use fdecouple_core::uniqueness::skolem_demo;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::io::moments_csv;
use crate::pipeline::{active_decoupling_set, run_reconstruction, sample_set, ReconstructionReport};
use crate::svg::render_zero_plot;
use crate::{demos, pipeline};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_PARTIAL: i32 = 2;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "fdecouple", version, about = "Decoupled Fourier reconstruction of shifted signal atoms")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (default: the config's output_dir, else ./fdecouple-out).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Override the config's seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Override the config's noise level.
    #[arg(long, global = true)]
    pub noise: Option<f64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Zero sets of every atom and their plot.
    Zeros,
    /// Decoupling sets and chosen samples per atom.
    SampleSets,
    /// Full reconstruction pipeline.
    Reconstruct,
    /// Uniqueness certificates for the chosen sample sets.
    Certify,
    /// Bundled one-dimensional example (box and delta pair).
    #[command(name = "demo-1d")]
    Demo1d,
    /// Bundled two-dimensional example (three squares).
    #[command(name = "demo-2d")]
    Demo2d,
    /// Moment table of the signed four-term counterexample.
    Skolem {
        #[arg(long, default_value_t = 40)]
        max_k: u32,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("--config is required for this command")]
    MissingConfig,
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error(transparent)]
    Pipeline(#[from] pipeline::PipelineError),
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Other(String),
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    std::fs::create_dir_all(dir)
        .and_then(|_| std::fs::write(&path, contents))
        .map_err(|source| CliError::Write {
            path: path.clone(),
            source,
        })?;
    Ok(path)
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("value serializes");
    s.push('\n');
    s
}

fn load(cli: &Cli, bundled: Option<ExperimentConfig>) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match (&cli.config, bundled) {
        (Some(p), _) => ExperimentConfig::load(p)?,
        (None, Some(b)) => b,
        (None, None) => return Err(CliError::MissingConfig),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(noise) = cli.noise {
        cfg.noise_level = noise;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: Option<&ExperimentConfig>) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| cfg.and_then(|c| c.output_dir.clone()))
        .unwrap_or_else(|| PathBuf::from("fdecouple-out"))
}

fn chosen_sets(cfg: &ExperimentConfig) -> Vec<SampleSet> {
    (0..cfg.atoms.len())
        .filter_map(|r| active_decoupling_set(cfg, r).ok())
        .filter_map(|(w, _)| sample_set(cfg, &w).ok())
        .collect()
}

fn plot(cfg: &ExperimentConfig, sets: &[SampleSet], dir: &Path) -> Result<Option<PathBuf>, CliError> {
    match render_zero_plot(&cfg.atoms, &cfg.window, sets) {
        Ok(svg) => Ok(Some(write(dir, "zeros.svg", &svg)?)),
        Err(_) => Ok(None),
    }
}

/// Writes `report.json`, `moments.csv` and `zeros.svg` (plus
/// `estimates.csv` with `--format csv`); returns the report.
pub fn write_reconstruction(cfg: &ExperimentConfig, dir: &Path, format: Format) -> Result<ReconstructionReport, CliError> {
    let report = run_reconstruction(cfg)?;
    write(dir, "report.json", &(report.to_json() + "\n"))?;
    let n = cfg.dimension();
    let systems: Vec<_> = report
        .atoms
        .iter()
        .filter_map(|a| a.system.as_ref().map(|s| (a.atom, s.exponents.as_slice(), s.rhs.as_slice())))
        .collect();
    write(dir, "moments.csv", &moments_csv(systems, n).map_err(|e| CliError::Other(e.to_string()))?)?;
    let sets: Vec<SampleSet> = report.atoms.iter().filter_map(|a| a.samples.clone()).collect();
    plot(cfg, &sets, dir)?;
    if format == Format::Csv {
        let mut text = String::from("atom,term");
        for d in 1..=n {
            text += &format!(",x_{d}");
        }
        text += ",re,im\n";
        for a in &report.atoms {
            for (q, e) in a.estimates.iter().enumerate() {
                text += &format!("{},{q}", a.atom);
                for x in &e.shift {
                    text += &format!(",{x}");
                }
                text += &format!(",{},{}\n", e.amplitude.re, e.amplitude.im);
            }
        }
        write(dir, "estimates.csv", &text)?;
    }
    Ok(report)
}

fn summarize(report: &ReconstructionReport) {
    for a in &report.atoms {
        let status = match &a.status {
            pipeline::AtomStatus::Ok => "ok".to_string(),
            pipeline::AtomStatus::Inactive => "inactive".to_string(),
            pipeline::AtomStatus::Failed { kind, .. } => format!("failed ({kind})"),
        };
        println!("atom {} {}: {status}, {} estimates", a.atom, a.name, a.estimates.len());
    }
    if let Some(s) = &report.score {
        println!(
            "max shift error {:e}, max amplitude error {:e}",
            s.max_shift_error(),
            s.max_amplitude_error()
        );
    }
}

#[derive(Serialize)]
struct SampleSetEntry {
    atom: usize,
    decoupling_points: Option<Vec<Vec<f64>>>,
    samples: Option<SampleSet>,
    error: Option<String>,
}

#[derive(Serialize)]
struct CertifyEntry {
    atom: usize,
    certificates: Option<pipeline::AtomCertificates>,
    error: Option<String>,
}

fn execute(cli: &Cli) -> Result<i32, CliError> {
    match &cli.command {
        Command::Skolem { max_k } => {
            let demo = skolem_demo(*max_k).map_err(|e| CliError::Other(e.to_string()))?;
            let dir = out_dir(cli, None);
            match cli.format {
                Format::Json => write(&dir, "skolem.json", &json(&demo))?,
                Format::Csv => {
                    let mut text = String::from("k,moment\n");
                    for r in &demo.rows {
                        text += &format!("{},{}\n", r.k, r.moment);
                    }
                    write(&dir, "skolem.csv", &text)?
                }
            };
            println!("even moments zero: {}; even-grid solve: {:?}", demo.even_moments_zero, demo.even_grid_solve);
            Ok(EXIT_OK)
        }
        Command::Zeros => {
            let cfg = load(cli, None)?;
            let dir = out_dir(cli, Some(&cfg));
            let zs: Vec<_> = cfg.atoms.iter().map(zero_set).collect();
            write(&dir, "zeros.json", &json(&zs))?;
            plot(&cfg, &chosen_sets(&cfg), &dir)?;
            Ok(EXIT_OK)
        }
        Command::SampleSets => {
            let cfg = load(cli, None)?;
            let dir = out_dir(cli, Some(&cfg));
            let mut failed = false;
            let entries: Vec<SampleSetEntry> = (0..cfg.atoms.len())
                .map(|r| match active_decoupling_set(&cfg, r) {
                    Err(e) => {
                        failed = true;
                        SampleSetEntry {
                            atom: r,
                            decoupling_points: None,
                            samples: None,
                            error: Some(e.to_string()),
                        }
                    }
                    Ok((w, _)) => {
                        let chosen = sample_set(&cfg, &w);
                        failed |= chosen.is_err();
                        SampleSetEntry {
                            atom: r,
                            error: chosen.as_ref().err().map(|e| e.to_string()),
                            samples: chosen.ok(),
                            decoupling_points: Some(w.points),
                        }
                    }
                })
                .collect();
            match cli.format {
                Format::Json => write(&dir, "sample_sets.json", &json(&entries))?,
                Format::Csv => {
                    let n = cfg.dimension();
                    let mut text = String::from("atom,index,chosen");
                    for d in 1..=n {
                        text += &format!(",s_{d}");
                    }
                    text.push('\n');
                    for e in &entries {
                        let chosen = e.samples.as_ref().map(|s| s.frequencies.as_slice()).unwrap_or(&[]);
                        for (i, p) in e.decoupling_points.iter().flatten().enumerate() {
                            let hit = chosen.iter().any(|c| fdecouple_core::distance(c, p) < 1e-9);
                            text += &format!("{},{i},{}", e.atom, u8::from(hit));
                            for x in p {
                                text += &format!(",{x}");
                            }
                            text.push('\n');
                        }
                    }
                    write(&dir, "sample_sets.csv", &text)?
                }
            };
            Ok(if failed { EXIT_PARTIAL } else { EXIT_OK })
        }
        Command::Certify => {
            let mut cfg = load(cli, None)?;
            cfg.certificates.window = true;
            cfg.certificates.span = true;
            let dir = out_dir(cli, Some(&cfg));
            let orders = cfg.orders();
            let mut failed = false;
            let entries: Vec<CertifyEntry> = (0..cfg.atoms.len())
                .map(|r| {
                    let chosen = active_decoupling_set(&cfg, r).and_then(|(w, _)| sample_set(&cfg, &w));
                    match chosen {
                        Ok(set) if orders[r] > 0 => CertifyEntry {
                            atom: r,
                            certificates: Some(pipeline::certificates(&cfg, &set, orders[r])),
                            error: None,
                        },
                        Ok(_) => CertifyEntry {
                            atom: r,
                            certificates: None,
                            error: Some("order 0: nothing to certify".into()),
                        },
                        Err(e) => {
                            failed = true;
                            CertifyEntry {
                                atom: r,
                                certificates: None,
                                error: Some(e.to_string()),
                            }
                        }
                    }
                })
                .collect();
            write(&dir, "certificates.json", &json(&entries))?;
            Ok(if failed { EXIT_PARTIAL } else { EXIT_OK })
        }
        Command::Reconstruct | Command::Demo1d | Command::Demo2d => {
            let bundled = match cli.command {
                Command::Demo1d => Some(demos::demo_1d()),
                Command::Demo2d => Some(demos::demo_2d()),
                _ => None,
            };
            let cfg = load(cli, bundled)?;
            let dir = out_dir(cli, Some(&cfg));
            let report = write_reconstruction(&cfg, &dir, cli.format)?;
            summarize(&report);
            Ok(if report.has_failures() { EXIT_PARTIAL } else { EXIT_OK })
        }
    }
}

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    }
}

use fdecouple::config::{ExperimentConfig, MeasurementSource, SamplingSpec};
use fdecouple::demos::{demo_1d, demo_2d};
use fdecouple::io::measurements_csv;
use fdecouple::pipeline::{active_decoupling_set, run_reconstruction, sample_set, AtomStatus, PipelineError, ReconstructionReport};
use fdecouple::scoring::match_and_score;
use fdecouple::svg::render_zero_plot;
use fdecouple_core::prony::{
    assemble_decoupled, recover_shifts, reduce_to_standard, solve_generalized_with, solve_standard_prony,
    GeneralizedOptions, NodeDomain, RealnessPolicy,
};
use fdecouple_core::sampling_geometry::{SampleLayout, SampleStrategy};
use fdecouple_core::signal_model::{synthesize_exact_zeros, ShiftTerm, SignalAtom};

#[test]
fn reruns_are_byte_identical() {
    let mut cfg = demo_1d();
    cfg.noise_level = 1e-4;
    cfg.seed = 9;
    let a = run_reconstruction(&cfg).unwrap();
    let b = run_reconstruction(&cfg).unwrap();
    assert_eq!(a.deterministic_json(), b.deterministic_json());
    assert!(a.timing.is_some());
    assert!(!a.deterministic_json().contains("total_ms"));
}

#[test]
fn demo_1d_reconstructs_exactly() {
    let report = run_reconstruction(&demo_1d()).unwrap();
    assert!(!report.has_failures());
    let score = report.score.as_ref().unwrap();
    assert!(score.max_shift_error() < 1e-8, "{}", score.max_shift_error());
    assert!(score.max_amplitude_error() < 1e-8);
    for a in &report.atoms {
        let cert = a.certificates.window.as_ref().unwrap().as_ref().unwrap();
        assert_eq!(cert.points.len(), 2 * a.order);
        assert!(a.certificates.span.is_some());
    }
}

#[test]
fn demo_1d_with_single_terms() {
    let mut cfg = demo_1d();
    cfg.truth = Some(vec![
        vec![ShiftTerm::new(1.3, vec![0.03])],
        vec![ShiftTerm::new(0.9, vec![0.011])],
    ]);
    let report = run_reconstruction(&cfg).unwrap();
    assert!(report.score.unwrap().max_shift_error() < 1e-8);
}

#[test]
fn gaussian_without_terms_leaves_targets_intact() {
    let mut cfg = demo_1d();
    cfg.atoms.push(SignalAtom::Gaussian { width: 0.5 });
    cfg.truth.as_mut().unwrap().push(Vec::new());
    let report = run_reconstruction(&cfg).unwrap();
    for a in &report.atoms[..2] {
        assert_eq!(a.status, AtomStatus::Ok);
    }
    assert!(report.score.as_ref().unwrap().max_shift_error() < 1e-8);
    match &report.atoms[2].status {
        AtomStatus::Failed { kind, .. } => assert_eq!(kind, "EmptyDecouplingSet"),
        other => panic!("unexpected status {other:?}"),
    }
    assert!(report.has_failures());
}

#[test]
fn one_failing_atom_does_not_abort_the_rest() {
    let mut cfg = demo_1d();
    cfg.sampling = vec![
        SamplingSpec { strategy: SampleStrategy::ConsecutiveProgression, count: 16 },
        SamplingSpec { strategy: SampleStrategy::ConsecutiveProgression, count: 500 },
    ];
    let report = run_reconstruction(&cfg).unwrap();
    assert_eq!(report.atoms[0].status, AtomStatus::Ok);
    assert!(matches!(report.atoms[1].status, AtomStatus::Failed { .. }));
    assert!(report.score.unwrap().atoms[0].max_shift_error < 1e-8);
}

#[test]
fn pipeline_equals_manual_composition() {
    let cfg = demo_1d();
    let report = run_reconstruction(&cfg).unwrap();
    let model = cfg.truth_model().unwrap();
    for r in 0..2 {
        let (w, _) = active_decoupling_set(&cfg, r).unwrap();
        let set = sample_set(&cfg, &w).unwrap();
        assert_eq!(report.atoms[r].samples.as_ref(), Some(&set));
        let meas = synthesize_exact_zeros(&model, &set, 0.0, cfg.seed + r as u64, cfg.zero_tol).unwrap();
        let sys = assemble_decoupled(&cfg.atoms, r, &meas, 2, cfg.nonzero_tol).unwrap();
        assert_eq!(report.atoms[r].system.as_ref(), Some(&sys));
        let Some(SampleLayout::Progression { base, step }) = &set.layout else { panic!() };
        let st = reduce_to_standard(&sys, base, step).unwrap();
        let sol = solve_standard_prony(&st, 2).unwrap();
        let opts = GeneralizedOptions { domain: NodeDomain::UnitModulus, ..Default::default() };
        let polished = solve_generalized_with(&sys, 2, Some(&st.lift(&sol)), &opts).unwrap();
        let est = recover_shifts(&st.project(&polished.terms, sol.condition_estimate), base, step, RealnessPolicy::AsIs);
        assert_eq!(report.atoms[r].estimates, est);
    }
}

#[test]
fn score_is_recomputable_from_the_serialized_report() {
    let report = run_reconstruction(&demo_2d()).unwrap();
    let parsed: ReconstructionReport = serde_json::from_str(&report.to_json()).unwrap();
    let truth = parsed.config.truth_model().unwrap();
    assert_eq!(Some(match_and_score(&truth, &parsed.estimates())), parsed.score);
    assert!(parsed.score.unwrap().max_shift_error() < 1e-6);
}

#[test]
fn external_measurements_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = demo_1d();
    let model = cfg.truth_model().unwrap();
    let mut samples = Vec::new();
    for r in 0..2 {
        let (w, _) = active_decoupling_set(&cfg, r).unwrap();
        let set = sample_set(&cfg, &w).unwrap();
        samples.extend(synthesize_exact_zeros(&model, &set, 0.0, 0, cfg.zero_tol).unwrap().samples);
    }
    std::fs::write(dir.path().join("m.csv"), measurements_csv(&samples, 1).unwrap()).unwrap();

    let mut ext = cfg.clone();
    ext.orders = Some(vec![2, 2]);
    ext.truth = None;
    ext.measurements = Some(MeasurementSource { path: "m.csv".into() });
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(&cfg_path, ext.to_json()).unwrap();
    let loaded = ExperimentConfig::load(&cfg_path).unwrap();
    let report = run_reconstruction(&loaded).unwrap();
    assert!(report.score.is_none());
    let score = match_and_score(&model, &report.estimates());
    assert!(score.max_shift_error() < 1e-8);

    // drop one sample: the run must stop instead of solving with a gap
    let truncated = measurements_csv(&samples[1..], 1).unwrap();
    std::fs::write(dir.path().join("m.csv"), truncated).unwrap();
    assert!(matches!(run_reconstruction(&loaded), Err(PipelineError::Measurements(_))));
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    0.5 * (v[(n - 1) / 2] + v[n / 2])
}

#[test]
fn median_error_grows_with_noise() {
    let mut medians = Vec::new();
    for noise in [0.0, 1e-6, 1e-3] {
        let errs: Vec<f64> = (0..50)
            .map(|seed| {
                let mut cfg = demo_1d();
                cfg.noise_level = noise;
                cfg.seed = seed;
                run_reconstruction(&cfg).unwrap().score.unwrap().max_shift_error()
            })
            .collect();
        medians.push(median(errs));
    }
    assert!(medians.windows(2).all(|w| w[0] <= w[1]), "{medians:?}");
}

#[test]
fn three_squares_plot_structure() {
    let cfg = demo_2d();
    let report = run_reconstruction(&cfg).unwrap();
    let sets: Vec<_> = report.atoms.iter().filter_map(|a| a.samples.clone()).collect();
    let svg = render_zero_plot(&cfg.atoms, &cfg.window, &sets).unwrap();
    assert!(svg.starts_with("<svg xmlns=\"http://www.w3.org/2000/svg\""));
    assert!(svg.trim_end().ends_with("</svg>"));
    assert_eq!(svg.matches(r#"class="zeros""#).count(), 3);
    assert_eq!(svg.matches(r#"class="samples""#).count(), 3);
    assert_eq!(svg.matches("<circle").count(), 3 * 16);
    assert_eq!(svg.matches("<g").count(), svg.matches("</g>").count());
}

use std::f64::consts::PI;

use fdecouple_core::prony::{
    reduce_to_standard, recover_shifts, solve_standard_prony, GeneralizedPronySystem, PronyError, RealnessPolicy,
    StandardPronySystem,
};
use fdecouple_core::sampling_geometry::{
    choose_samples, decoupling_set, verify_decoupling_point, SampleLayout, SampleStrategy, Window,
};
use fdecouple_core::signal_model::{shift_sum, ShiftTerm, SignalAtom};
use fdecouple_core::uniqueness::{covering_number, one_d_window};
use fdecouple_core::Complex64;
use proptest::prelude::*;

fn brute_covering(xs: &[f64], eps: f64) -> usize {
    let n = xs.len();
    // optimal interval covers can start at set points
    (1..=n)
        .find(|&k| {
            (0u32..1 << n).filter(|m| m.count_ones() as usize == k).any(|mask| {
                xs.iter().all(|&x| {
                    (0..n).any(|i| mask >> i & 1 == 1 && x >= xs[i] && x - xs[i] <= 2.0 * eps)
                })
            })
        })
        .unwrap_or(0)
}

fn points(xs: &[f64]) -> Vec<Vec<f64>> {
    xs.iter().map(|&x| vec![x]).collect()
}

proptest! {
    #[test]
    fn one_d_covering_is_exact_and_monotone(
        xs in prop::collection::vec(-10.0f64..10.0, 1..=10),
        e1 in 0.01f64..5.0,
        e2 in 0.01f64..5.0,
    ) {
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let c = covering_number(&points(&xs), lo);
        prop_assert!(c.exact);
        prop_assert_eq!(c.lower, brute_covering(&xs, lo));
        prop_assert!(covering_number(&points(&xs), hi).lower <= c.lower);
    }

    #[test]
    fn window_is_the_shortest_span_of_2n_points(
        xs in prop::collection::vec(-50.0f64..50.0, 2..=16),
        order in 1usize..=4,
    ) {
        let mut sorted = xs.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
        let k = 2 * order;
        match one_d_window(&xs, order) {
            Ok(w) => {
                let brute = sorted.windows(k).map(|s| s[k - 1] - s[0]).fold(f64::INFINITY, f64::min);
                prop_assert_eq!(w.length, brute);
                prop_assert_eq!(w.points.len(), k);
                prop_assert!((w.rho * w.length - 1.0).abs() < 1e-12);
            }
            Err(_) => prop_assert!(sorted.len() < k),
        }
    }

    #[test]
    fn one_d_decoupling_points_satisfy_the_inequalities(
        b in 0.3f64..3.0,
        c in 0.3f64..3.0,
        target in 0usize..2,
    ) {
        let atoms = [SignalAtom::Box1d { halfwidth: b }, SignalAtom::DeltaPair { offset: c }];
        let window = Window::centered(1, 40.0);
        if let Ok(w) = decoupling_set(&atoms, target, &window, 1e-9, 1e-6) {
            prop_assert!(!w.points.is_empty());
            for p in &w.points {
                prop_assert!(window.contains(p));
                prop_assert!(verify_decoupling_point(&atoms, target, p, 1e-9, 1e-6));
            }
        }
    }

    #[test]
    fn prony_recovers_separated_unit_nodes(
        raw in prop::collection::vec((0.0f64..1.0, 0.5f64..2.0), 1..=4),
        extra in 0usize..6,
    ) {
        // spread shifts over [0, 2) with separation ≥ 0.1 (nodes e^{-i x})
        let n = raw.len();
        let terms: Vec<ShiftTerm> = raw
            .iter()
            .enumerate()
            .map(|(q, &(u, a))| ShiftTerm::new(a, vec![q as f64 * 0.5 + 0.3 * u]))
            .collect();
        let m = 2 * n + extra;
        let moments: Vec<Complex64> = (0..m).map(|l| shift_sum(&terms, &[l as f64])).collect();
        let sys = StandardPronySystem { base: vec![0.0], step: vec![1.0], moments };
        let sol = solve_standard_prony(&sys, n).unwrap();
        prop_assert!(sol.residual < 1e-10);
        let est = recover_shifts(&sol, &[0.0], &[1.0], RealnessPolicy::AsIs);
        for t in &terms {
            let hit = est.iter().any(|e| {
                (e.shift[0] - t.shift[0]).abs() < 1e-8 && (e.amplitude - Complex64::new(t.amplitude, 0.0)).norm() < 1e-8
            });
            prop_assert!(hit, "term {:?} not recovered in {:?}", t, est);
        }
        for e in &est {
            prop_assert!(e.shift[0] >= 0.0 && e.shift[0] < 2.0 * PI);
        }
    }

    #[test]
    fn lift_then_project_is_identity(
        raw in prop::collection::vec((0.0f64..1.0, 0.5f64..2.0), 1..=3),
        base in -3.0f64..3.0,
        step in 0.5f64..2.0,
    ) {
        let n = raw.len();
        let terms: Vec<ShiftTerm> = raw
            .iter()
            .enumerate()
            .map(|(q, &(u, a))| ShiftTerm::new(a, vec![q as f64 * 0.8 + 0.5 * u]))
            .collect();
        let exps: Vec<Vec<f64>> = (0..2 * n + 2).map(|l| vec![base + l as f64 * step]).collect();
        let rhs = exps.iter().map(|s| shift_sum(&terms, s)).collect();
        let gsys = GeneralizedPronySystem::new(exps, rhs, n).unwrap();
        let st = reduce_to_standard(&gsys, &[base], &[step]).unwrap();
        let sol = solve_standard_prony(&st, n).unwrap();
        let back = st.project(&st.lift(&sol), sol.condition_estimate);
        for (a, b) in sol.terms.iter().zip(&back.terms) {
            prop_assert!((a.node - b.node).norm() < 1e-12);
            prop_assert!((a.amplitude - b.amplitude).norm() < 1e-12 * a.amplitude.norm().max(1.0));
        }
    }
}

#[test]
fn reduction_rejects_non_progressions() {
    let exps = vec![vec![0.0], vec![1.0], vec![2.5], vec![3.0]];
    let rhs = vec![Complex64::new(1.0, 0.0); 4];
    let sys = GeneralizedPronySystem::new(exps, rhs, 1).unwrap();
    assert_eq!(reduce_to_standard(&sys, &[0.0], &[1.0]), Err(PronyError::NotAProgression));
}

#[test]
fn consecutive_samples_form_the_reported_progression() {
    let atoms = [SignalAtom::Box1d { halfwidth: 1.0 }, SignalAtom::DeltaPair { offset: 1.0 }];
    let window = Window::centered(1, 40.0 * PI);
    for r in 0..2 {
        let w = decoupling_set(&atoms, r, &window, 1e-9, 1e-6).unwrap();
        let set = choose_samples(&w, 12, SampleStrategy::ConsecutiveProgression).unwrap();
        let Some(SampleLayout::Progression { base, step }) = &set.layout else {
            panic!("progression layout expected");
        };
        assert!((step[0].abs() - PI).abs() < 1e-12);
        for (l, s) in set.frequencies.iter().enumerate() {
            assert!((s[0] - base[0] - l as f64 * step[0]).abs() < 1e-9);
        }
    }
}

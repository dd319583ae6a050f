//! Uniqueness certificates for decoupled Prony systems: the shortest 1D
//! window criterion with the Langer zero bound, covering numbers and the
//! entropy criterion, the `(α,h)`-net corollary, and the even-grid
//! counterexample for signed nodes.
//!
//! The constant `C(d,n)` bounding zeros of exponential polynomials is not
//! computed here; certificates are relative to the configured
//! [`KhovanskiConstant`].

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::prony::{solve_standard_prony, PronyError, StandardPronySystem};
use crate::sampling_geometry::Window;
use crate::{distance, lex_cmp, Point};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum UniquenessError {
    #[error("{available} points given, at least {needed} required")]
    InsufficientPoints { needed: usize, available: usize },
    #[error("order must be at least 1")]
    InvalidOrder,
    #[error("net parameters need 0 < alpha < 1/2 and h > 0")]
    InvalidNetParams,
    #[error("point dimension does not match")]
    DimensionMismatch,
    #[error("not an (alpha,h)-net: {point:?} has no partner within {limit:e} (nearest at {nearest:e})")]
    NotANet {
        /// First violating point, from the grid or from the set.
        point: Point,
        from_grid: bool,
        nearest: f64,
        limit: f64,
    },
    #[error("grid inside the window has more than {0} points")]
    GridTooLarge(usize),
    #[error("constant values must be finite and at least 1")]
    InvalidConstant,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoveringEstimate {
    pub epsilon: f64,
    /// Size of a set of points pairwise further than `2ε` apart.
    pub lower: usize,
    /// Size of an explicit cover by closed `ε`-balls.
    pub upper: usize,
    pub exact: bool,
}

impl CoveringEstimate {
    /// Binary logarithms of the bounds (the ε-entropy range).
    pub fn entropy(&self) -> (f64, f64) {
        (log2_count(self.lower), log2_count(self.upper))
    }
}

fn log2_count(k: usize) -> f64 {
    if k == 0 {
        f64::NEG_INFINITY
    } else {
        libm::log2(k as f64)
    }
}

/// Covering number of a finite set by closed Euclidean `ε`-balls.
///
/// In one dimension the sorted greedy interval cover is optimal and the
/// estimate is exact. In higher dimensions the greedy `2ε`-separated subset
/// bounds it from below and a greedy cover from above. Non-positive `ε`
/// counts distinct points.
pub fn covering_number(points: &[Point], epsilon: f64) -> CoveringEstimate {
    let eps = if epsilon > 0.0 { epsilon } else { 0.0 };
    if points.is_empty() {
        return CoveringEstimate {
            epsilon,
            lower: 0,
            upper: 0,
            exact: true,
        };
    }
    if points[0].len() == 1 {
        let mut xs: Vec<f64> = points.iter().map(|p| p[0]).collect();
        xs.sort_by(f64::total_cmp);
        let mut count = 0;
        let mut i = 0;
        while i < xs.len() {
            let left = xs[i];
            count += 1;
            while i < xs.len() && xs[i] - left <= 2.0 * eps {
                i += 1;
            }
        }
        return CoveringEstimate {
            epsilon,
            lower: count,
            upper: count,
            exact: true,
        };
    }
    let mut order: Vec<&Point> = points.iter().collect();
    order.sort_by(|a, b| lex_cmp(a, b));

    let mut packing: Vec<&Point> = Vec::new();
    for p in &order {
        if packing.iter().all(|q| distance(p, q) > 2.0 * eps) {
            packing.push(p);
        }
    }
    let mut covered = alloc::vec![false; order.len()];
    let mut centers = 0;
    for i in 0..order.len() {
        if covered[i] {
            continue;
        }
        centers += 1;
        for j in i..order.len() {
            if !covered[j] && distance(order[i], order[j]) <= eps {
                covered[j] = true;
            }
        }
    }
    CoveringEstimate {
        epsilon,
        lower: packing.len(),
        upper: centers,
        exact: packing.len() == centers,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KhovanskiEntry {
    pub degree: usize,
    pub dimension: usize,
    pub value: f64,
}

/// Configured values of `C(d,n)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum KhovanskiConstant {
    Constant { value: f64 },
    Table { entries: Vec<KhovanskiEntry>, default: f64 },
}

impl Default for KhovanskiConstant {
    fn default() -> Self {
        Self::Constant { value: 1.0 }
    }
}

impl KhovanskiConstant {
    pub fn lookup(&self, degree: usize, dimension: usize) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::Table { entries, default } => entries
                .iter()
                .find(|e| e.degree == degree && e.dimension == dimension)
                .map_or(*default, |e| e.value),
        }
    }

    pub fn validate(&self) -> Result<(), UniquenessError> {
        let ok = |v: f64| v.is_finite() && v >= 1.0;
        let valid = match self {
            Self::Constant { value } => ok(*value),
            Self::Table { entries, default } => ok(*default) && entries.iter().all(|e| ok(e.value)),
        };
        if valid {
            Ok(())
        } else {
            Err(UniquenessError::InvalidConstant)
        }
    }
}

/// `C(d,n) · (R/ε)^{n−1}`.
pub fn entropy_bound(d: usize, n: usize, radius: f64, epsilon: f64, c: &KhovanskiConstant) -> f64 {
    c.lookup(d, n) * libm::pow(radius / epsilon, n as f64 - 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    CertifiedUnique,
    NotCertified,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpanCertificate {
    pub epsilon_star: f64,
    pub covering_lower: usize,
    pub threshold: f64,
    pub verdict: Verdict,
    pub order: usize,
    pub dimension: usize,
    pub radius: f64,
    pub constant: f64,
    pub candidates_tried: usize,
    pub scope: String,
}

const MAX_PAIR_CANDIDATES: usize = 4096;

fn epsilon_candidates(points: &[Point], radius: f64) -> Vec<f64> {
    let mut half: Vec<f64> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            let d = distance(p, q);
            if d > 0.0 {
                half.push(0.5 * d * (1.0 - 1e-9));
            }
        }
    }
    half.sort_by(f64::total_cmp);
    half.dedup();
    if half.len() > MAX_PAIR_CANDIDATES {
        let last = half.len() - 1;
        half = (0..MAX_PAIR_CANDIDATES)
            .map(|k| half[k * last / (MAX_PAIR_CANDIDATES - 1)])
            .collect();
    }
    half.extend((1..=20).map(|j| radius / libm::pow(2.0, j as f64)));
    half.retain(|&e| e > 0.0 && e < radius);
    half.sort_by(f64::total_cmp);
    half.dedup();
    half
}

/// Entropy criterion: certifies at most one solution with positive real
/// nodes when `M(ε,S) > C(2N,n)(R/ε)^{n−1}` for some searched `ε`.
///
/// `ε` runs over just-below-half pairwise distances (the breakpoints of the
/// covering number) and `R/2^j`, `j = 1..20`. The reported `ε*` maximizes
/// the ratio of covering lower bound to threshold.
pub fn span_certificate(
    points: &[Point],
    radius: f64,
    order: usize,
    dimension: usize,
    c: &KhovanskiConstant,
) -> SpanCertificate {
    let degree = 2 * order;
    let candidates = epsilon_candidates(points, radius);
    let mut best: Option<(f64, usize, f64)> = None;
    for &eps in &candidates {
        let lower = covering_number(points, eps).lower;
        let threshold = entropy_bound(degree, dimension, radius, eps, c);
        let ratio = lower as f64 / threshold;
        let better = match best {
            None => true,
            Some((e, l, t)) => ratio > l as f64 / t || (ratio == l as f64 / t && eps > e),
        };
        if better {
            best = Some((eps, lower, threshold));
        }
    }
    let (epsilon_star, covering_lower, threshold) = best.unwrap_or_else(|| {
        let eps = 0.5 * radius;
        (eps, covering_number(points, eps).lower, entropy_bound(degree, dimension, radius, eps, c))
    });
    let verdict = if (covering_lower as f64) > threshold {
        Verdict::CertifiedUnique
    } else {
        Verdict::NotCertified
    };
    SpanCertificate {
        epsilon_star,
        covering_lower,
        threshold,
        verdict,
        order,
        dimension,
        radius,
        constant: c.lookup(degree, dimension),
        candidates_tried: candidates.len(),
        scope: String::from("solutions with positive real nodes; relative to the configured C(d,n)"),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetParams {
    pub alpha: f64,
    pub h: f64,
    pub anchor: Point,
}

impl NetParams {
    pub fn validate(&self) -> Result<(), UniquenessError> {
        if self.alpha > 0.0 && self.alpha < 0.5 && self.h > 0.0 && self.h.is_finite() {
            Ok(())
        } else {
            Err(UniquenessError::InvalidNetParams)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetCertificate {
    pub verdict: Verdict,
    /// `R* = C(2N,n) · h · (1−2α)^{1−n}`.
    pub threshold: f64,
    pub window_edge: f64,
    pub alpha: f64,
    pub h: f64,
    pub constant: f64,
    pub grid_points: usize,
    pub set_points: usize,
}

/// `C(2N,n) · h · (1−2α)^{1−n}`.
pub fn net_threshold(params: &NetParams, order: usize, dimension: usize, c: &KhovanskiConstant) -> f64 {
    c.lookup(2 * order, dimension) * params.h * libm::pow(1.0 - 2.0 * params.alpha, 1.0 - dimension as f64)
}

const MAX_GRID_POINTS: usize = 1 << 20;

fn grid_in_window(params: &NetParams, window: &Window) -> Result<Vec<Point>, UniquenessError> {
    let n = window.dimension();
    let ranges: Vec<(i64, i64)> = (0..n)
        .map(|d| {
            let lo = window.center[d] - 0.5 * window.edge - params.anchor[d];
            let hi = window.center[d] + 0.5 * window.edge - params.anchor[d];
            (libm::ceil(lo / params.h - 1e-9) as i64, libm::floor(hi / params.h + 1e-9) as i64)
        })
        .collect();
    let total = ranges
        .iter()
        .try_fold(1usize, |acc, (lo, hi)| acc.checked_mul((hi - lo + 1).max(0) as usize))
        .filter(|&t| t <= MAX_GRID_POINTS)
        .ok_or(UniquenessError::GridTooLarge(MAX_GRID_POINTS))?;
    let mut out = Vec::with_capacity(total);
    for mut k in 0..total {
        let mut p = Vec::with_capacity(n);
        for (d, (lo, hi)) in ranges.iter().enumerate() {
            let span = (hi - lo + 1) as usize;
            p.push(params.anchor[d] + (lo + (k % span) as i64) as f64 * params.h);
            k /= span;
        }
        if window.contains(&p) {
            out.push(p);
        }
    }
    Ok(out)
}

/// Checks the two-sided `(α,h)`-net property against the grid
/// `anchor + hZ^n` inside `window`, and compares the window edge with the
/// threshold `R*`.
pub fn net_certificate(
    zprime: &[Point],
    params: &NetParams,
    order: usize,
    c: &KhovanskiConstant,
    window: &Window,
) -> Result<NetCertificate, UniquenessError> {
    params.validate()?;
    if order == 0 {
        return Err(UniquenessError::InvalidOrder);
    }
    let n = window.dimension();
    if params.anchor.len() != n || zprime.iter().any(|p| p.len() != n) {
        return Err(UniquenessError::DimensionMismatch);
    }
    let limit = params.alpha * params.h;
    let slack = 1e-12 * params.h;
    let grid = grid_in_window(params, window)?;
    let inside: Vec<&Point> = zprime.iter().filter(|p| window.contains(p)).collect();
    for z in &grid {
        let nearest = inside.iter().map(|p| distance(p, z)).fold(f64::INFINITY, f64::min);
        if nearest > limit + slack {
            return Err(UniquenessError::NotANet {
                point: z.clone(),
                from_grid: true,
                nearest,
                limit,
            });
        }
    }
    for p in &inside {
        let z: Point = (0..n)
            .map(|d| params.anchor[d] + libm::round((p[d] - params.anchor[d]) / params.h) * params.h)
            .collect();
        let nearest = distance(p, &z);
        if nearest > limit + slack {
            return Err(UniquenessError::NotANet {
                point: (*p).clone(),
                from_grid: false,
                nearest,
                limit,
            });
        }
    }
    let threshold = net_threshold(params, order, n, c);
    Ok(NetCertificate {
        verdict: if window.edge > threshold {
            Verdict::CertifiedUnique
        } else {
            Verdict::NotCertified
        },
        threshold,
        window_edge: window.edge,
        alpha: params.alpha,
        h: params.h,
        constant: c.lookup(2 * order, n),
        grid_points: grid.len(),
        set_points: inside.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowCertificate1D {
    pub order: usize,
    /// Length `D` of the shortest interval holding `2N` points.
    pub length: f64,
    /// `1/D`; shifts in `[0, ρ)` are covered by the guarantee.
    pub rho: f64,
    pub start: f64,
    pub end: f64,
    pub points: Vec<f64>,
}

/// Shortest closed interval containing `2N` consecutive points of `w`.
pub fn one_d_window(w: &[f64], order: usize) -> Result<WindowCertificate1D, UniquenessError> {
    if order == 0 {
        return Err(UniquenessError::InvalidOrder);
    }
    let mut xs: Vec<f64> = w.to_vec();
    xs.sort_by(f64::total_cmp);
    xs.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    let k = 2 * order;
    if xs.len() < k {
        return Err(UniquenessError::InsufficientPoints {
            needed: k,
            available: xs.len(),
        });
    }
    let (start, length) = (0..=xs.len() - k)
        .map(|i| (i, xs[i + k - 1] - xs[i]))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
    Ok(WindowCertificate1D {
        order,
        length,
        rho: 1.0 / length,
        start: xs[start],
        end: xs[start + k - 1],
        points: xs[start..start + k].to_vec(),
    })
}

/// Zero bound `(d − 1) + ρD/(2π)` for an exponential polynomial of order
/// `d` with frequencies of modulus at most `ρ` on an interval of length `D`.
pub fn langer_bound(d: usize, rho: f64, length: f64) -> f64 {
    (d as f64 - 1.0) + rho * length / (2.0 * PI)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkolemRow {
    pub k: u32,
    pub moment: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum SkolemSolve {
    RankDeficient { effective_order: usize },
    Solved { residual: f64 },
    Failed { message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkolemDemo {
    pub rows: Vec<SkolemRow>,
    pub even_moments_zero: bool,
    /// Standard Prony of order 2 on the even-index moments.
    pub even_grid_solve: SkolemSolve,
    pub note: String,
}

/// Moments `m_k = 1^k − (−1)^k` of the signed solution `a = (1, −1)`,
/// `x = (1, −1)` for `k = 0..=K`. Every even moment vanishes, so the zero
/// solution fits the even grid equally well.
pub fn skolem_demo(max_k: u32) -> Result<SkolemDemo, UniquenessError> {
    if max_k < 2 {
        return Err(UniquenessError::InsufficientPoints {
            needed: 3,
            available: max_k as usize + 1,
        });
    }
    let rows: Vec<SkolemRow> = (0..=max_k)
        .map(|k| SkolemRow {
            k,
            moment: 1 - if k % 2 == 0 { 1 } else { -1 },
        })
        .collect();
    let even: Vec<Complex64> = rows
        .iter()
        .filter(|r| r.k % 2 == 0)
        .map(|r| Complex64::new(r.moment as f64, 0.0))
        .collect();
    let even_moments_zero = rows.iter().filter(|r| r.k % 2 == 0).all(|r| r.moment == 0);
    let sys = StandardPronySystem {
        base: alloc::vec![0.0],
        step: alloc::vec![2.0],
        moments: even,
    };
    let even_grid_solve = match solve_standard_prony(&sys, 2) {
        Ok(sol) => SkolemSolve::Solved { residual: sol.residual },
        Err(PronyError::RankDeficient { effective_order, .. }) => SkolemSolve::RankDeficient { effective_order },
        Err(e) => SkolemSolve::Failed {
            message: format!("{e}"),
        },
    };
    Ok(SkolemDemo {
        rows,
        even_moments_zero,
        even_grid_solve,
        note: String::from(
            "the signed solution (1,1,-1,-1) and the zero solution agree on every even index; \
             the even grid is not a uniqueness set once negative nodes are allowed",
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn pts(xs: &[f64]) -> Vec<Point> {
        xs.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn covering_examples() {
        assert_eq!(covering_number(&pts(&[3.0]), 0.01).upper, 1);
        let ints: Vec<f64> = (0..10).map(f64::from).collect();
        let est = covering_number(&pts(&ints), 0.4);
        assert_eq!((est.lower, est.upper, est.exact), (10, 10, true));
        assert_eq!(covering_number(&pts(&ints), 5.0).upper, 1);
        assert_eq!(covering_number(&pts(&ints), 0.5).upper, 5);
        assert_eq!(covering_number(&[], 1.0).upper, 0);
    }

    #[test]
    fn covering_in_the_plane() {
        let grid: Vec<Point> = (0..4)
            .flat_map(|i| (0..4).map(move |j| vec![i as f64, j as f64]))
            .collect();
        let est = covering_number(&grid, 0.4);
        assert_eq!((est.lower, est.upper, est.exact), (16, 16, true));
        let est = covering_number(&grid, 0.8);
        assert!(est.lower <= est.upper);
    }

    #[test]
    fn entropy_bound_examples() {
        let one = KhovanskiConstant::default();
        assert_eq!(entropy_bound(4, 2, 10.0, 1.0, &one), 10.0);
        assert_eq!(entropy_bound(4, 2, 10.0, 2.0, &one), 5.0);
        let c = KhovanskiConstant::Constant { value: 3.0 };
        assert_eq!(entropy_bound(4, 1, 10.0, 0.1, &c), 3.0);
        assert_eq!(entropy_bound(4, 1, 10.0, 7.0, &c), 3.0);
    }

    #[test]
    fn constant_table_and_validation() {
        let c = KhovanskiConstant::Table {
            entries: vec![KhovanskiEntry {
                degree: 4,
                dimension: 1,
                value: 3.0,
            }],
            default: 2.0,
        };
        assert_eq!(c.lookup(4, 1), 3.0);
        assert_eq!(c.lookup(4, 2), 2.0);
        assert!(c.validate().is_ok());
        assert!(KhovanskiConstant::Constant { value: 0.5 }.validate().is_err());
    }

    #[test]
    fn span_certificate_one_dimension() {
        let c = KhovanskiConstant::Constant { value: 4.0 };
        let five = pts(&[0.5, 1.0, 1.5, 2.0, 2.5]);
        let cert = span_certificate(&five, 3.0, 2, 1, &c);
        assert_eq!(cert.verdict, Verdict::CertifiedUnique);
        assert_eq!(cert.covering_lower, 5);
        let four = pts(&[0.5, 1.0, 1.5, 2.0]);
        assert_eq!(span_certificate(&four, 3.0, 2, 1, &c).verdict, Verdict::NotCertified);
        assert_eq!(span_certificate(&[], 3.0, 2, 1, &c).verdict, Verdict::NotCertified);
    }

    #[test]
    fn net_examples() {
        let c = KhovanskiConstant::default();
        let params = NetParams {
            alpha: 0.1,
            h: 1.0,
            anchor: vec![0.0, 0.0],
        };
        let window = Window::new(vec![2.0, 2.0], 4.0).unwrap();
        let grid: Vec<Point> = (0..5)
            .flat_map(|i| (0..5).map(move |j| vec![i as f64, j as f64]))
            .collect();
        let cert = net_certificate(&grid, &params, 1, &c, &window).unwrap();
        assert_eq!(cert.grid_points, 25);
        assert_eq!(cert.verdict, Verdict::CertifiedUnique);
        assert!((cert.threshold - 1.0 / 0.8).abs() < 1e-15);

        let mut moved = grid.clone();
        moved[7][0] += 0.6;
        let p4 = NetParams { alpha: 0.4, ..params.clone() };
        assert!(matches!(
            net_certificate(&moved, &p4, 1, &c, &window),
            Err(UniquenessError::NotANet { .. })
        ));
        let tiny = NetParams { alpha: 1e-12, ..params };
        assert!((net_threshold(&tiny, 1, 2, &c) - 1.0).abs() < 1e-11);
    }

    #[test]
    fn window_examples() {
        let w: Vec<f64> = (1..=6).map(|m| m as f64 * PI).collect();
        let cert = one_d_window(&w, 1).unwrap();
        assert!((cert.length - PI).abs() < 1e-12);
        assert!((cert.rho - 1.0 / PI).abs() < 1e-12);
        assert_eq!((cert.start, cert.end), (PI, 2.0 * PI));

        let cert = one_d_window(&[-PI, PI, -2.0 * PI, 2.0 * PI], 2).unwrap();
        assert!((cert.length - 4.0 * PI).abs() < 1e-12);

        let w: Vec<f64> = (0..4).map(|m| (m as f64 + 0.5) * PI).collect();
        assert!((one_d_window(&w, 2).unwrap().length - 3.0 * PI).abs() < 1e-12);
        assert!(matches!(
            one_d_window(&w, 3),
            Err(UniquenessError::InsufficientPoints { needed: 6, available: 4 })
        ));
    }

    #[test]
    fn langer_examples() {
        assert_eq!(langer_bound(4, 0.0, 3.0), 3.0);
        assert!((langer_bound(4, 2.0, PI) - 4.0).abs() < 1e-15);
        assert!(langer_bound(4, 1.0, 6.0) < 4.0);
    }

    #[test]
    fn skolem_table() {
        let demo = skolem_demo(40).unwrap();
        assert_eq!(demo.rows[2].moment, 0);
        assert_eq!(demo.rows[3].moment, 2);
        assert_eq!(demo.rows[0].moment, 0);
        assert!(demo.even_moments_zero);
        assert_eq!(demo.even_grid_solve, SkolemSolve::RankDeficient { effective_order: 0 });
    }
}

//! Zero sets of atom transforms, decoupling sets and sample selection.
//!
//! The decoupling set of a target atom `r` is the set of frequencies where
//! every other atom's transform vanishes while atom `r`'s does not. Catalog
//! atoms have zero sets that are 1D lattices or unions of line families, so
//! the intersections are computed in closed form and then re-verified by
//! evaluating every transform at each returned point.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::point_index::PointIndex;
use crate::signal_model::{atom_ft_real, SignalAtom};
use crate::{distance, dot, lex_cmp, norm, Point};

pub const DEFAULT_ZERO_TOL: f64 = 1e-9;
pub const DEFAULT_NONZERO_TOL: f64 = 1e-6;
/// Default window edge (a cube of edge 20π centred at the origin).
pub const DEFAULT_WINDOW_EDGE: f64 = 20.0 * PI;
/// Distance tolerance for analytic membership and point identity.
pub const POINT_TOL: f64 = 1e-9;
const REFINE_SEARCH_RADIUS: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("atoms have inconsistent dimensions")]
    DimensionMismatch,
    #[error("target index {target} out of range for {k} atoms")]
    TargetOutOfRange { target: usize, k: usize },
    #[error("decoupling needs at least two atoms")]
    TooFewAtoms,
    #[error("decoupling set for atom {target} is empty inside the window")]
    EmptyDecouplingSet { target: usize },
    #[error("no sign change of the transform within the search radius")]
    NoBracket,
    #[error("requested {needed} points but only {available} are available")]
    InsufficientPoints { needed: usize, available: usize },
    #[error("no arithmetic progression of the requested length exists")]
    NoProgression,
    #[error("window edge must be positive and finite")]
    InvalidWindow,
}

/// `{ s : normal · s = offset + m · step }` for integer `m` not in `excluded`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFamily {
    pub normal: [f64; 2],
    pub offset: f64,
    pub step: f64,
    pub excluded: Vec<i64>,
}

impl LineFamily {
    fn contains(&self, s: &[f64], tol: f64) -> bool {
        let v = self.normal[0] * s[0] + self.normal[1] * s[1];
        lattice_contains(self.offset, self.step, &self.excluded, v, tol)
    }

    /// Line indices whose lines meet the window.
    fn index_range(&self, window: &Window) -> (i64, i64) {
        let c = self.normal[0] * window.center[0] + self.normal[1] * window.center[1];
        let reach = 0.5 * window.edge * (self.normal[0].abs() + self.normal[1].abs());
        (
            libm::ceil((c - reach - self.offset) / self.step) as i64,
            libm::floor((c + reach - self.offset) / self.step) as i64,
        )
    }
}

fn lattice_contains(offset: f64, step: f64, excluded: &[i64], v: f64, tol: f64) -> bool {
    let m = libm::round((v - offset) / step);
    (v - (offset + m * step)).abs() <= tol && !excluded.contains(&(m as i64))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum ZeroSetDesc {
    /// Points `offset + m · step`, `m ∉ excluded`.
    Lattice1d { offset: f64, step: f64, excluded: Vec<i64> },
    Lines2d { families: Vec<LineFamily> },
    Empty,
}

impl ZeroSetDesc {
    pub fn is_empty(&self) -> bool {
        matches!(self, ZeroSetDesc::Empty)
    }

    /// Analytic membership with an absolute tolerance scaled by `max(1, |s|)`.
    pub fn contains(&self, s: &[f64], tol: f64) -> bool {
        let tol = tol * norm(s).max(1.0);
        match self {
            ZeroSetDesc::Lattice1d { offset, step, excluded } => {
                lattice_contains(*offset, *step, excluded, s[0], tol)
            }
            ZeroSetDesc::Lines2d { families } => families.iter().any(|f| f.contains(s, tol)),
            ZeroSetDesc::Empty => false,
        }
    }
}

/// Exact zero set of a catalog atom's transform.
pub fn zero_set(atom: &SignalAtom) -> ZeroSetDesc {
    let axis = |normal: [f64; 2], b: f64| LineFamily {
        normal,
        offset: 0.0,
        step: PI / b,
        excluded: vec![0],
    };
    match *atom {
        SignalAtom::Box1d { halfwidth } => ZeroSetDesc::Lattice1d {
            offset: 0.0,
            step: PI / halfwidth,
            excluded: vec![0],
        },
        SignalAtom::DeltaPair { offset } => ZeroSetDesc::Lattice1d {
            offset: 0.5 * PI / offset,
            step: PI / offset,
            excluded: Vec::new(),
        },
        SignalAtom::Dirac | SignalAtom::Gaussian { .. } => ZeroSetDesc::Empty,
        SignalAtom::Box2d { halfwidths } => ZeroSetDesc::Lines2d {
            families: vec![axis([1.0, 0.0], halfwidths[0]), axis([0.0, 1.0], halfwidths[1])],
        },
        SignalAtom::RotatedSquare { half_diagonal: d } => {
            // zeros where d(ω ± ρ)/2 = πm, m ≠ 0; in unit-normal form the
            // spacing is 2π / (d √2)
            let h = core::f64::consts::FRAC_1_SQRT_2;
            let step = 2.0 * PI / (d * core::f64::consts::SQRT_2);
            let fam = |normal| LineFamily {
                normal,
                offset: 0.0,
                step,
                excluded: vec![0],
            };
            ZeroSetDesc::Lines2d {
                families: vec![fam([h, h]), fam([h, -h])],
            }
        }
    }
}

/// Axis-aligned cube of edge `edge` centred at `center`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub center: Point,
    pub edge: f64,
}

impl Window {
    pub fn new(center: Point, edge: f64) -> Result<Self, GeometryError> {
        if !(edge.is_finite() && edge > 0.0) || center.iter().any(|c| !c.is_finite()) {
            return Err(GeometryError::InvalidWindow);
        }
        Ok(Self { center, edge })
    }

    /// Cube of the given edge centred at the origin.
    pub fn centered(dimension: usize, edge: f64) -> Self {
        Self {
            center: vec![0.0; dimension],
            edge,
        }
    }

    pub fn dimension(&self) -> usize {
        self.center.len()
    }

    pub fn contains(&self, s: &[f64]) -> bool {
        let half = 0.5 * self.edge * (1.0 + 1e-12);
        s.len() == self.center.len() && s.iter().zip(&self.center).all(|(x, c)| (x - c).abs() <= half)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Exact,
    Numeric,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecouplingSet {
    pub target: usize,
    /// Sorted lexicographically.
    pub points: Vec<Point>,
    pub provenance: Provenance,
    pub window: Window,
    /// Closed-form candidates dropped by the numeric verification.
    pub rejected: usize,
}

/// Re-checks the membership inequalities of a point of `W_r`.
pub fn verify_decoupling_point(
    atoms: &[SignalAtom],
    target: usize,
    s: &[f64],
    zero_tol: f64,
    nonzero_tol: f64,
) -> bool {
    atoms.iter().enumerate().all(|(l, atom)| {
        let v = atom_ft_real(atom, s).abs();
        if l == target {
            v > nonzero_tol
        } else {
            v < zero_tol
        }
    })
}

fn check_atoms(atoms: &[SignalAtom], target: usize) -> Result<usize, GeometryError> {
    if atoms.len() < 2 {
        return Err(GeometryError::TooFewAtoms);
    }
    if target >= atoms.len() {
        return Err(GeometryError::TargetOutOfRange {
            target,
            k: atoms.len(),
        });
    }
    let n = atoms[0].dimension();
    if atoms.iter().any(|a| a.dimension() != n) {
        return Err(GeometryError::DimensionMismatch);
    }
    Ok(n)
}

/// Points of `W_r = (∩_{ℓ≠r} Z_ℓ) \ Z_r` inside `window`.
///
/// In 2D, `W_r` may contain whole lines (when two atoms share a zero line);
/// such components are represented by their crossings with the other lines.
pub fn decoupling_set(
    atoms: &[SignalAtom],
    r: usize,
    window: &Window,
    zero_tol: f64,
    nonzero_tol: f64,
) -> Result<DecouplingSet, GeometryError> {
    let n = check_atoms(atoms, r)?;
    if window.dimension() != n {
        return Err(GeometryError::DimensionMismatch);
    }
    let zero_sets: Vec<ZeroSetDesc> = atoms.iter().map(zero_set).collect();
    let others: Vec<usize> = (0..atoms.len()).filter(|&l| l != r).collect();
    if others.iter().any(|&l| zero_sets[l].is_empty()) {
        return Err(GeometryError::EmptyDecouplingSet { target: r });
    }

    let candidates = match n {
        1 => lattice_candidates(&zero_sets[others[0]], window),
        2 => line_crossings(others.iter().map(|&l| &zero_sets[l]), window),
        _ => return Err(GeometryError::DimensionMismatch),
    };

    let mut points = Vec::new();
    let mut rejected = 0;
    for s in candidates {
        if !window.contains(&s)
            || !others.iter().all(|&l| zero_sets[l].contains(&s, POINT_TOL))
            || zero_sets[r].contains(&s, POINT_TOL)
        {
            continue;
        }
        if verify_decoupling_point(atoms, r, &s, zero_tol, nonzero_tol) {
            points.push(s);
        } else {
            rejected += 1;
        }
    }
    if points.is_empty() {
        return Err(GeometryError::EmptyDecouplingSet { target: r });
    }
    points.sort_by(|a, b| lex_cmp(a, b));
    Ok(DecouplingSet {
        target: r,
        points,
        provenance: Provenance::Exact,
        window: window.clone(),
        rejected,
    })
}

fn lattice_candidates(z: &ZeroSetDesc, window: &Window) -> Vec<Point> {
    let ZeroSetDesc::Lattice1d { offset, step, excluded } = z else {
        return Vec::new();
    };
    let half = 0.5 * window.edge;
    let lo = libm::ceil((window.center[0] - half - offset) / step) as i64 - 1;
    let hi = libm::floor((window.center[0] + half - offset) / step) as i64 + 1;
    (lo..=hi)
        .filter(|m| !excluded.contains(m))
        .map(|m| vec![offset + m as f64 * step])
        .collect()
}

fn line_crossings<'a>(zero_sets: impl Iterator<Item = &'a ZeroSetDesc>, window: &Window) -> Vec<Point> {
    // (normal, value) per line
    let mut lines: Vec<([f64; 2], f64)> = Vec::new();
    for z in zero_sets {
        if let ZeroSetDesc::Lines2d { families } = z {
            for fam in families {
                let (lo, hi) = fam.index_range(window);
                for m in lo..=hi {
                    if !fam.excluded.contains(&m) {
                        lines.push((fam.normal, fam.offset + m as f64 * fam.step));
                    }
                }
            }
        }
    }
    let mut index = PointIndex::new(POINT_TOL);
    for (i, (n1, v1)) in lines.iter().enumerate() {
        for (n2, v2) in &lines[i + 1..] {
            let det = n1[0] * n2[1] - n1[1] * n2[0];
            if det.abs() < 1e-12 {
                continue;
            }
            let s = vec![(v1 * n2[1] - v2 * n1[1]) / det, (n1[0] * v2 - n2[0] * v1) / det];
            if window.contains(&s) {
                index.insert(s);
            }
        }
    }
    index.points().to_vec()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecouplingStatus {
    Feasible,
    /// `k > n + 1`: transversal zero hypersurfaces have empty `(k-1)`-fold
    /// intersections, so decoupling only works for special atom families.
    InfeasibleInGeneral,
    /// Some other atom has a zero-free transform.
    Infeasible,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetFeasibility {
    pub target: usize,
    pub status: DecouplingStatus,
    pub blocking_atoms: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub k: usize,
    pub n: usize,
    pub within_general_bound: bool,
    pub targets: Vec<TargetFeasibility>,
}

pub fn feasibility(atoms: &[SignalAtom], n: usize) -> FeasibilityReport {
    let k = atoms.len();
    let within = k <= n + 1;
    let empty: Vec<bool> = atoms.iter().map(|a| zero_set(a).is_empty()).collect();
    let targets = (0..k)
        .map(|r| {
            let blocking: Vec<usize> = (0..k).filter(|&l| l != r && empty[l]).collect();
            let status = if !blocking.is_empty() {
                DecouplingStatus::Infeasible
            } else if !within {
                DecouplingStatus::InfeasibleInGeneral
            } else {
                DecouplingStatus::Feasible
            };
            TargetFeasibility {
                target: r,
                status,
                blocking_atoms: blocking,
            }
        })
        .collect();
    FeasibilityReport {
        k,
        n,
        within_general_bound: within,
        targets,
    }
}

/// Refines an approximate zero of a catalog transform by bisection, along
/// `direction` for 2D atoms.
pub fn refine_zero(
    atom: &SignalAtom,
    approx: &[f64],
    direction: Option<&[f64]>,
    tol: f64,
) -> Result<Point, GeometryError> {
    let n = atom.dimension();
    if approx.len() != n {
        return Err(GeometryError::DimensionMismatch);
    }
    let dir: Point = match direction {
        Some(d) if d.len() == n && norm(d) > 0.0 => d.iter().map(|v| v / norm(d)).collect(),
        Some(_) => return Err(GeometryError::DimensionMismatch),
        None if n == 1 => vec![1.0],
        None => return Err(GeometryError::DimensionMismatch),
    };
    let at = |t: f64| -> Point { approx.iter().zip(&dir).map(|(a, d)| a + t * d).collect() };
    let g = |t: f64| atom_ft_real(atom, &at(t));

    let g0 = g(0.0);
    if g0 == 0.0 {
        return Ok(approx.to_vec());
    }
    let mut delta = 1e-6 * norm(approx).max(1.0);
    let (mut lo, mut hi) = loop {
        if delta > REFINE_SEARCH_RADIUS {
            return Err(GeometryError::NoBracket);
        }
        if g(delta).signum() != g0.signum() {
            break (0.0, delta);
        }
        if g(-delta).signum() != g0.signum() {
            break (-delta, 0.0);
        }
        delta *= 2.0;
    };
    let mut glo = g(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gm = g(mid);
        if gm == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if gm.signum() == glo.signum() {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    let t = if g(lo).abs() <= g(hi).abs() { lo } else { hi };
    if g(t).abs() < tol {
        Ok(at(t))
    } else {
        Err(GeometryError::NoBracket)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SampleSource {
    Decoupling { target: usize },
    Manual,
}

/// Lattice structure of a sample set, when it has one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SampleLayout {
    /// `frequencies[ℓ] = base + ℓ · step`.
    Progression { base: Point, step: Point },
    /// `frequencies[i + counts[0] * j] = base + i · steps[0] + j · steps[1]`.
    Grid {
        base: Point,
        steps: [Point; 2],
        counts: [usize; 2],
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub frequencies: Vec<Point>,
    pub source: SampleSource,
    pub layout: Option<SampleLayout>,
}

impl SampleSet {
    pub fn manual(frequencies: Vec<Point>) -> Self {
        Self {
            frequencies,
            source: SampleSource::Manual,
            layout: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleStrategy {
    ClosestToOrigin,
    ConsecutiveProgression,
    /// `m × m` parallelogram grid (2D only).
    Grid,
    All,
}

fn norm_then_lex(a: &[f64], b: &[f64]) -> Ordering {
    norm(a).total_cmp(&norm(b)).then_with(|| lex_cmp(a, b))
}

/// Canonical orientation: first coordinate that is not ~0 is positive.
fn canonical(h: &[f64]) -> Point {
    let scale = norm(h).max(1.0) * 1e-12;
    match h.iter().find(|v| v.abs() > scale) {
        Some(v) if *v < 0.0 => h.iter().map(|x| -x).collect(),
        _ => h.to_vec(),
    }
}

/// Distinct canonical difference vectors among the points nearest the
/// origin, shortest first.
fn candidate_steps(points: &[Point], limit: usize) -> Vec<Point> {
    let mut near: Vec<&Point> = points.iter().collect();
    near.sort_by(|a, b| norm_then_lex(a, b));
    near.truncate(48);
    let mut steps = PointIndex::new(POINT_TOL);
    for (i, a) in near.iter().enumerate() {
        for b in &near[i + 1..] {
            let d: Point = b.iter().zip(a.iter()).map(|(x, y)| x - y).collect();
            if norm(&d) > POINT_TOL {
                steps.insert(canonical(&d));
            }
        }
    }
    let mut out = steps.points().to_vec();
    out.sort_by(|a, b| norm_then_lex(a, b));
    out.truncate(limit);
    out
}

fn progression(base: &[f64], step: &[f64], m: usize) -> Vec<Point> {
    (0..m)
        .map(|l| base.iter().zip(step).map(|(b, h)| b + l as f64 * h).collect())
        .collect()
}

fn find_progression(w: &DecouplingSet, m: usize) -> Result<(Point, Point), GeometryError> {
    let index = PointIndex::from_points(&w.points, POINT_TOL);
    let steps = candidate_steps(&w.points, 64);
    let mut group_len: Option<f64> = None;
    // (base, step, positive orientation)
    let mut best: Option<(Point, Point, bool)> = None;
    for h in &steps {
        let len = norm(h);
        if let Some(gl) = group_len {
            if len > gl * (1.0 + 1e-9) {
                break;
            }
        }
        for b in &w.points {
            let members = progression(b, h, m);
            if !members.iter().all(|p| index.contains(p)) {
                continue;
            }
            // run outward from the end nearer the origin
            let last = members.last().cloned().unwrap_or_default();
            let (base, step, positive) = if norm(&last) < norm(b) * (1.0 - 1e-12) {
                (last, h.iter().map(|v| -v).collect(), false)
            } else {
                (b.clone(), h.clone(), true)
            };
            let better = match &best {
                None => true,
                Some((bb, _, bp)) => {
                    let (nb, no) = (norm(&base), norm(bb));
                    if (nb - no).abs() > 1e-12 * no.max(1.0) {
                        nb < no
                    } else if positive != *bp {
                        positive
                    } else {
                        lex_cmp(&base, bb) == Ordering::Less
                    }
                }
            };
            if better {
                best = Some((base, step, positive));
            }
            group_len = Some(len);
        }
    }
    best.map(|(b, h, _)| (b, h)).ok_or(GeometryError::NoProgression)
}

/// Largest-cell-first search for an `m1 × m2` parallelogram grid inside `w`.
pub fn choose_grid(w: &DecouplingSet, counts: [usize; 2]) -> Result<SampleSet, GeometryError> {
    let needed = counts[0] * counts[1];
    if w.points.len() < needed {
        return Err(GeometryError::InsufficientPoints {
            needed,
            available: w.points.len(),
        });
    }
    if w.window.dimension() != 2 {
        return Err(GeometryError::DimensionMismatch);
    }
    let mut index = PointIndex::new(POINT_TOL);
    // index ids back to positions in w.points (duplicates collapse)
    let mut position = Vec::with_capacity(w.points.len());
    for (k, p) in w.points.iter().enumerate() {
        if index.insert(p.clone()) {
            position.push(k);
        }
    }
    let steps = candidate_steps(&w.points, 64);
    let mut pairs: Vec<(f64, f64, usize, usize)> = Vec::new();
    for i in 0..steps.len() {
        for j in 0..steps.len() {
            if i == j {
                continue;
            }
            let (a, b) = (&steps[i], &steps[j]);
            let det = (a[0] * b[1] - a[1] * b[0]).abs();
            if det > 1e-9 * norm(a) * norm(b) {
                pairs.push((det, norm(a) + norm(b), i, j));
            }
        }
    }
    pairs.sort_by(|x, y| {
        x.0.total_cmp(&y.0)
            .then(x.1.total_cmp(&y.1))
            .then(x.2.cmp(&y.2))
            .then(x.3.cmp(&y.3))
    });
    // run[i][k]: consecutive set points starting at point k along steps[i],
    // capped at the longest side needed
    let cap = counts[0].max(counts[1]);
    let shifted = |p: &[f64], h: &[f64]| -> Point { p.iter().zip(h).map(|(a, b)| a + b).collect() };
    let mut runs: Vec<Option<Vec<usize>>> = vec![None; steps.len()];
    let mut run_along = |i: usize| -> Vec<usize> {
        runs[i]
            .get_or_insert_with(|| {
                w.points
                    .iter()
                    .map(|p| {
                        let mut len = 1;
                        let mut q = p.clone();
                        while len < cap {
                            q = shifted(&q, &steps[i]);
                            if !index.contains(&q) {
                                break;
                            }
                            len += 1;
                        }
                        len
                    })
                    .collect()
            })
            .clone()
    };
    for (_, _, i, j) in pairs {
        let (h1, h2) = (&steps[i], &steps[j]);
        let (run1, run2) = (run_along(i), run_along(j));
        let mut best: Option<(f64, Point, Vec<Point>)> = None;
        for (k, b) in w.points.iter().enumerate() {
            if run1[k] < counts[0] || run2[k] < counts[1] {
                continue;
            }
            let mut row = b.clone();
            let mut ok = true;
            for _ in 1..counts[1] {
                row = shifted(&row, h2);
                match index.find(&row) {
                    Some(id) if run1[position[id]] >= counts[0] => {}
                    _ => {
                        ok = false;
                        break;
                    }
                }
            }
            if !ok {
                continue;
            }
            let members: Vec<Point> = (0..counts[1])
                .flat_map(|jj| {
                    (0..counts[0]).map(move |ii| -> Point {
                        (0..2)
                            .map(|d| b[d] + ii as f64 * h1[d] + jj as f64 * h2[d])
                            .collect()
                    })
                })
                .collect();
            let reach = members.iter().map(|p| norm(p)).fold(0.0, f64::max);
            let better = match &best {
                None => true,
                Some((r, bb, _)) => {
                    if (reach - r).abs() > 1e-12 * r.max(1.0) {
                        reach < *r
                    } else {
                        lex_cmp(b, bb) == Ordering::Greater
                    }
                }
            };
            if better {
                best = Some((reach, b.clone(), members));
            }
        }
        if let Some((_, base, members)) = best {
            return Ok(SampleSet {
                frequencies: members,
                source: SampleSource::Decoupling { target: w.target },
                layout: Some(SampleLayout::Grid {
                    base,
                    steps: [h1.clone(), h2.clone()],
                    counts,
                }),
            });
        }
    }
    Err(GeometryError::NoProgression)
}

/// Picks `m` points of `w` according to `strategy`.
///
/// `closest_to_origin` breaks norm ties lexicographically and returns the
/// chosen points in lexicographic order. `consecutive_progression` prefers
/// the shortest step, then the progression starting nearest the origin and
/// running outward, then the positive orientation.
pub fn choose_samples(
    w: &DecouplingSet,
    m: usize,
    strategy: SampleStrategy,
) -> Result<SampleSet, GeometryError> {
    let source = SampleSource::Decoupling { target: w.target };
    let needed = if strategy == SampleStrategy::Grid { m * m } else { m };
    if strategy != SampleStrategy::All && w.points.len() < needed {
        return Err(GeometryError::InsufficientPoints {
            needed,
            available: w.points.len(),
        });
    }
    match strategy {
        SampleStrategy::All => Ok(SampleSet {
            frequencies: w.points.clone(),
            source,
            layout: None,
        }),
        SampleStrategy::ClosestToOrigin => {
            let mut pts = w.points.clone();
            pts.sort_by(|a, b| norm_then_lex(a, b));
            pts.truncate(m);
            pts.sort_by(|a, b| lex_cmp(a, b));
            Ok(SampleSet {
                frequencies: pts,
                source,
                layout: None,
            })
        }
        SampleStrategy::ConsecutiveProgression => {
            let (base, step) = find_progression(w, m)?;
            Ok(SampleSet {
                frequencies: progression(&base, &step, m),
                source,
                layout: Some(SampleLayout::Progression { base, step }),
            })
        }
        SampleStrategy::Grid => choose_grid(w, [m, m]),
    }
}

/// Whether `points` is (within `tol`) the progression `base + ℓ·step`.
pub fn is_progression(points: &[Point], base: &[f64], step: &[f64], tol: f64) -> bool {
    points.iter().enumerate().all(|(l, p)| {
        let q: Point = base.iter().zip(step).map(|(b, h)| b + l as f64 * h).collect();
        distance(p, &q) <= tol * norm(&q).max(1.0)
    })
}

/// Component of `s` along the unit vector of `h`, divided by `|h|`.
pub fn progression_coordinate(s: &[f64], h: &[f64]) -> f64 {
    dot(s, h) / dot(h, h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo_atoms() -> Vec<SignalAtom> {
        vec![
            SignalAtom::Box1d { halfwidth: 1.0 },
            SignalAtom::DeltaPair { offset: 1.0 },
        ]
    }

    fn squares() -> Vec<SignalAtom> {
        vec![
            SignalAtom::Box2d { halfwidths: [3.0, 3.0] },
            SignalAtom::Box2d { halfwidths: [5.0, 5.0] },
            SignalAtom::RotatedSquare { half_diagonal: 2.0 },
        ]
    }

    fn scalars(w: &DecouplingSet) -> Vec<f64> {
        w.points.iter().map(|p| p[0]).collect()
    }

    #[test]
    fn zero_set_descriptions() {
        match zero_set(&SignalAtom::Box2d { halfwidths: [3.0, 3.0] }) {
            ZeroSetDesc::Lines2d { families } => {
                assert_eq!(families.len(), 2);
                assert!((families[0].step - PI / 3.0).abs() < 1e-15);
                assert!(families[0].contains(&[2.0 * PI / 3.0, 0.4], 1e-12));
                assert!(!families[0].contains(&[0.0, 0.4], 1e-12));
            }
            other => panic!("unexpected {other:?}"),
        }
        let dp = zero_set(&SignalAtom::DeltaPair { offset: 1.0 });
        for m in -3..3 {
            assert!(dp.contains(&[(m as f64 + 0.5) * PI], 1e-9));
        }
        assert!(zero_set(&SignalAtom::Gaussian { width: 1.0 }).is_empty());
        assert!(zero_set(&SignalAtom::Dirac).is_empty());
    }

    #[test]
    fn described_zeros_are_numeric_zeros() {
        let atoms = [
            SignalAtom::Box1d { halfwidth: 0.7 },
            SignalAtom::DeltaPair { offset: 1.3 },
            SignalAtom::Box2d { halfwidths: [3.0, 5.0] },
            SignalAtom::RotatedSquare { half_diagonal: 2.0 },
            SignalAtom::RotatedSquare { half_diagonal: 1.0 },
        ];
        for atom in &atoms {
            match zero_set(atom) {
                ZeroSetDesc::Lattice1d { offset, step, excluded } => {
                    for m in -6i64..=6 {
                        if !excluded.contains(&m) {
                            let s = offset + m as f64 * step;
                            assert!(atom_ft_real(atom, &[s]).abs() < 1e-10);
                        }
                    }
                }
                ZeroSetDesc::Lines2d { families } => {
                    for fam in families {
                        let tangent = [-fam.normal[1], fam.normal[0]];
                        for m in [-3i64, -1, 1, 4] {
                            let v = fam.offset + m as f64 * fam.step;
                            for t in [-2.3, 0.1, 1.7] {
                                let s = [v * fam.normal[0] + t * tangent[0], v * fam.normal[1] + t * tangent[1]];
                                assert!(atom_ft_real(atom, &s).abs() < 1e-10, "{atom:?} at {s:?}");
                            }
                        }
                    }
                }
                ZeroSetDesc::Empty => unreachable!(),
            }
        }
    }

    #[test]
    fn one_d_demo_decoupling_sets() {
        let window = Window::centered(1, 20.0);
        let w_delta = decoupling_set(&demo_atoms(), 1, &window, DEFAULT_ZERO_TOL, DEFAULT_NONZERO_TOL).unwrap();
        let expected: Vec<f64> = [-3.0, -2.0, -1.0, 1.0, 2.0, 3.0].iter().map(|m| m * PI).collect();
        let got = scalars(&w_delta);
        assert_eq!(got.len(), expected.len());
        for (g, e) in got.iter().zip(&expected) {
            assert!((g - e).abs() < 1e-12);
        }
        let w_box = decoupling_set(&demo_atoms(), 0, &window, DEFAULT_ZERO_TOL, DEFAULT_NONZERO_TOL).unwrap();
        let got = scalars(&w_box);
        let expected: Vec<f64> = (-3..3).map(|m| (m as f64 + 0.5) * PI).collect();
        assert_eq!(got.len(), expected.len());
        for (g, e) in got.iter().zip(&expected) {
            assert!((g - e).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_blocks_decoupling() {
        let atoms = [SignalAtom::Box1d { halfwidth: 1.0 }, SignalAtom::Gaussian { width: 1.0 }];
        let w = Window::centered(1, DEFAULT_WINDOW_EDGE);
        assert_eq!(
            decoupling_set(&atoms, 0, &w, DEFAULT_ZERO_TOL, DEFAULT_NONZERO_TOL),
            Err(GeometryError::EmptyDecouplingSet { target: 0 })
        );
        // the gaussian itself is still isolated by the box zeros
        assert!(decoupling_set(&atoms, 1, &w, DEFAULT_ZERO_TOL, DEFAULT_NONZERO_TOL).is_ok());
    }

    #[test]
    fn three_squares_sets_are_verified() {
        let atoms = squares();
        let window = Window::centered(2, 8.0 * PI);
        for r in 0..3 {
            let w = decoupling_set(&atoms, r, &window, DEFAULT_ZERO_TOL, DEFAULT_NONZERO_TOL).unwrap();
            assert!(!w.points.is_empty());
            for p in &w.points {
                for (l, a) in atoms.iter().enumerate() {
                    let v = atom_ft_real(a, p).abs();
                    if l == r {
                        assert!(v > DEFAULT_NONZERO_TOL);
                    } else {
                        assert!(v < DEFAULT_ZERO_TOL);
                    }
                }
            }
        }
        // the crossing (π/3, π/5) of the two axis squares isolates the rotated one
        let w3 = decoupling_set(&atoms, 2, &window, DEFAULT_ZERO_TOL, DEFAULT_NONZERO_TOL).unwrap();
        let idx = PointIndex::from_points(&w3.points, 1e-9);
        assert!(idx.contains(&[PI / 3.0, PI / 5.0]));
        assert!(!idx.contains(&[PI, PI]));
    }

    #[test]
    fn feasibility_flags() {
        let report = feasibility(&demo_atoms(), 1);
        assert!(report.targets.iter().all(|t| t.status == DecouplingStatus::Feasible));
        let three = [
            SignalAtom::Box1d { halfwidth: 1.0 },
            SignalAtom::DeltaPair { offset: 1.0 },
            SignalAtom::Box1d { halfwidth: 2.0 },
        ];
        let report = feasibility(&three, 1);
        assert!(!report.within_general_bound);
        assert!(report.targets.iter().all(|t| t.status == DecouplingStatus::InfeasibleInGeneral));
        let report = feasibility(&squares(), 2);
        assert!(report.targets.iter().all(|t| t.status == DecouplingStatus::Feasible));
        let with_gauss = [SignalAtom::Box1d { halfwidth: 1.0 }, SignalAtom::Gaussian { width: 1.0 }];
        let report = feasibility(&with_gauss, 1);
        assert_eq!(report.targets[0].status, DecouplingStatus::Infeasible);
        assert_eq!(report.targets[0].blocking_atoms, vec![1]);
        assert_eq!(report.targets[1].status, DecouplingStatus::Feasible);
    }

    #[test]
    fn refine_known_roots() {
        let b = SignalAtom::Box1d { halfwidth: 1.0 };
        let z = refine_zero(&b, &[3.1], None, 1e-12).unwrap();
        assert!((z[0] - PI).abs() < 1e-12);
        let d = SignalAtom::DeltaPair { offset: 1.0 };
        let z = refine_zero(&d, &[1.6], None, 1e-12).unwrap();
        assert!((z[0] - PI / 2.0).abs() < 1e-12);
        let g = SignalAtom::Gaussian { width: 1.0 };
        assert_eq!(refine_zero(&g, &[1.0], None, 1e-12), Err(GeometryError::NoBracket));
        let sq = SignalAtom::Box2d { halfwidths: [3.0, 3.0] };
        let z = refine_zero(&sq, &[1.0, 0.3], Some(&[1.0, 0.0]), 1e-12).unwrap();
        assert!((z[0] - PI / 3.0).abs() < 1e-12 && z[1] == 0.3);
    }

    fn lattice_w(edge: f64) -> DecouplingSet {
        decoupling_set(&demo_atoms(), 1, &Window::centered(1, edge), DEFAULT_ZERO_TOL, DEFAULT_NONZERO_TOL)
            .unwrap()
    }

    #[test]
    fn sample_strategies() {
        let w = lattice_w(10.0 * PI);
        let s = choose_samples(&w, 4, SampleStrategy::ClosestToOrigin).unwrap();
        let got: Vec<f64> = s.frequencies.iter().map(|p| p[0] / PI).collect();
        for (g, e) in got.iter().zip([-2.0, -1.0, 1.0, 2.0]) {
            assert!((g - e).abs() < 1e-12);
        }
        let s = choose_samples(&w, 4, SampleStrategy::ConsecutiveProgression).unwrap();
        let got: Vec<f64> = s.frequencies.iter().map(|p| p[0] / PI).collect();
        for (g, e) in got.iter().zip([1.0, 2.0, 3.0, 4.0]) {
            assert!((g - e).abs() < 1e-12);
        }
        assert!(matches!(s.layout, Some(SampleLayout::Progression { .. })));
        assert_eq!(
            choose_samples(&w, 100, SampleStrategy::ClosestToOrigin),
            Err(GeometryError::InsufficientPoints { needed: 100, available: 10 })
        );
        // six points do form a progression, with step 2π
        let s = choose_samples(&w, 6, SampleStrategy::ConsecutiveProgression).unwrap();
        assert!((s.frequencies[1][0] - s.frequencies[0][0] - 2.0 * PI).abs() < 1e-12);
        assert_eq!(choose_samples(&w, 7, SampleStrategy::ConsecutiveProgression), Err(GeometryError::NoProgression));
        assert_eq!(choose_samples(&w, 0, SampleStrategy::All).unwrap().frequencies.len(), 10);
    }

    #[test]
    fn grid_in_three_squares_set() {
        let atoms = squares();
        // W_1 and W_2 only hold runs of four along one direction per period
        let window = Window::centered(2, 8.0 * PI);
        for r in 0..3 {
            let w = decoupling_set(&atoms, r, &window, DEFAULT_ZERO_TOL, DEFAULT_NONZERO_TOL).unwrap();
            let s = choose_grid(&w, [4, 4]).unwrap();
            assert_eq!(s.frequencies.len(), 16);
            let idx = PointIndex::from_points(&w.points, POINT_TOL);
            assert!(s.frequencies.iter().all(|p| idx.contains(p)));
        }
    }
}

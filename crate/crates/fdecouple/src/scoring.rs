//! Matching estimated terms to ground truth.

use fdecouple_core::prony::ShiftEstimate;
use fdecouple_core::signal_model::{ShiftModel, ShiftTerm};
use fdecouple_core::{norm, Point};
use serde::{Deserialize, Serialize};

/// Exhaustive assignment is used up to this many terms per side.
pub const EXHAUSTIVE_LIMIT: usize = 6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermMatch {
    pub truth: usize,
    pub estimate: usize,
    pub shift_error: f64,
    /// `|a_est − a_true| / |a_true|`.
    pub amplitude_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomScore {
    pub atom: usize,
    pub matches: Vec<TermMatch>,
    pub max_shift_error: f64,
    pub max_amplitude_error: f64,
    pub unmatched_truth: usize,
    pub unmatched_estimate: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchScore {
    pub atoms: Vec<AtomScore>,
}

impl MatchScore {
    pub fn max_shift_error(&self) -> f64 {
        self.atoms.iter().map(|a| a.max_shift_error).fold(0.0, f64::max)
    }

    pub fn max_amplitude_error(&self) -> f64 {
        self.atoms.iter().map(|a| a.max_amplitude_error).fold(0.0, f64::max)
    }
}

/// Length of the shortest representative of `d` modulo the lattice spanned
/// by `basis` (empty basis: plain Euclidean length).
pub fn lattice_distance(d: &[f64], basis: &[Point]) -> f64 {
    let k = basis.len();
    if k == 0 {
        return norm(d);
    }
    // coordinates of the projection of d on span(basis) via the Gram matrix
    let gram: Vec<Vec<f64>> = basis
        .iter()
        .map(|a| basis.iter().map(|b| fdecouple_core::dot(a, b)).collect())
        .collect();
    let rhs: Vec<f64> = basis.iter().map(|b| fdecouple_core::dot(b, d)).collect();
    let coords = match solve_small(gram, rhs) {
        Some(c) => c,
        None => return norm(d),
    };
    let mut best = f64::INFINITY;
    // try floor/ceil of every coordinate; exact for orthogonal bases and a
    // close upper bound otherwise
    for mask in 0..(1usize << k) {
        let mut r: Vec<f64> = d.to_vec();
        for (i, b) in basis.iter().enumerate() {
            let c = if mask >> i & 1 == 1 { coords[i].ceil() } else { coords[i].floor() };
            for (x, y) in r.iter_mut().zip(b) {
                *x -= c * y;
            }
        }
        best = best.min(norm(&r));
    }
    best
}

fn solve_small(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for c in col..n {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

fn shift_error(truth: &ShiftTerm, est: &ShiftEstimate) -> f64 {
    let d: Vec<f64> = est.shift.iter().zip(&truth.shift).map(|(e, t)| e - t).collect();
    match &est.alias_basis {
        Some(basis) => lattice_distance(&d, basis),
        None => norm(&d),
    }
}

fn best_assignment(cost: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    let transpose = rows > cols;
    let c: Vec<Vec<f64>> = if transpose {
        (0..cols).map(|j| (0..rows).map(|i| cost[i][j]).collect()).collect()
    } else {
        cost.to_vec()
    };
    let (r, k) = (c.len(), c[0].len());
    let pairs = if r.max(k) <= EXHAUSTIVE_LIMIT {
        let mut best = (f64::INFINITY, Vec::new());
        let mut used = vec![false; k];
        let mut current = Vec::with_capacity(r);
        search(&c, 0, 0.0, &mut used, &mut current, &mut best);
        best.1.into_iter().enumerate().collect::<Vec<_>>()
    } else {
        greedy(&c)
    };
    if transpose {
        pairs.into_iter().map(|(i, j)| (j, i)).collect()
    } else {
        pairs
    }
}

fn search(
    c: &[Vec<f64>],
    row: usize,
    total: f64,
    used: &mut [bool],
    current: &mut Vec<usize>,
    best: &mut (f64, Vec<usize>),
) {
    if total >= best.0 {
        return;
    }
    if row == c.len() {
        *best = (total, current.clone());
        return;
    }
    for j in 0..used.len() {
        if !used[j] {
            used[j] = true;
            current.push(j);
            search(c, row + 1, total + c[row][j], used, current, best);
            current.pop();
            used[j] = false;
        }
    }
}

fn greedy(c: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let mut cells: Vec<(f64, usize, usize)> = c
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, &v)| (v, i, j)))
        .collect();
    cells.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut row_used = vec![false; c.len()];
    let mut col_used = vec![false; c[0].len()];
    let mut out = Vec::new();
    for (_, i, j) in cells {
        if !row_used[i] && !col_used[j] {
            row_used[i] = true;
            col_used[j] = true;
            out.push((i, j));
        }
    }
    out.sort();
    out
}

/// Scores one atom's estimates against its true terms.
pub fn score_atom(atom: usize, truth: &[ShiftTerm], estimates: &[ShiftEstimate]) -> AtomScore {
    let cost: Vec<Vec<f64>> = truth
        .iter()
        .map(|t| estimates.iter().map(|e| shift_error(t, e)).collect())
        .collect();
    let matches: Vec<TermMatch> = best_assignment(&cost)
        .into_iter()
        .map(|(i, j)| {
            let t = &truth[i];
            let e = &estimates[j];
            TermMatch {
                truth: i,
                estimate: j,
                shift_error: cost[i][j],
                amplitude_error: (e.amplitude - t.amplitude).norm() / t.amplitude.abs(),
            }
        })
        .collect();
    AtomScore {
        atom,
        max_shift_error: matches.iter().map(|m| m.shift_error).fold(0.0, f64::max),
        max_amplitude_error: matches.iter().map(|m| m.amplitude_error).fold(0.0, f64::max),
        unmatched_truth: truth.len() - matches.len(),
        unmatched_estimate: estimates.len() - matches.len(),
        matches,
    }
}

/// Optimal per-atom assignment by total shift distance (modulo the alias
/// lattice an estimate carries).
pub fn match_and_score(truth: &ShiftModel, estimates: &[Vec<ShiftEstimate>]) -> MatchScore {
    MatchScore {
        atoms: truth
            .terms
            .iter()
            .enumerate()
            .map(|(j, terms)| score_atom(j, terms, estimates.get(j).map_or(&[][..], Vec::as_slice)))
            .collect(),
    }
}

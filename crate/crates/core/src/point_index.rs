//! Tolerance-aware membership lookup for finite point sets.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::distance;

const QUANTUM: f64 = 1e-6;

/// Buckets points on a coarse grid so that "is there a stored point within
/// `tol` of `p`" costs a handful of map lookups. Requires `tol < QUANTUM`.
#[derive(Clone, Debug)]
pub struct PointIndex {
    points: Vec<Vec<f64>>,
    buckets: BTreeMap<Vec<i64>, Vec<usize>>,
    tol: f64,
}

impl PointIndex {
    pub fn new(tol: f64) -> Self {
        Self {
            points: Vec::new(),
            buckets: BTreeMap::new(),
            tol: tol.min(0.5 * QUANTUM),
        }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vec<f64>>, tol: f64) -> Self {
        let mut idx = Self::new(tol);
        for p in points {
            idx.insert(p.clone());
        }
        idx
    }

    fn key(p: &[f64]) -> Vec<i64> {
        p.iter().map(|v| libm::floor(v / QUANTUM) as i64).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// Index of a stored point within tolerance of `p`.
    pub fn find(&self, p: &[f64]) -> Option<usize> {
        let base = Self::key(p);
        let n = base.len();
        let combos = 3usize.pow(n as u32);
        let mut key = base.clone();
        for c in 0..combos {
            let mut rest = c;
            for d in 0..n {
                key[d] = base[d] + (rest % 3) as i64 - 1;
                rest /= 3;
            }
            if let Some(ids) = self.buckets.get(&key) {
                for &i in ids {
                    if distance(&self.points[i], p) <= self.tol {
                        return Some(i);
                    }
                }
            }
        }
        None
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        self.find(p).is_some()
    }

    /// Inserts `p` unless an equivalent point is present; returns whether it was new.
    pub fn insert(&mut self, p: Vec<f64>) -> bool {
        if self.contains(&p) {
            return false;
        }
        let key = Self::key(&p);
        self.buckets.entry(key).or_default().push(self.points.len());
        self.points.push(p);
        true
    }
}

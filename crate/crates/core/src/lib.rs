//! Reconstruction of linear combinations of shifted signal atoms from Fourier
//! samples by decoupling.
//!
//! Sampling at common zeros of every other atom's transform isolates one atom
//! at a time, which turns the joint reconstruction system into one
//! generalized Prony system per atom. The crate provides:
//!
//! * [`signal_model`]: the atom catalog, closed-form transforms and synthetic
//!   measurements;
//! * [`sampling_geometry`]: zero sets, decoupling sets and sample selection;
//! * [`prony`]: assembly, reduction and solution of the decoupled systems;
//! * [`uniqueness`]: window, covering-number and net certificates.
//!
//! The crate is `no_std` and only needs `alloc`.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod linalg;
pub mod point_index;
pub mod prony;
pub mod sampling_geometry;
pub mod signal_model;
pub mod uniqueness;

use alloc::vec::Vec;

pub use num_complex::Complex64;

/// A point of `R^n` (frequency, shift or sample location).
pub type Point = Vec<f64>;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

#[inline]
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// Lexicographic comparison of coordinate vectors using `total_cmp`.
pub fn lex_cmp(a: &[f64], b: &[f64]) -> core::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            core::cmp::Ordering::Equal => continue,
            other => return other,
        }
    }
    a.len().cmp(&b.len())
}

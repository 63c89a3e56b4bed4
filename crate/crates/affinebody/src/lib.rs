//! Quantum affinely-rigid bodies: spin representations, rotation-group geometry,
//! reduced Hamiltonians on the deformation invariants, the separable planar theory,
//! spectral solvers and Peter-Weyl wave-function synthesis.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod config;
pub mod error;
pub mod geometry;
pub mod hamiltonian;
pub mod peterweyl;
pub mod planar;
pub mod solver;
pub mod spin;

pub use error::{Error, Result};

// The book's chapters, compiled and run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/spin.md")]
    mod spin {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/reduced.md")]
    mod reduced {}
    #[doc = include_str!("../../../book/src/planar.md")]
    mod planar {}
    #[doc = include_str!("../../../book/src/solver.md")]
    mod solver {}
    #[doc = include_str!("../../../book/src/amplitudes.md")]
    mod amplitudes {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/acceptance.md")]
    mod acceptance {}
}

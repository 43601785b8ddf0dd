//! Manifold learning as the composition of two stages: a hierarchical
//! overlapping clustering functor that turns a finite pseudometric space into
//! a scale-indexed family of covers, and a loss stage that turns that family
//! into a pairwise embedding objective.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and
//! parallel drivers live in the companion `manifold-cli` crate.
//!
//! Module map:
//!
//! * [`metric`]: finite pseudometric spaces and index-aligned ε-isometry.
//! * [`covers`]: non-nested flag covers, hierarchical covers and memberships.
//! * [`functors`]: single/maximal linkage, `L_k`, `VL_k`, IsoCluster, FuzzySimplex.
//! * [`loss`]: parametric loss objects, fuzzy loss families, Flatten, problems.
//! * [`optimize`]: classical MDS initialization and gradient descent.
//! * [`algorithms`]: the named pipelines and arbitrary recombination.
//! * [`stability`]: interleaving distance and loss-transfer bound checks.
//! * [`dna`]: the DNA mutation-list nearest-neighbour benchmark.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod algorithms;
pub mod covers;
pub mod dna;
mod error;
pub mod functors;
pub mod graph;
pub mod loss;
mod matrix;
pub mod metric;
pub mod optimize;
pub mod quadrature;
pub mod stability;

pub use error::{Error, Result};
pub use matrix::SquareMatrix;

//! Robust recovery of a low-dimensional subspace from adversarially corrupted,
//! noisy samples.
//!
//! The main entry point is [`pipeline::ransac_plus`], a two-stage estimator: a
//! batch-doubling coarse estimate ([`stage1`]) that needs no knowledge of the
//! true dimension, followed by a spectral-gap fine estimate ([`stage2`]) on
//! the projected data. [`datagen`] draws corrupted datasets with a known
//! ground truth, [`baselines`] has classic RANSAC and oracle PCA, and
//! [`harness`] runs the experiment grids behind the `rsr` binary.

pub mod baselines;
pub mod container;
pub mod datagen;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod pipeline;
pub mod rng;
pub mod stage1;
pub mod stage2;

pub use error::{Error, Result};
pub use linalg::{subspace_distance, SubspaceBasis};
pub use pipeline::{ransac_plus, RansacPlusConfig, RecoveryResult};

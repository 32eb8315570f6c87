//! Selective learning with an abstain option under data-dependent label noise.
//!
//! The crate is organised bottom-up:
//!
//! - [`types`]: labels, feature vectors, scored hypotheses and the seeded RNG contract.
//! - [`datagen`]: noisy generative processes (discrete exact-oracle supports, Gaussian
//!   mixtures, the hard lower-bound instance), label-noise injection and CSV I/O.
//! - [`losses`]: the weighted 0-1 selector risk (empirical and exact population),
//!   the admissible `beta` interval, and the differentiable surrogates.
//! - [`models`]: finite enumerable classes, linear models and a small MLP.
//! - [`training`]: exact ERM estimators, alternating minimization and the
//!   iterative soft-abstain loop.
//! - [`eval`]: average precision, selective risk, disagreement mass, margin checks
//!   and sample-complexity sweeps.
//! - [`experiment`]: config-driven runner used by the `abstain-lab` binary.

pub mod datagen;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod losses;
pub mod models;
pub mod training;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    label_from_unit, label_to_unit, sign_decision, FeatureVector, Label, LabeledSample,
    OracleSample, Region, RngSeed, Role, ScoredHypothesis, Scorer,
};

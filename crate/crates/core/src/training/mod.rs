//! Estimators: exact ERM over finite classes, the selector ERM, the subset-ERM
//! classifier, their alternation, and the iterative soft-abstain loop.

pub mod erm;
pub mod isa;
pub mod trace;

pub use erm::*;
pub use isa::*;
pub use trace::*;

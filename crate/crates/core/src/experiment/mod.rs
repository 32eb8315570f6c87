//! Config-driven experiments: one TOML file describes the process, the method
//! and the evaluation; `run`, `gen`, `verify`, `sweep` and `report` turn it into
//! CSV and JSON artifacts.

pub mod config;
pub mod run;
pub mod verify;

pub use config::*;
pub use run::*;
pub use verify::*;

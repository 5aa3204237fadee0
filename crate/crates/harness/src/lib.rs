//! Experiment driver for the strip solver: configuration files, error
//! norms, convergence and runtime studies, snapshot export and the
//! verification suite.

pub mod config;
pub mod error;
pub mod export;
pub mod norms;
pub mod study;
pub mod verify;

pub use config::{Problem, SolverConfig};
pub use error::{HarnessError, Result};

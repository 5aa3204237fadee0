//! Independent reference computations used to validate the production solver.

pub mod banded;
pub mod cn_full;
pub mod extended;
pub mod factorized;
pub mod forms;

pub use banded::{BandLu, BandMatrix};
pub use cn_full::CnFullSolver;
pub use extended::{required_padding, run_extended_domain, ExtendedOptions, ExtendedRun};
pub use factorized::check_factorized_forms;
pub use forms::{interior_inner, kinetic_form};

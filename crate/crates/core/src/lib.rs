// Reference constants carry all printed digits; `!(x > 0.0)` style tests
// also reject NaN.
#![allow(clippy::excessive_precision, clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod gamma;
pub mod quadrature;

pub use error::{Error, Result};
pub mod cli;
pub mod grid_calculus;
pub mod inverse_solver;
pub mod level_derivative;
pub mod mittag_leffler;
pub mod power_calculus;
pub mod spectral;
pub mod verification;

// `!(a < b)` is used on purpose so that NaN inputs fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diffusion;
pub mod error;
pub mod fixed_stop;
pub mod numeric;
pub mod simulate;
pub mod specialfn;
pub mod trailing_stop;

pub use error::{AssumptionClause, Error, Result};

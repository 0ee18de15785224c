// Negated comparisons are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod czmax;
pub mod dyadic;
pub mod error;
pub mod generate;
pub mod goodlambda;
pub mod metric;
pub mod mwis;
pub mod norms;
pub mod oscillations;
pub mod report;
pub mod scalar;
pub mod selfimprove;

pub use error::{Error, Result};

//! Fisher-information bounds and estimators for locally differentially private
//! parameter estimation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channels;
pub mod combin;
pub mod error;
pub mod estimators;
pub mod fisher;
pub mod harness;
pub mod models;
pub mod oracle;
pub mod protocols;
pub mod rng;

pub use error::{Error, Result};

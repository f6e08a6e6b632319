#![allow(clippy::neg_cmp_op_on_partial_ord)] // NaN-rejecting guards

//! Chi-square goodness-of-fit testing with the binning, bin type and
//! statistic chosen against a declared alternative, together with EDF
//! competitor tests and a Monte Carlo engine for size and power studies.

pub mod binning;
pub mod distributions;
pub mod edf;
pub mod error;
pub mod estimation;
pub mod mc;
pub mod power;
pub mod rgtest;
pub mod selection;
pub mod statistic;

pub use error::{Error, Result};

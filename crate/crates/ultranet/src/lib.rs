#![allow(clippy::neg_cmp_op_on_partial_ord)] // negated comparisons also reject NaN

pub mod classify;
pub mod embedding;
pub mod error;
pub mod fourier;
mod lstsq;
pub mod microlocal;
pub mod mollifier;
pub mod net;
pub mod product;
pub mod spectral;

pub use error::{Error, Result};

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod bernstein;
pub mod convolution;
pub mod dirichlet;
pub mod error;
pub mod experiment;
pub mod group;
pub mod law;
pub mod measure;
pub mod numeric;
pub mod slowvary;

pub use error::{Error, Result};

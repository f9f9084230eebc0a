//! Gap probabilities and edge statistics of hard-edge radial random normal
//! matrix ensembles.

// negated comparisons are used on purpose so that NaN inputs are rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod gap;
pub mod limits;
pub mod modes;
pub mod potential;
pub mod quad;
pub mod sampler;
pub mod specfun;
pub mod sum;
pub mod table;

pub use error::{Error, Result};
pub use modes::{build_mode_table, EnsembleSpec, ModeTable};
pub use potential::{Droplet, Family, RadialPotential};

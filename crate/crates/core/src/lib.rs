//! Joint-measurability thresholds for lossy and noisy measurement units,
//! and key-rate upper bounds for QKD protocols under convex-combination
//! attacks.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cli;
pub mod error;
pub mod gaussian;
pub mod keyrate;
pub mod optim;
pub mod qop;
pub mod solver;

pub use error::{Error, Result};

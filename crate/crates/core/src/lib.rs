//! Normlike functions and the singularities of biextension metrics.
//!
//! The crate evaluates normlike functions, their recession functions and the
//! continuous extension of those to the closed orthant, and checks the
//! asymptotic estimates relating them. On top of that it computes height jumps
//! for test curves, Lear divisor coefficients, and the explicit metrics on the
//! Poincaré bundle that produce normlike data.

pub mod biext_metric;
pub mod cli;
pub mod error;
pub mod heightjump;
pub mod io;
pub mod normlike;
pub mod psd_linalg;
pub mod random;
pub mod report;
pub mod suite;

pub use error::{Error, Result};
pub use heightjump::{height_jump, TestCurve};
pub use normlike::{NormlikeInstance, ParamSample, RecessionForm};
pub use psd_linalg::PsdMatrix;

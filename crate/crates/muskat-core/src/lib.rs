//! Numerical lab for the one-dimensional Muskat interface equation
//!
//! f_t = ∫ (δ_h f − h f_x) / ((δ_h f)² + h²) dh,  δ_h f(x) = f(x+h) − f(x).
//!
//! The crate evolves sampled interfaces, evaluates the kernels of the slope
//! equation, builds moduli of continuity that are preserved by the flow, and
//! checks the associated inequalities on concrete runs.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod certificates;
pub mod cli;
pub mod config;
pub mod error;
pub mod evolve;
pub mod grid;
pub mod io;
pub mod modulus;
pub mod nonlocal;
pub mod quadrature;
pub mod serde_num;

pub use error::{Error, Result};

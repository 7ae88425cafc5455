//! Construction and certification of flat Littlewood polynomials.
//!
//! The pipeline builds a polynomial with `+1`/`-1` coefficients from a
//! Rudin–Shapiro cosine block, an even sine part and an odd sine part
//! chosen by a discrepancy walk, then certifies `min |P|` and `max |P|` on
//! the unit circle.

pub mod assembler;
pub mod cosine;
pub mod discrepancy;
pub mod error;
pub mod intervals;
pub mod numeric;
pub mod pipeline;
pub mod quadrature;
pub mod rs;
pub mod seed;
pub mod sine;
pub mod verifier;

pub use error::{Error, Result};

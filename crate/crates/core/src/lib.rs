//! Numerical toolkit for the two-mode optimal switching system
//!
//! ```text
//! min(-Δu¹ + f¹, u¹ - u² + ψ¹) = 0
//! min(-Δu² + f², u² - u¹ + ψ²) = 0
//! ```
//!
//! on rectangles, discretized with the five-point Laplacian. The crate
//! provides a penalized (damped Newton) solver, a minimal-solution pipeline
//! built on a projected SOR double-obstacle solver, the set decomposition of
//! a solution, blow-up diagnostics (approximating polynomials, the scaling
//! quantity `S(r)` and exponent fits), and closed-form oracles.

// `!(x > 0.0)` is used on purpose so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod closedform;
pub mod error;
pub mod expr;
pub mod grid;
pub mod io;
pub mod obstacle;
pub mod regularity;
pub mod switching;

pub use error::{Error, Result};
pub use expr::Expression;
pub use grid::{GridSpec, ScalarField};

//! Numerical spectral analysis of the inverse-square operator
//!
//! ```text
//! A = -d²/dx² + (ν² - 1/4)/x² + V(x),   0 < ν < 1,
//! ```
//!
//! its one-parameter family of self-adjoint extensions `A^θ`, the Krein
//! resolvent identity relating them, and the small-t expansion of
//! `Tr{exp(-tA^θ) - exp(-tA^∞)}` with its ν-dependent powers of t.

pub mod asymptotics;
pub mod error;
pub mod green_krein;
pub mod heattrace;
pub mod model;
pub mod numerics;
pub mod ode;
pub mod singular_ode;
pub mod specfun;
pub mod spectrum;

pub use error::{Error, Result};
pub use model::{BoundaryMode, ExtensionParam, Order, Potential, ProblemSpec, Tolerances};

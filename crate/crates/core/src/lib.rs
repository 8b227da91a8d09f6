//! Numerics for finite-time blowup of the 1-equivariant Landau-Lifshitz flow
//! near the harmonic map Q: closed-form kernels, graded radial operators,
//! approximate-profile construction, the modulation system, a radial PDE
//! solver and a battery of numerical checks.

pub mod closed_forms;
pub mod error;
pub mod exec;
pub mod flow;
pub mod grid;
pub mod modulation;
pub mod ode;
pub mod ops;
pub mod profiles;
pub mod quadrature;
pub mod verify;

pub use error::{Error, Result};
pub use exec::Exec;
pub use grid::{Parity, RadialField, RadialGrid};
pub use modulation::Coefficients;

//! Simulation and verification library for a two-phase (resting /
//! proliferating) maturity-structured cell population model with a
//! maturity-dependent division delay.
//!
//! The crate is organized around the objects the model is built from:
//!
//! * [`model`] — parameter families for the maturation velocity, division
//!   delay, daughter maturity, Hill re-entry rate and mortality profiles,
//!   with validated construction of [`model::ModelSpec`] and
//!   [`model::InitialData`].
//! * [`characteristics`] — the characteristic-curve machinery: `h`, `χ`,
//!   the commitment maturities `Θ` and `Δ`, the phase survival kernels and
//!   rates, and the finite-time propagation schedule.
//! * [`immature`] — the boundary (`m = 0`) system: initial-phase ODE,
//!   delay equation by the method of steps, Lyapunov functional, stability
//!   classification and characteristic roots.
//! * [`structured`] — the field solver for the full integrated formulation
//!   of `N(t, m)` and `P(t, m)` on a maturity grid with delayed-history
//!   interpolation.
//! * [`analysis`] — executable stability criteria, dependence and
//!   extinction experiments, and consolidated reports.
//! * [`scenarios`] — the reference scenarios and named verification suites
//!   shared by the acceptance tests and the CLI.

pub mod analysis;
pub mod characteristics;
pub mod error;
pub mod immature;
pub mod model;
pub mod numerics;
pub mod scenarios;
pub mod structured;

pub use error::{Error, Result};

//! Spectral-Galerkin solver and bound-certification harness for the 1D
//! nonlinear wave equation
//!
//! ```text
//! u_tt = (f(u) u_x)_x + g(u)      on (0, l), u(t,0) = u(t,l) = 0
//! ```
//!
//! The equation is integrated in the Dirichlet sine eigenbasis of the
//! negative Laplacian, the nonlinearity is evaluated pseudo-spectrally on an
//! oversampled grid, and every a priori energy bound the model admits
//! (Gronwall envelope, velocity envelope, comparison ODE, Bernoulli-type
//! envelope, ball radius) is derived with explicit constants and re-verified
//! on the computed trajectory.
//!
//! Crate layout:
//! - [`nonlinearity`]: the model pair (f, g), its antiderivatives and the
//!   numeric hypothesis checkers.
//! - [`spectral`]: sine eigenbasis, transforms, inverse Laplacian, norms.
//! - [`solver`]: the modal second-order ODE system and its integrators.
//! - [`energy`]: energy ledger, derived bound constants, envelope checks.
//! - [`reference`]: exact linear solutions, a finite-difference cross-check
//!   solver, and convergence studies.
//! - [`scenario`]: TOML scenario files and validation.
//! - [`cli`]: the `netflow-waves` command-line harness.

pub mod cli;
pub mod energy;
pub mod nonlinearity;
mod output;
mod quadrature;
pub mod reference;
pub mod scenario;
pub mod solver;
pub mod spectral;

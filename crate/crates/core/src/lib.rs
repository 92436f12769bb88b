//! Block-sparse signal recovery with latent optimally partitioned penalties.
//!
//! The crate solves
//!
//! ```text
//! minimize_x  f(Ax) + R(Lx)
//! ```
//!
//! where `f` is a data-fidelity term ([`prox::Fidelity`]) and `R` is one of
//! the regularizers in [`penalties::PenaltySpec`]: plain `ℓ1`, the convex
//! latent-partition `ℓ2/ℓ1` penalty (LOP), its log-sum extension (LogLOP) or
//! its adaptively weighted MCP extension (AdaLOP). Block boundaries are not
//! given; they are inferred through a latent vector `σ` whose total variation
//! is bounded by `α`.
//!
//! Modules:
//! - [`linops`]: linear operators, conjugate gradient and the tridiagonal `σ` solve.
//! - [`prox`]: proximal operators used by every ADMM sub-step.
//! - [`penalties`]: variational functions and closed-form penalty limits.
//! - [`admm`]: the ADMM solvers.
//! - [`experiments`]: synthetic generators, metrics and the trial harness.

pub mod admm;
pub mod error;
pub mod experiments;
pub mod linops;
pub mod penalties;
pub mod prox;

pub use admm::{solve, AdmmConfig, AdmmState, Init, Problem, SolveResult, Solver};
pub use error::{Error, Result};
pub use linops::LinearMap;
pub use penalties::PenaltySpec;
pub use prox::Fidelity;

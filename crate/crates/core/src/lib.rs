//! Shooting-method solver for two-point boundary value problems with
//! separated, explicit boundary conditions.
//!
//! The unknown initial values `c` are found by Newton iteration on the
//! terminal mismatch `F(c)`. The Jacobian `F'(c)` comes from one of several
//! interchangeable strategies ([`jacobian::StrategyRegistry`]): forward
//! variational equations, backward adjoint equations, or central differences.

pub mod adjoint;
pub mod bvp;
pub mod cli;
pub mod error;
pub mod examples;
pub mod jacobian;
pub mod linalg;
pub mod newton;
pub mod ode;
pub mod sensitivity;
pub mod verify;

pub use bvp::{BvProblem, Selector};
pub use error::{Error, Result};
pub use jacobian::{JacobianMode, JacobianStrategy, StrategyRegistry};
pub use linalg::Matrix;
pub use newton::{solve_bvp, SolveOptions, SolveReport};
pub use ode::{integrate, IntegratorConfig, Trajectory};

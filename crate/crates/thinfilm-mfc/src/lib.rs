//! Solver library for volatile thin-film droplet dynamics: forward solvers
//! for the lubrication gradient flow (a classical BDF2 mixed finite element
//! scheme and variational implicit steps solved by Newton or primal-dual
//! iterations) and a space-time mean field control solver that steers an
//! initial droplet profile towards a target profile.
//!
//! The runnable examples under `examples/` each demonstrate one capability;
//! the `thinfilm-mfc` binary exposes the same functionality as a batch CLI.

pub mod convergence;
pub mod error;
pub mod expr;
pub mod fem;
pub mod forward;
pub mod io;
pub mod linsolve;
pub mod mesh;
pub mod mfc;
pub mod physics;
pub mod scenario;

pub use error::{Error, Result};

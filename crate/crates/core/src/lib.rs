//! Numerics for time-fractional stochastic heat equations
//!
//! ```text
//! ∂^β_t u = -ν(-Δ)^{α/2} u + I^{1-β}_t[σ(u) Ẇ]
//! ```
//!
//! The crate covers the deterministic side (Mittag-Leffler function, the
//! inverse stable subordinator, the fundamental solution `G_t(x)` computed
//! by subordination and by spectral inversion, the power-law renewal
//! equation) and a Monte Carlo simulator of the mild form for `d = 1`,
//! `α = 2`, together with the moment, Lyapunov-exponent and front
//! estimators built on top of it.
//!
//! Everything here is `no_std` + `alloc`. File formats, the CLI and the
//! multi-threaded replica driver live in the `fracspde` crate.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod fft;
pub mod kernel;
pub mod quad;
pub mod renewal;
pub mod spde_sim;
pub mod special_fn;
pub mod stats;
pub mod subordinator;

pub use error::{Error, Result};
pub use kernel::{KernelTable, ModelParams};
pub use renewal::{Forcing, RenewalProblem, RenewalSolution};
pub use spde_sim::{Boundary, FieldEnsemble, NonlinearitySpec, SimulationSpec, SpaceTimeGrid};
pub use special_fn::MLParams;
pub use subordinator::SubordinatorParams;

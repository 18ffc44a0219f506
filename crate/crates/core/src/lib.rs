//! Distributed proximal online gradient descent (DP-OGD) over time-varying,
//! intermittently connected graphs.
//!
//! The crate is organised bottom-up:
//!
//! * [`schedule`] maps iterations to time slots (`t_{k+1} = t_k + S(k) + 2`).
//! * [`graph`] builds doubly stochastic mixing matrices and their products.
//! * [`prox`] holds the proximal operators of `σ‖·‖₁ + 1{‖·‖ ≤ R}`.
//! * [`problem`] generates the dynamic sparse-recovery stream and its oracle.
//! * [`dpogd`] runs the algorithm in slot-indexed and iteration-indexed form.
//! * [`baselines`] holds centralized proximal OGD and (slowed / cc-) ADMM.
//! * [`metrics`] computes dynamic regret, averaging errors and bound checks.
//! * [`harness`] wires configuration, experiments, CSV output and plots.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod cost;
pub mod dpogd;
pub mod error;
pub mod graph;
pub mod harness;
pub mod metrics;
pub mod problem;
pub mod prox;
pub mod schedule;

pub use error::{Error, Result};

/// Dense real vector used for iterates and error vectors.
pub type RealVector = nalgebra::DVector<f64>;
/// Dense real matrix used for measurement and mixing matrices.
pub type RealMatrix = nalgebra::DMatrix<f64>;

/// Returns `true` when every entry is finite.
pub fn all_finite(v: &RealVector) -> bool {
    v.iter().all(|x| x.is_finite())
}

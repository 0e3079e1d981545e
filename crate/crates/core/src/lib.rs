//! Simulation of triangular-array point processes built from independent,
//! non-identically distributed heavy-tailed variables, their Poisson limit on
//! `[0,1] × (0,∞]`, and the argmax / max / ladder functionals of both.
//!
//! The crate is organised bottom-up:
//!
//! - [`measures`]: weight arrays `c_{n,j}`, the discrete location measures
//!   `μ_n`, the limit location measure `μ` and the tail measure `γ`.
//! - [`tail_models`]: the family `F_i(x) = exp(-c_i x^{-α}(1 + δ_i(x)))`,
//!   exact inversion sampling and the uniform vague-convergence defect.
//! - [`point_process`]: planar configurations, the empirical process `ζ_n`,
//!   the truncated Poisson limit `ζ`, functionals and Laplace functionals.
//! - [`lab`]: seeded Monte Carlo experiments comparing simulated functionals
//!   with closed-form laws, producing [`lab::ExperimentReport`]s.
//! - [`scenario`]: the versioned TOML scenario format driving the lab.

// `!(a < b)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod lab;
pub mod measures;
pub mod point_process;
pub mod rng;
pub mod scenario;
pub mod stats;
pub mod tail_models;

pub use error::{Error, Result};

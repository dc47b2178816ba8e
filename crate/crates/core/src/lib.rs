//! Opportunistic interference alignment (OIA) for the multi-cell MIMO
//! uplink.
//!
//! Users of every cell design a transmit weight that limits the leakage
//! they cause to the interference subspaces of foreign base stations; each
//! base station schedules the users with the least leakage and separates
//! them with a zero-forcing receiver after projecting out the interference
//! subspace.
//!
//! - [`linalg`]: dense complex matrices, SVD, orthonormal bases.
//! - [`channel`]: network configuration and Rayleigh channel draws.
//! - [`oia`]: interference bases, weight design, scheduling, ZF reception.
//! - [`baselines`]: max-SNR, SIMO and interference-free references.
//! - [`theory`]: tail exponents, scaling slopes and the leading coefficient.
//! - [`harness`]: seeded Monte-Carlo sweeps, CSV output and the CLI.

// `!(x > 0.0)` is used on purpose so NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod channel;
pub mod harness;
pub mod linalg;
pub mod oia;
pub mod theory;

pub use channel::{draw_network, ChannelRealization, ConfigError, NetworkConfig};
pub use harness::sweep::{run_sweep, Execution, ExperimentKind, ExperimentSpec, ResultRow, ResultTable};
pub use harness::HarnessError;
pub use oia::{OiaError, Scheme};

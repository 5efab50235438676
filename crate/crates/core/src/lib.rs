//! Achievable-rate toolkit for multi-cell multi-user MIMO full-duplex networks.
//!
//! The crate covers the full pipeline of the analysis: system parameters and
//! large-scale profiles ([`config`], [`profile`]), channel generation
//! ([`channel`], [`topology`], [`scenario`]), MMSE training ([`estimation`]),
//! Monte Carlo ergodic rates for full-duplex and TDD systems ([`rates`]),
//! closed-form lower bounds and large-antenna asymptotics ([`bounds`]), and
//! end-to-end experiments with CSV/JSON output ([`experiments`]).
//!
//! Base stations use maximum-ratio combining on the uplink and conjugate
//! beamforming on the downlink; interference is treated as noise.

pub mod bounds;
pub mod channel;
pub mod config;
pub mod error;
pub mod estimation;
pub mod experiments;
pub mod profile;
pub mod rates;
pub mod scenario;
pub mod stats;
pub mod topology;

pub use error::{Error, Result};

/// Dense complex matrix used for every channel.
pub type CMatrix = nalgebra::DMatrix<num_complex::Complex64>;

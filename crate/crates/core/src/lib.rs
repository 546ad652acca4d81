//! Joint source precoder and relay beamformer design for multi-user MIMO
//! amplify-and-forward relaying broadcast channels with direct links.
//!
//! The solver maximizes the weighted sum-rate by alternating closed-form
//! updates of an equivalent weighted-MMSE problem (see [`wmmse`] and
//! [`driver`]). [`baselines`] holds the closed-form relay designs it is
//! compared against, and [`sim`] runs seeded Monte-Carlo sweeps over many
//! channel realizations, in parallel when the `parallel` feature is on.

pub mod baselines;
pub mod channel;
pub mod driver;
pub mod error;
pub mod numerics;
pub mod sim;
pub mod wmmse;

pub use channel::{generate_channels, snr_to_powers, ChannelSet, SystemConfig};
pub use driver::{
    run_algorithm1, run_baseline, run_scheme, Baseline, PrecoderConstraints, Scheme, SchemeOutcome, SolverOptions, SolverResult,
};
pub use error::{Error, Result};
pub use numerics::{ComplexMatrix, HpdMatrix, C64};
pub use wmmse::{DesignState, MseReport};

//! Discrete-time measurement blocks: quadrature generation, single-phase
//! synchronous frame, PLL, first-order filtering, phasor extraction and
//! symmetrical-component analysis.
//!
//! Every block is a small state machine stepped at a fixed interval. No block
//! owns shared state, so independent instances can live on different threads.

mod dq;
mod estimate;
mod lpf;
mod phasor;
mod pll;
mod sogi;

pub use dq::{alpha_beta_to_dq, dq_to_alpha_beta};
pub use estimate::{phasor_estimate, required_samples, SlidingPhasor};
pub use lpf::LpfState;
pub use phasor::{fortescue, inverse_fortescue, vuf, Phasor, SymmetricalComponents};
pub use pll::{Pll, PllConfig, PllSample, PllState};
pub use sogi::{qsg_step, QsgState};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SignalError {
    /// The positive-sequence component vanished: the network has collapsed
    /// and an unbalance ratio is meaningless.
    #[error("positive-sequence magnitude is zero; unbalance factor undefined")]
    DegeneratePositiveSequence,
    #[error("phasor window holds {samples} samples but one fundamental period needs {required}")]
    WindowTooShort { samples: usize, required: usize },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
}

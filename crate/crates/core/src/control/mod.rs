//! Control laws of the energy-storage inverter and of the voltage-controlled
//! PV inverters.
//!
//! [`mrdc`] holds the modified reverse droop chain (reactive power compensator
//! plus voltage compensator) that computes the ESS current reference,
//! [`pr`] the proportional-resonant current regulator that tracks it, and
//! [`droop`] the conventional P–ω / Q–V droop used by the grid-forming units.

pub mod droop;
pub mod mrdc;
pub mod pr;

pub use droop::{conventional_droop_step, DroopController, DroopParams};
pub use mrdc::{
    compute_p_ess, compute_ps, compute_qs, current_references, dq_to_instantaneous_current, rpc_references,
    voltage_compensator, CurrentReferences, MrdcController, MrdcFlags, MrdcMeasurements, MrdcOutput, MrdcParams,
    MrdcState, QsOutcome, QsSign,
};
pub use pr::{PrController, PrParams, ResonantTerm};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error(transparent)]
    Signal(#[from] crate::signals::SignalError),
}

pub(crate) fn require(cond: bool, name: &'static str, reason: impl Into<String>) -> Result<(), ControlError> {
    if cond {
        Ok(())
    } else {
        Err(ControlError::InvalidParameter { name, reason: reason.into() })
    }
}

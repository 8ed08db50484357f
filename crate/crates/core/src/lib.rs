//! Controllers, signal processing and an electromagnetic-transient plant for
//! studying energy-storage based unbalance compensation in islanded
//! multi-microgrids.
//!
//! The signal, control and plant layers are generic over the floating-point
//! type; the aliases below fix them to `f64`, which is what the simulation
//! runner and the metrics use.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // the negated form also rejects NaN

pub mod control;
pub mod metrics;
pub mod plant;
pub mod scalar;
pub mod scenario;
pub mod signals;
pub mod sim;

pub use scalar::Scalar;

pub type Phasor = signals::Phasor<f64>;
pub type SymmetricalComponents = signals::SymmetricalComponents<f64>;
pub type MrdcParams = control::MrdcParams<f64>;
pub type MrdcController = control::MrdcController<f64>;
pub type PrController = control::PrController<f64>;
pub type DroopController = control::DroopController<f64>;

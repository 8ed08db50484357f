//! Fixed-step electromagnetic-transient plant.
//!
//! Nodal analysis with trapezoidal companion models: every branch reduces to
//! a conductance in parallel with a history current source, the nodal matrix
//! is factorized once and each step is a pair of triangular solves.

mod inverter;
mod network;
mod topology;

pub use inverter::{AveragedInverter, InjectionOutcome, InverterCommand, InverterMode};
pub use network::{
    BranchId, BranchKind, BranchSpec, EnergyAudit, Network, NetworkDescription, NodeId, SeriesImpedance, GROUND,
};
pub use topology::{default_topology, DefaultTopology, InverterSite, TopologyParams};

use crate::scalar::Scalar;
use thiserror::Error;

/// Scalar types the plant can be instantiated with.
pub trait PlantScalar: Scalar + nalgebra::RealField {}

impl<T: Scalar + nalgebra::RealField> PlantScalar for T {}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlantError {
    #[error("branch `{branch}` references undeclared node `{node}`")]
    UnknownNode { branch: String, node: String },
    #[error("duplicate {what} name `{name}`")]
    Duplicate { what: &'static str, name: String },
    #[error("branch `{branch}`: {reason}")]
    InvalidValue { branch: String, reason: String },
    #[error("nodes without a conductive path to ground: {}", nodes.join(", "))]
    FloatingNodes { nodes: Vec<String> },
    #[error("nodal matrix is singular")]
    Singular,
    #[error("timestep must be positive and finite")]
    InvalidTimestep,
    #[error("non-finite solution at step {step}")]
    NumericFault { step: u64 },
    #[error("inverter on `{branch}`: {reason}")]
    InvalidCommand { branch: String, reason: String },
}

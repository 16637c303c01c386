//! Builders turning concrete physical systems — port-controlled Hamiltonian
//! systems, LC circuit netlists, nonholonomic systems, a spring pendulum and
//! a pendulum coupled to a free mass — into input-output structures plus
//! simulable state fields.
//!
//! Closed systems produce state fields directly. Open systems are simulable
//! only when their inputs are prescribed (a drive signal or a constant
//! force); purely open structures are returned without a field, since their
//! dynamics is underdetermined until the ports are closed.

use thiserror::Error;

use crate::error::StructureError;

mod lc;
mod nonholonomic;
mod pendulum_pair;
mod port_controlled;
mod spring_pendulum;

pub use lc::{build_lc, Branch, BranchKind, LcSystem, Netlist};
pub use nonholonomic::{build_nonholonomic, nonholonomic_particle, NonholonomicSpec, NonholonomicSystem};
pub use pendulum_pair::{build_pendulum_pair, PendulumPairSpec, PendulumPairSystem};
pub use port_controlled::{
    build_port_controlled, constant_spec, InputSignal, PortControlledSpec, PortControlledSystem,
    PortMode,
};
pub use spring_pendulum::{build_spring_pendulum, SpringPendulumSystem};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid netlist: {0}")]
    InvalidNetlist(String),

    #[error("{0} must be positive")]
    NonPositiveParameter(&'static str),

    #[error("open ports have underdetermined dynamics; interconnect them to simulate")]
    OpenPorts,

    #[error("structure matrix is not skew-symmetric at a probe state (defect {0:.3e})")]
    NonSkewStructure(f64),

    #[error(transparent)]
    Structure(#[from] StructureError),
}

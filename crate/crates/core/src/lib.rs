//! Geometric calculus of Dirac, isotropic and coisotropic structures on
//! finite-dimensional spaces, with forward/backward transfer along linear
//! maps, power-conserving interconnection of port-bearing systems, and
//! structure-preserving simulation of the resulting implicit (DAE) dynamics.
//!
//! The building blocks:
//!
//! - [`subspace`]: canonical subspace arithmetic over R^k (sums,
//!   intersections, annihilators, the flow/effort pairing orthogonal).
//! - [`dirac`]: linear structures on V ⊕ V* — classification, the two
//!   canonical Dirac constructions, the twist, and isotropic/coisotropic
//!   decompositions.
//! - [`transfer`]: pushforward and pullback of structures along linear maps,
//!   composition through an interconnecting structure, tensor products.
//! - [`iostruct`]: forward/backward input-output records, their effective
//!   structures, products and interconnection.
//! - [`dynamics`]: kernel representations and the implicit-midpoint/RK4
//!   integrators for the inclusion of (velocity, energy differential) pairs
//!   into a state-dependent structure, with energy and constraint
//!   diagnostics.
//! - [`models`]: builders for port-controlled Hamiltonian systems, LC
//!   netlists, nonholonomic systems, a spring pendulum and a coupled
//!   pendulum-mass pair.
//! - [`checks`]: seeded property batteries over random structures.
//!
//! ```
//! use nalgebra::DVector;
//! use portdirac::dirac::TwoForm;
//! use portdirac::dynamics::{kernel_rep_of, simulate, Scheme, StateField};
//! use portdirac::LinearStructure;
//!
//! // A harmonic oscillator as an implicit system: canonical structure on
//! // R^2, energy (q^2 + p^2)/2.
//! let d = LinearStructure::graph_of_form(&TwoForm::canonical_symplectic(1)).unwrap();
//! let rep = kernel_rep_of(&d).unwrap();
//! let field = StateField {
//!     n: 2,
//!     structure_at: Box::new(move |_| rep.clone()),
//!     energy: Box::new(|x| 0.5 * (x[0] * x[0] + x[1] * x[1])),
//!     gradient: Box::new(|x| x.clone()),
//!     port_extractor: None,
//! };
//! let x0 = DVector::from_column_slice(&[1.0, 0.0]);
//! let traj = simulate(&field, &x0, 0.01, 1.0, Scheme::Midpoint).unwrap();
//! assert!(traj.max_energy_drift() < 1e-10);
//! ```

pub mod checks;
pub mod dirac;
pub mod dynamics;
pub mod error;
pub mod iostruct;
pub mod linalg;
pub mod models;
pub mod policy;
pub mod subspace;
pub mod transfer;

pub use checks::{run_checks, CheckConfig, CheckReport, SuiteResult};
pub use dirac::{Bivector, LinearStructure, StructureClass, TwoForm};
pub use dynamics::{
    kernel_rep_of, power_balance, simulate, simulate_with, step, DynamicsError, KernelRep,
    PowerBalanceReport, Scheme, SolverOptions, StateField, StepResult, Trajectory,
};
pub use error::StructureError;
pub use iostruct::{IoKind, IoStructure, PortWitness};
pub use policy::{policy, set_policy, NumericPolicy};
pub use subspace::Subspace;
pub use transfer::{ComposeDims, LinearMapSpec};

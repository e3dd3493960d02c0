//! Jaynes-Cummings dynamics of a qubit coupled to a displaced thermal cavity,
//! with an entropy-based heat/work ledger and the semiclassical expansions
//! that go with it.

pub mod asymptotics;
pub mod conditional;
pub mod dynamics;
pub mod error;
pub mod fock;
pub mod scenario;
pub mod thermo;

pub use asymptotics::{ExpansionPrediction, RegimePrediction};
pub use conditional::{ConditionalProbe, ConditionalValues};
pub use dynamics::{build_propagator, decompose_thermal_branches, evolve, Branch, JointState, Propagator, Representation};
pub use error::{Error, Result};
pub use fock::{CovarianceMatrix, DensityOperator, Operator, SpaceConfig, C64};
pub use scenario::{compare, locate_extrema, oracle_deviations, write_csv, Method, RunReport, Scenario, ScenarioConfig, Simulation, CSV_COLUMNS};
pub use thermo::{HeatWork, Ledger, Snapshot, ThermoRecord};

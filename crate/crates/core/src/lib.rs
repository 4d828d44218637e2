//! Closed-loop simulation of a path-following steering controller with
//! extended high-gain observers on a nonlinear bicycle model.

pub mod controller;
pub mod error;
pub mod error_model;
pub mod metrics;
pub mod observer;
pub mod ode;
pub mod plots;
pub mod profile;
pub mod reference;
pub mod report;
pub mod runner;
pub mod scenario;
pub mod sim;
pub mod vehicle;

pub use controller::{control_law, ControlTrace, ControllerParams};
pub use error::{Error, Result};
pub use error_model::{disturbance_residual, Disturbances, NominalCoefficients, UncertaintySpec};
pub use metrics::{metrics, Metrics};
pub use observer::{ehgo_derivative, hurwitz_check, ObserverGains, ObserverState};
pub use profile::{Profile, Segment};
pub use reference::{reference_state, tracking_errors, ErrorState, ReferenceState};
pub use report::{compare, Comparison};
pub use runner::{execute, RunManifest, RunSummary, ScenarioSource, SweepAxis};
pub use scenario::Scenario;
pub use sim::{run_scenario, SimLog};
pub use vehicle::{plant_derivative, tire_lateral_forces, PlantState, VehicleParams};

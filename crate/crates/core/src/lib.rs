//! Discrete-time cellular-automaton simulator of electric-vehicle load
//! particles under aggregate control, with and without battery discharge
//! (V2G) as an extra action next to charge shifting (V1G).

pub mod cli;
pub mod controller;
pub mod error;
pub mod metrics;
pub mod persistence;
pub mod population;
pub mod targets;

pub use controller::{compare_modes, run, step, ControlConfig, ControlMode, StepReport};
pub use error::{Error, Result};
pub use metrics::{
    action_lattice, calls_at_response_level, compare_results, loop_area, summarize, trajectory,
    wavefront_concentration, Comparison, Lattice, SimResult, Summary, TrajectoryPoint,
};
pub use persistence::{
    emit_figures, export_bundle_json, export_series_csv, import_bundle_json, import_series_csv,
    RunBundle,
};
pub use population::{ActionEvent, ActionKind, Demand, ParticleSchedule, Population};
pub use targets::{constant_target, target_from_file, triangular_target, TargetProfile};

//! Lagrangian simulation of respiratory particles between people.
//!
//! Persons emit bursts of droplets (breath, speech, coughs) that are carried
//! by a superposition of simple airflow primitives, settle under gravity and
//! are absorbed by other persons' faces and hands or by the ground. Absorbed
//! viral load drives a susceptible → exposed → infectious state machine, and
//! the emitter-state → reception relation is summarized as a discrete channel
//! with its mutual information.
//!
//! ```no_run
//! use airborne_core::{run_simulation, write_outputs, Scenario};
//!
//! let report = run_simulation(&Scenario::paper_demo())?;
//! write_outputs(&report, "out")?;
//! # Ok::<(), airborne_core::Error>(())
//! ```

pub mod agents;
pub mod airflow;
pub mod collision;
pub mod emission;
pub mod error;
pub mod infometrics;
pub mod output;
pub mod physics;
pub mod rng;
pub mod scenario;
pub mod simulation;
pub mod sweep;
pub mod vec3;

pub use agents::{
    ApertureConfig, ApertureDoses, InfectionEvent, InfectionState, Person, ScriptedEvent,
    TransitionTrigger, Waypoint,
};
pub use airflow::{AirflowField, CylinderJet, FieldPrimitive};
pub use collision::{
    ground_collide, sweep_collide, Absorber, ApertureId, ApertureKind, CollisionRecord, Hit,
    SphereAbsorber,
};
pub use emission::{
    emit_burst, sample_inverse_cdf, AngleCdf, BreathingParams, BurstKey, CoughParams,
    EmissionProfile, EventKind, JetTemplate, LogNormalDist, SpeechMarkovParams, TruncatedNormal,
};
pub use error::{Error, Result};
pub use infometrics::{
    apply_countermeasure, entropy_bits, estimate_channel, infection_metrics, load_channel_file,
    mutual_information, parse_channel, ChannelCounts, CountermeasureAction, DiscreteChannel,
    InfectionMetrics,
};
pub use output::{
    density_map, load_summary_file, read_absorptions_csv, write_outputs, DensityMap, Summary,
};
pub use physics::{drag_force, step, AirProperties, ForceModel, Particle};
pub use rng::RandomStream;
pub use scenario::{load_scenario, load_scenario_file, DensityGrid, DomainBox, Scenario};
pub use simulation::{
    run_simulation, run_simulation_with_threads, Counters, PlaneCrossing, SimulationReport,
};
pub use sweep::{run_sweep, write_sweep_csv, SweepAction, SweepRow};
pub use vec3::Vec3;

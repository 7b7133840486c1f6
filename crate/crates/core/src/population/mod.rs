//! The multi-token engine and what is measured on its traces.

pub mod drift;
pub mod engine;
pub mod gw;
pub mod occupancy;
pub mod trace;
pub mod traps;

pub use drift::{block_drift, BlockPlan, BlockSummary, DriftReport, DriftRow};
pub use engine::{
    replica_rng, run, run_replicas, step, EventOrder, InitialPlacement, PopulationState, SimulationSettings,
    StepEvents, DEFAULT_Z_CAP,
};
pub use gw::{extinction_probability, gw_baseline, GwStats, OffspringLaw};
pub use occupancy::{chi_square, occupancy_check, OccupancyReport};
pub use trace::{survival_fit, EventTotals, PopulationTrace, StepRecord, SurvivalFit, TraceSummary};
pub use traps::TrapProfile;

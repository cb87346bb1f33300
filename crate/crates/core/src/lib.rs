//! Link-level Monte-Carlo simulator for RIS-assisted uplink multiplexing of
//! eMBB and URLLC traffic.
//!
//! The BS knows only the eMBB channel. It computes an eMBB-oriented RIS
//! configuration (coherent beamformer) and a URLLC-oriented one that silences
//! the eMBB UE, either by phasors rotation or by alternating-projection
//! interference nulling. The RIS switches to the latter when it detects a
//! URLLC preamble.
//!
//! - [`geometry`]: RIS layout, UE sampling, LoS and cascaded channels.
//! - [`ris`]: reflection-coefficient configurations.
//! - [`metrics`]: SNR/SINR, mutual information, outage, latency.
//! - [`schemes`]: per-trial semantics of the proposed and benchmark schemes.
//! - [`montecarlo`]: seeded batches, estimators and sweeps.
//! - [`scenario`]: scenario files, presets and CSV output for the CLI.

pub mod error;
pub mod geometry;
pub mod metrics;
pub mod montecarlo;
pub mod ris;
pub mod scenario;
pub mod schemes;
pub mod streams;

pub use error::{Error, Result};
pub use geometry::{
    ChannelRealization, Deployment, PathLossParams, Position, RisGeometry, UeRegion,
};
pub use metrics::{FrameConfig, LinkBudget, RateTargets};
pub use montecarlo::{
    run_scenario, run_sweep, Estimate, ScenarioConfig, SchemeEstimate, SweepParam, SweepPoint,
    SweepSpec,
};
pub use ris::{PartitionResult, ProjectionOutcome, ProjectionSettings, RisConfiguration};
pub use scenario::{Metric, Resolved, ResultRow, ScenarioFile};
pub use schemes::{DetectionModel, SchemeKind, TrialOutcome};

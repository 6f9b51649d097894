//! Seeded MFP replicas and the statistics computed from them.

mod analysis;
mod config;
mod noise;
mod run;

pub use analysis::{
    attainability_flag, convergence_from_terminals, convergence_probability, schedule_checks,
    strict_nash_targets, ConvergenceReport, MomentBound, ScheduleReport, Target,
};
pub use config::{
    AnalysisSection, ConfigFile, ExplorationSection, GameSection, MfpConfig, NoiseRecording,
    RunSection, ScheduleSection, ToolSection,
};
pub use noise::{
    delta_profile, delta_stat, delta_stat_truncated, last_exceedance, noise_decomposition,
    tail_from_exceedances, tail_probability, NoiseDiagnostics, NoiseRow, TailRow,
};
pub use run::{map_replicas, run, run_replica, run_replicas, NoiseSeq, RunRecord, RunState};

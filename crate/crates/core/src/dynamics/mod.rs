//! Numerical solutions of differential inclusions and the asymptotic
//! pseudotrajectory diagnostics built on them.

mod attractor;
mod schedule;
mod shadow;
mod solver;
mod trajectory;

pub use attractor::{
    calibrate_certificate, certificate_check, limit_set, AttractorSpec, Calibration,
    CalibrationOptions, Certificate,
};
pub use schedule::{ScheduleKind, StepSchedule};
pub use shadow::{apt_window_distance, d_x, window_distances, ShadowOptions};
pub use solver::{euler_solve, lambda_distance, SelectionPolicy};
pub use trajectory::{interpolate, Trajectory};

pub(crate) use schedule::last_index_at_or_before;
pub(crate) use trajectory::fmt_sig17;

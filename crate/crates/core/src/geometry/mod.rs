//! Rigid-body poses, the pinhole camera, robust PnP, and pose-error metrics.

mod camera;
mod metrics;
mod pnp;
mod se3;

pub use camera::{CameraIntrinsics, CameraModel};
pub use metrics::{
    add_error, add_s_error, rotation_angle, trajectory_metrics, MetricsReport, TrajectorySample,
    TrackStatus,
};
pub use pnp::{solve_pnp_ransac, world_rotation, Correspondence, PnpResult, RansacConfig};
pub use se3::RigidPose;

use thiserror::Error;

/// Failure modes of the geometric operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    /// Point lies on or behind the camera plane, so it has no projection.
    #[error("point has non-positive depth {0} in the camera frame")]
    NonPositiveDepth(f64),
    /// PnP needs at least four usable correspondences.
    #[error("{0} usable correspondences, need at least 4")]
    TooFewPoints(usize),
    /// RANSAC found no model satisfying the inlier ratio, or the points are degenerate.
    #[error("no consensus: {0}")]
    NoConsensus(String),
    /// Metric asked for on an empty model point set.
    #[error("model point set is empty")]
    EmptyModel,
    /// Paired trajectories disagree in length or frame alignment.
    #[error("trajectory mismatch: {0}")]
    LengthMismatch(String),
    /// Metric asked for on an empty trajectory.
    #[error("trajectory is empty")]
    EmptyTrajectory,
    /// Camera parameters fail validation.
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
}

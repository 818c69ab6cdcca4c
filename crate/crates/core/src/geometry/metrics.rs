//! Pose-error metrics over tracked trajectories.
//!
//! Everything internal stays in meters and radians; centimeters and degrees
//! appear only in the final report fields.

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::se3::quaternion_angle;
use super::{GeometryError, RigidPose};

/// Per-frame provenance of a trajectory sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackStatus {
    /// Estimated from a successful tracking step.
    Tracked,
    /// Tracking dropped out; the pose is frozen at the last good estimate.
    Lost,
    /// Simulated ground truth.
    Truth,
}

/// One timestamped pose of one object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub frame_index: u64,
    pub timestamp_ns: i64,
    pub pose: RigidPose,
    pub status: TrackStatus,
}

/// Aggregate pose-error figures for one tracked object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub translation_rmse_cm: f64,
    pub rotation_rmse_deg: f64,
    /// Percentage of frames with mean point distance under 10% of the diameter.
    pub add_pct: f64,
    /// Same threshold on the symmetry-tolerant closest-point distance.
    pub add_s_pct: f64,
    /// Percentage of frames within 5 cm and 5 degrees simultaneously.
    pub acc_5cm_5deg_pct: f64,
    pub end_translation_cm: f64,
    pub end_rotation_deg: f64,
    pub frames: usize,
}

/// Geodesic angle between two rotations, in radians.
pub fn rotation_angle(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> f64 {
    quaternion_angle(a, b)
}

/// Average distance between matched model points under the two poses.
pub fn add_error(
    est: &RigidPose,
    gt: &RigidPose,
    model_points: &[Vector3<f64>],
) -> Result<f64, GeometryError> {
    if model_points.is_empty() {
        return Err(GeometryError::EmptyModel);
    }
    let sum: f64 = model_points
        .iter()
        .map(|p| (est.transform_point(p) - gt.transform_point(p)).norm())
        .sum();
    Ok(sum / model_points.len() as f64)
}

/// Average distance from each estimated point to its closest ground-truth
/// point; insensitive to object symmetry. Never exceeds [`add_error`].
pub fn add_s_error(
    est: &RigidPose,
    gt: &RigidPose,
    model_points: &[Vector3<f64>],
) -> Result<f64, GeometryError> {
    if model_points.is_empty() {
        return Err(GeometryError::EmptyModel);
    }
    let gt_points: Vec<Vector3<f64>> = model_points.iter().map(|p| gt.transform_point(p)).collect();
    let sum: f64 = model_points
        .iter()
        .map(|p| {
            let e = est.transform_point(p);
            gt_points
                .iter()
                .map(|g| (e - g).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    Ok(sum / model_points.len() as f64)
}

/// Scores an estimated trajectory against time-aligned ground truth.
pub fn trajectory_metrics(
    est: &[TrajectorySample],
    gt: &[TrajectorySample],
    model_points: &[Vector3<f64>],
    diameter: f64,
) -> Result<MetricsReport, GeometryError> {
    if est.is_empty() || gt.is_empty() {
        return Err(GeometryError::EmptyTrajectory);
    }
    if model_points.is_empty() {
        return Err(GeometryError::EmptyModel);
    }
    if est.len() != gt.len() {
        return Err(GeometryError::LengthMismatch(format!(
            "estimate has {} frames, ground truth {}",
            est.len(),
            gt.len()
        )));
    }
    let n = est.len();
    let mut t_sq = 0.0;
    let mut r_sq = 0.0;
    let mut add_hits = 0usize;
    let mut add_s_hits = 0usize;
    let mut acc_hits = 0usize;
    let add_threshold = 0.1 * diameter;
    for (e, g) in est.iter().zip(gt) {
        if e.frame_index != g.frame_index {
            return Err(GeometryError::LengthMismatch(format!(
                "frame {} paired with frame {}",
                e.frame_index, g.frame_index
            )));
        }
        let t_err = e.pose.translation_distance_to(&g.pose);
        let r_err = e.pose.rotation_angle_to(&g.pose);
        t_sq += t_err * t_err;
        r_sq += r_err * r_err;
        if add_error(&e.pose, &g.pose, model_points)? < add_threshold {
            add_hits += 1;
        }
        if add_s_error(&e.pose, &g.pose, model_points)? < add_threshold {
            add_s_hits += 1;
        }
        if t_err < 0.05 && r_err < 5.0f64.to_radians() {
            acc_hits += 1;
        }
    }
    let last_e = est.last().unwrap();
    let last_g = gt.last().unwrap();
    Ok(MetricsReport {
        translation_rmse_cm: (t_sq / n as f64).sqrt() * 100.0,
        rotation_rmse_deg: (r_sq / n as f64).sqrt().to_degrees(),
        add_pct: 100.0 * add_hits as f64 / n as f64,
        add_s_pct: 100.0 * add_s_hits as f64 / n as f64,
        acc_5cm_5deg_pct: 100.0 * acc_hits as f64 / n as f64,
        end_translation_cm: last_e.pose.translation_distance_to(&last_g.pose) * 100.0,
        end_rotation_deg: last_e.pose.rotation_angle_to(&last_g.pose).to_degrees(),
        frames: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;
    use std::f64::consts::PI;

    const TOL: f64 = 1e-12;

    fn random_pose(rng: &mut impl Rng) -> RigidPose {
        RigidPose::new(
            UnitQuaternion::from_euler_angles(
                rng.random_range(-PI..PI),
                rng.random_range(-1.0..1.0),
                rng.random_range(-PI..PI),
            ),
            Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ),
        )
    }

    fn random_points(rng: &mut impl Rng, n: usize) -> Vec<Vector3<f64>> {
        (0..n)
            .map(|_| {
                Vector3::new(
                    rng.random_range(-0.1..0.1),
                    rng.random_range(-0.1..0.1),
                    rng.random_range(-0.1..0.1),
                )
            })
            .collect()
    }

    /// Oracle: the same metric written as explicit matrix arithmetic.
    fn add_brute(est: &RigidPose, gt: &RigidPose, pts: &[Vector3<f64>]) -> f64 {
        let re = est.rotation_matrix();
        let rg = gt.rotation_matrix();
        let mut sum = 0.0;
        for p in pts {
            let a = re * p + est.translation;
            let b = rg * p + gt.translation;
            sum += ((a.x - b.x).powi(2) + (a.y - b.y).powi(2) + (a.z - b.z).powi(2)).sqrt();
        }
        sum / pts.len() as f64
    }

    fn add_s_brute(est: &RigidPose, gt: &RigidPose, pts: &[Vector3<f64>]) -> f64 {
        let re = est.rotation_matrix();
        let rg = gt.rotation_matrix();
        let mut sum = 0.0;
        for p in pts {
            let a = re * p + est.translation;
            let mut best = f64::INFINITY;
            for q in pts {
                let b = rg * q + gt.translation;
                let d = ((a.x - b.x).powi(2) + (a.y - b.y).powi(2) + (a.z - b.z).powi(2)).sqrt();
                if d < best {
                    best = d;
                }
            }
            sum += best;
        }
        sum / pts.len() as f64
    }

    #[test]
    fn add_matches_brute_force() {
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        for _ in 0..50 {
            let est = random_pose(&mut rng);
            let gt = random_pose(&mut rng);
            let pts = random_points(&mut rng, 17);
            assert_relative_eq!(
                add_error(&est, &gt, &pts).unwrap(),
                add_brute(&est, &gt, &pts),
                epsilon = TOL
            );
            assert_relative_eq!(
                add_s_error(&est, &gt, &pts).unwrap(),
                add_s_brute(&est, &gt, &pts),
                epsilon = TOL
            );
        }
    }

    #[test]
    fn identical_poses_score_zero() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let pose = random_pose(&mut rng);
        let pts = random_points(&mut rng, 9);
        assert_eq!(add_error(&pose, &pose, &pts).unwrap(), 0.0);
        assert_eq!(add_s_error(&pose, &pose, &pts).unwrap(), 0.0);
    }

    #[test]
    fn pure_translation_add_equals_offset() {
        let gt = RigidPose::identity();
        let est = RigidPose::new(UnitQuaternion::identity(), Vector3::new(0.01, 0.0, 0.0));
        let pts = random_points(&mut ChaCha12Rng::seed_from_u64(9), 12);
        assert_relative_eq!(add_error(&est, &gt, &pts).unwrap(), 0.01, epsilon = TOL);
    }

    #[test]
    fn add_s_never_exceeds_add() {
        let mut rng = ChaCha12Rng::seed_from_u64(1000);
        for _ in 0..1000 {
            let est = random_pose(&mut rng);
            let gt = random_pose(&mut rng);
            let pts = random_points(&mut rng, 11);
            let add = add_error(&est, &gt, &pts).unwrap();
            let add_s = add_s_error(&est, &gt, &pts).unwrap();
            assert!(add_s <= add + TOL, "add_s {add_s} > add {add}");
        }
    }

    #[test]
    fn symmetric_ring_forgiven_by_add_s() {
        // Eight points on a circle about z; a half-turn maps the ring onto
        // itself, so the matched metric blows up while the closest-point
        // metric stays at zero.
        let pts: Vec<Vector3<f64>> = (0..8)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / 8.0;
                Vector3::new(0.05 * a.cos(), 0.05 * a.sin(), 0.0)
            })
            .collect();
        let gt = RigidPose::identity();
        let est = RigidPose::new(
            UnitQuaternion::from_axis_angle(&Vector3::z_axis(), PI),
            Vector3::zeros(),
        );
        let add = add_error(&est, &gt, &pts).unwrap();
        let add_s = add_s_error(&est, &gt, &pts).unwrap();
        assert!(add > 0.09, "half-turn should displace matched points, add={add}");
        assert!(add_s < 1e-12, "ring maps onto itself, add_s={add_s}");
    }

    #[test]
    fn empty_model_is_an_error() {
        let pose = RigidPose::identity();
        assert!(matches!(
            add_error(&pose, &pose, &[]),
            Err(GeometryError::EmptyModel)
        ));
        assert!(matches!(
            add_s_error(&pose, &pose, &[]),
            Err(GeometryError::EmptyModel)
        ));
    }

    fn sample(frame: u64, pose: RigidPose, status: TrackStatus) -> TrajectorySample {
        TrajectorySample {
            frame_index: frame,
            timestamp_ns: frame as i64 * 33_333_333,
            pose,
            status,
        }
    }

    #[test]
    fn perfect_trajectory_scores_perfectly() {
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        let pts = random_points(&mut rng, 10);
        let traj: Vec<TrajectorySample> = (0..20)
            .map(|k| sample(k, random_pose(&mut rng), TrackStatus::Truth))
            .collect();
        let est: Vec<TrajectorySample> = traj
            .iter()
            .map(|s| TrajectorySample {
                status: TrackStatus::Tracked,
                ..*s
            })
            .collect();
        let report = trajectory_metrics(&est, &traj, &pts, 0.2).unwrap();
        assert_eq!(report.translation_rmse_cm, 0.0);
        // The relative quaternion of two identical poses is identity only up
        // to round-off, so the angle is tiny rather than exactly zero.
        assert!(report.rotation_rmse_deg < 1e-12);
        assert_eq!(report.add_pct, 100.0);
        assert_eq!(report.add_s_pct, 100.0);
        assert_eq!(report.acc_5cm_5deg_pct, 100.0);
        assert_eq!(report.end_translation_cm, 0.0);
        assert!(report.end_rotation_deg < 1e-12);
        assert_eq!(report.frames, 20);
    }

    #[test]
    fn constant_offset_report_hand_computed() {
        // Two frames, estimate shifted 2 cm in x at every frame: the RMSE is
        // 2 cm, the end error 2 cm, and with a 10 cm diameter the 1 cm ADD
        // gate fails everywhere while 5cm5deg passes everywhere.
        let pts = vec![
            Vector3::new(0.05, 0.0, 0.0),
            Vector3::new(-0.05, 0.0, 0.0),
            Vector3::new(0.0, 0.05, 0.0),
        ];
        let gt: Vec<TrajectorySample> = (0..2)
            .map(|k| sample(k, RigidPose::identity(), TrackStatus::Truth))
            .collect();
        let est: Vec<TrajectorySample> = (0..2)
            .map(|k| {
                sample(
                    k,
                    RigidPose::new(UnitQuaternion::identity(), Vector3::new(0.02, 0.0, 0.0)),
                    TrackStatus::Tracked,
                )
            })
            .collect();
        let report = trajectory_metrics(&est, &gt, &pts, 0.1).unwrap();
        assert_relative_eq!(report.translation_rmse_cm, 2.0, epsilon = 1e-9);
        assert_eq!(report.rotation_rmse_deg, 0.0);
        assert_eq!(report.add_pct, 0.0);
        assert_eq!(report.add_s_pct, 0.0);
        assert_eq!(report.acc_5cm_5deg_pct, 100.0);
        assert_relative_eq!(report.end_translation_cm, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn mismatched_trajectories_are_rejected() {
        let pts = vec![Vector3::new(0.1, 0.0, 0.0)];
        let a = vec![sample(0, RigidPose::identity(), TrackStatus::Tracked)];
        let b = vec![
            sample(0, RigidPose::identity(), TrackStatus::Truth),
            sample(1, RigidPose::identity(), TrackStatus::Truth),
        ];
        assert!(matches!(
            trajectory_metrics(&a, &b, &pts, 0.1),
            Err(GeometryError::LengthMismatch(_))
        ));
        let c = vec![sample(5, RigidPose::identity(), TrackStatus::Truth)];
        assert!(matches!(
            trajectory_metrics(&a, &c, &pts, 0.1),
            Err(GeometryError::LengthMismatch(_))
        ));
        assert!(matches!(
            trajectory_metrics(&[], &[], &pts, 0.1),
            Err(GeometryError::EmptyTrajectory)
        ));
    }
}

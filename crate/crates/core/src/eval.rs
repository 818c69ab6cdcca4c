//! Trajectory scoring. Estimated trajectories are paired with ground truth
//! per object, aligned frame by frame (nearest timestamp, at most one frame
//! apart), and condensed into one metrics row per object plus a mean row.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{trajectory_metrics, GeometryError, MetricsReport, TrajectorySample};
use crate::scene_graph::{NodeId, SceneGraph};
use crate::tracker::TrajectoryRow;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("trajectory references object {0} absent from the ground truth or scene")]
    UnknownObject(NodeId),
    #[error("{0}")]
    LengthMismatch(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectMetrics {
    pub object_id: NodeId,
    pub label: String,
    #[serde(flatten)]
    pub report: MetricsReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub objects: Vec<ObjectMetrics>,
    pub mean: MetricsReport,
}

/// Scores `est` against `gt` over the scene's model points. Objects are
/// taken from the estimate; each must appear in both the ground truth and
/// the scene.
pub fn evaluate(
    graph: &SceneGraph,
    est: &[TrajectoryRow],
    gt: &[TrajectoryRow],
) -> Result<EvalReport, EvalError> {
    let mut est_by_object: BTreeMap<NodeId, Vec<&TrajectoryRow>> = BTreeMap::new();
    for row in est {
        est_by_object.entry(row.object_id).or_default().push(row);
    }
    let mut gt_by_object: BTreeMap<NodeId, Vec<&TrajectoryRow>> = BTreeMap::new();
    for row in gt {
        gt_by_object.entry(row.object_id).or_default().push(row);
    }
    if est_by_object.is_empty() {
        return Err(GeometryError::EmptyTrajectory.into());
    }

    let mut objects = Vec::with_capacity(est_by_object.len());
    for (object_id, est_rows) in &est_by_object {
        let node = graph
            .node(*object_id)
            .ok_or(EvalError::UnknownObject(*object_id))?;
        let gt_rows = gt_by_object
            .get(object_id)
            .ok_or(EvalError::UnknownObject(*object_id))?;

        let mut aligned_est = Vec::with_capacity(est_rows.len());
        let mut aligned_gt = Vec::with_capacity(est_rows.len());
        let by_frame: BTreeMap<u64, &TrajectoryRow> =
            gt_rows.iter().map(|r| (r.frame_index, *r)).collect();
        let max_gap = max_alignment_gap(gt_rows);
        for row in est_rows {
            let matched = match by_frame.get(&row.frame_index) {
                Some(hit) => *hit,
                None => {
                    let nearest = gt_rows
                        .iter()
                        .min_by_key(|g| (g.timestamp_ns - row.timestamp_ns).abs())
                        .unwrap();
                    if (nearest.timestamp_ns - row.timestamp_ns).abs() > max_gap {
                        return Err(EvalError::LengthMismatch(format!(
                            "object {} frame {} has no ground truth within one frame",
                            object_id, row.frame_index
                        )));
                    }
                    nearest
                }
            };
            aligned_est.push(sample_of(row));
            // Resampling puts the matched truth pose on the estimate's
            // timeline; the pairing below it must carry the same indices.
            let mut resampled = sample_of(matched);
            resampled.frame_index = row.frame_index;
            resampled.timestamp_ns = row.timestamp_ns;
            aligned_gt.push(resampled);
        }

        let report = trajectory_metrics(
            &aligned_est,
            &aligned_gt,
            node.local_points(),
            node.diameter(),
        )?;
        objects.push(ObjectMetrics {
            object_id: *object_id,
            label: node.label.clone(),
            report,
        });
    }

    Ok(EvalReport {
        mean: mean_report(objects.iter().map(|o| &o.report)),
        objects,
    })
}

fn sample_of(row: &TrajectoryRow) -> TrajectorySample {
    TrajectorySample {
        frame_index: row.frame_index,
        timestamp_ns: row.timestamp_ns,
        pose: row.pose,
        status: row.status,
    }
}

/// Largest tolerated estimate-to-truth timestamp gap: one ground-truth frame
/// period. A single-sample truth admits exact matches only.
fn max_alignment_gap(gt_rows: &[&TrajectoryRow]) -> i64 {
    let mut timestamps: Vec<i64> = gt_rows.iter().map(|r| r.timestamp_ns).collect();
    timestamps.sort_unstable();
    timestamps
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| *d > 0)
        .min()
        .unwrap_or(0)
}

fn mean_report<'a>(reports: impl Iterator<Item = &'a MetricsReport>) -> MetricsReport {
    let mut sum = MetricsReport {
        translation_rmse_cm: 0.0,
        rotation_rmse_deg: 0.0,
        add_pct: 0.0,
        add_s_pct: 0.0,
        acc_5cm_5deg_pct: 0.0,
        end_translation_cm: 0.0,
        end_rotation_deg: 0.0,
        frames: 0,
    };
    let mut count = 0usize;
    for report in reports {
        sum.translation_rmse_cm += report.translation_rmse_cm;
        sum.rotation_rmse_deg += report.rotation_rmse_deg;
        sum.add_pct += report.add_pct;
        sum.add_s_pct += report.add_s_pct;
        sum.acc_5cm_5deg_pct += report.acc_5cm_5deg_pct;
        sum.end_translation_cm += report.end_translation_cm;
        sum.end_rotation_deg += report.end_rotation_deg;
        sum.frames += report.frames;
        count += 1;
    }
    if count > 0 {
        let n = count as f64;
        sum.translation_rmse_cm /= n;
        sum.rotation_rmse_deg /= n;
        sum.add_pct /= n;
        sum.add_s_pct /= n;
        sum.acc_5cm_5deg_pct /= n;
        sum.end_translation_cm /= n;
        sum.end_rotation_deg /= n;
    }
    sum
}

impl EvalReport {
    /// Fixed-width table with one row per object and a closing mean row.
    pub fn pretty_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<20} {:>8} {:>8} {:>7} {:>7} {:>7} {:>8} {:>8} {:>7}\n",
            "object", "cm", "deg", "ADD%", "ADD-S%", "Acc5%", "end cm", "end deg", "frames"
        ));
        let row = |name: &str, r: &MetricsReport| {
            format!(
                "{:<20} {:>8.2} {:>8.2} {:>7.1} {:>7.1} {:>7.1} {:>8.2} {:>8.2} {:>7}\n",
                name,
                r.translation_rmse_cm,
                r.rotation_rmse_deg,
                r.add_pct,
                r.add_s_pct,
                r.acc_5cm_5deg_pct,
                r.end_translation_cm,
                r.end_rotation_deg,
                r.frames
            )
        };
        for object in &self.objects {
            let name = format!("{} {}", object.object_id, object.label);
            out.push_str(&row(&name, &object.report));
        }
        out.push_str(&row("mean", &self.mean));
        out
    }
}

#[cfg(test)]
mod tests;

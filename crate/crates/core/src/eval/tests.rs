use super::*;

use approx::assert_relative_eq;
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::geometry::TrackStatus;
use crate::scene_graph::{NodeKind, SceneDocument, SceneNodeRecord};

const FRAME_NS: i64 = 33_333_333;

fn cloud(center: [f64; 3], seed: u64) -> Vec<[f64; 3]> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..20)
        .map(|_| {
            [
                center[0] + rng.random_range(-0.08..0.08),
                center[1] + rng.random_range(-0.08..0.08),
                center[2] + rng.random_range(-0.08..0.08),
            ]
        })
        .collect()
}

fn two_object_graph() -> SceneGraph {
    let record = |id, label: &str, points| SceneNodeRecord {
        id,
        kind: NodeKind::Object,
        label: label.to_string(),
        points,
        keypoints: None,
        content_box: None,
        front_normal: None,
        part_of: None,
        parent: None,
        pose: None,
    };
    SceneGraph::from_document(SceneDocument {
        nodes: vec![
            record(1, "mug", cloud([0.0, 0.0, 0.0], 10)),
            record(2, "book", cloud([0.8, 0.0, 0.0], 11)),
        ],
    })
    .unwrap()
}

fn truth_rows(object_id: u32, frames: std::ops::Range<u64>) -> Vec<TrajectoryRow> {
    frames
        .map(|f| TrajectoryRow {
            frame_index: f,
            timestamp_ns: f as i64 * FRAME_NS,
            object_id,
            pose: crate::geometry::RigidPose::new(
                nalgebra::UnitQuaternion::identity(),
                Vector3::new(0.01 * f as f64, 0.0, 0.0),
            ),
            status: TrackStatus::Truth,
        })
        .collect()
}

fn shifted(rows: &[TrajectoryRow], offset: Vector3<f64>) -> Vec<TrajectoryRow> {
    rows.iter()
        .map(|r| TrajectoryRow {
            pose: crate::geometry::RigidPose::new(r.pose.rotation, r.pose.translation + offset),
            status: TrackStatus::Tracked,
            ..*r
        })
        .collect()
}

#[test]
fn perfect_estimate_scores_zero_error() {
    let graph = two_object_graph();
    let gt = truth_rows(1, 10..40);
    let report = evaluate(&graph, &gt, &gt).unwrap();
    assert_eq!(report.objects.len(), 1);
    let r = &report.objects[0].report;
    assert_eq!(report.objects[0].label, "mug");
    assert!(r.translation_rmse_cm < 1e-12);
    assert!(r.rotation_rmse_deg < 1e-12);
    assert_eq!(r.add_pct, 100.0);
    assert_eq!(r.add_s_pct, 100.0);
    assert_eq!(r.acc_5cm_5deg_pct, 100.0);
    assert_eq!(r.frames, 30);
    assert_eq!(report.mean.frames, 30);
    assert!(report.mean.translation_rmse_cm < 1e-12);
}

#[test]
fn constant_offset_matches_hand_arithmetic() {
    let graph = two_object_graph();
    let gt = truth_rows(1, 0..25);
    let est = shifted(&gt, Vector3::new(0.02, 0.0, 0.0));
    let report = evaluate(&graph, &est, &gt).unwrap();
    let r = &report.objects[0].report;
    assert_relative_eq!(r.translation_rmse_cm, 2.0, epsilon = 1e-9);
    assert!(r.rotation_rmse_deg < 1e-12);
    assert_relative_eq!(r.end_translation_cm, 2.0, epsilon = 1e-9);
    assert_eq!(r.acc_5cm_5deg_pct, 100.0);

    // A pure translation moves every model point by the same distance, so
    // the ADD threshold comparison reduces to 0.02 vs a tenth of the
    // diameter; ADD-S takes each point's nearest shifted neighbor instead.
    // Both recomputed here by brute force.
    let offset = Vector3::new(0.02, 0.0, 0.0);
    let points = graph.node(1).unwrap().local_points();
    let mut diameter: f64 = 0.0;
    for a in points {
        for b in points {
            diameter = diameter.max((a - b).norm());
        }
    }
    let threshold = 0.1 * diameter;
    let expected_add = if 0.02 < threshold { 100.0 } else { 0.0 };
    assert_eq!(r.add_pct, expected_add);
    let add_s: f64 = points
        .iter()
        .map(|p| {
            points
                .iter()
                .map(|q| (p + offset - q).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .sum::<f64>()
        / points.len() as f64;
    let expected_add_s = if add_s < threshold { 100.0 } else { 0.0 };
    assert_eq!(r.add_s_pct, expected_add_s);
}

#[test]
fn mean_row_averages_across_objects() {
    let graph = two_object_graph();
    let mut gt = truth_rows(1, 0..20);
    gt.extend(truth_rows(2, 5..25));
    let mut est = shifted(&truth_rows(1, 0..20), Vector3::new(0.01, 0.0, 0.0));
    est.extend(shifted(&truth_rows(2, 5..25), Vector3::new(0.0, 0.03, 0.0)));
    let report = evaluate(&graph, &est, &gt).unwrap();
    assert_eq!(report.objects.len(), 2);
    assert_relative_eq!(
        report.objects[0].report.translation_rmse_cm,
        1.0,
        epsilon = 1e-9
    );
    assert_relative_eq!(
        report.objects[1].report.translation_rmse_cm,
        3.0,
        epsilon = 1e-9
    );
    assert_relative_eq!(report.mean.translation_rmse_cm, 2.0, epsilon = 1e-9);
    assert_eq!(report.mean.frames, 40);

    let table = report.pretty_table();
    assert!(table.contains("mug"));
    assert!(table.contains("book"));
    assert!(table.lines().last().unwrap().starts_with("mean"));
}

#[test]
fn estimates_align_to_the_nearest_truth_frame() {
    let graph = two_object_graph();
    let gt = truth_rows(1, 0..20);
    // Renumber frames so no exact index matches; timestamps sit a quarter
    // frame off the truth samples.
    let est: Vec<TrajectoryRow> = gt
        .iter()
        .map(|r| TrajectoryRow {
            frame_index: r.frame_index + 1000,
            timestamp_ns: r.timestamp_ns + FRAME_NS / 4,
            status: TrackStatus::Tracked,
            ..*r
        })
        .collect();
    let report = evaluate(&graph, &est, &gt).unwrap();
    assert!(report.objects[0].report.translation_rmse_cm < 1e-12);

    // Push one estimate beyond the one-frame window and pairing must fail.
    let mut broken = est;
    broken[10].timestamp_ns += 40 * FRAME_NS;
    match evaluate(&graph, &broken, &gt) {
        Err(EvalError::LengthMismatch(msg)) => assert!(msg.contains("object 1")),
        other => panic!("expected LengthMismatch, got {other:?}"),
    }
}

#[test]
fn unknown_objects_are_rejected() {
    let graph = two_object_graph();
    let gt = truth_rows(1, 0..20);

    let mut est = gt.clone();
    for row in &mut est {
        row.object_id = 99;
    }
    assert!(matches!(
        evaluate(&graph, &est, &gt),
        Err(EvalError::UnknownObject(99))
    ));

    // Present in the scene but absent from the ground truth.
    let est = truth_rows(2, 0..20);
    assert!(matches!(
        evaluate(&graph, &est, &gt),
        Err(EvalError::UnknownObject(2))
    ));

    assert!(matches!(
        evaluate(&graph, &[], &gt),
        Err(EvalError::Geometry(GeometryError::EmptyTrajectory))
    ));
}

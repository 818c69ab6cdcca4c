use super::*;

use approx::assert_relative_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::geometry::{CameraIntrinsics, RigidPose};
use crate::scene_graph::{NodeKind, SceneDocument, SceneNodeRecord};

const FRAME_NS: i64 = 33_333_333;

fn test_camera() -> CameraModel {
    CameraModel::new(
        CameraIntrinsics::new(600.0, 600.0, 320.0, 240.0, 640, 480),
        RigidPose::identity(),
    )
}

/// Two objects: id 1 at the origin, id 2 well out of the way.
fn test_graph() -> SceneGraph {
    let node = |id, pos: [f64; 3]| SceneNodeRecord {
        id,
        kind: NodeKind::Object,
        label: "obj".to_string(),
        points: vec![pos],
        keypoints: None,
        content_box: None,
        front_normal: None,
        part_of: None,
        parent: None,
        pose: None,
    };
    SceneGraph::from_document(SceneDocument {
        nodes: vec![node(1, [0.0, 0.0, 0.0]), node(2, [10.0, 0.0, 0.0])],
    })
    .unwrap()
}

fn present(x: f64, p: f64) -> HandObservation {
    HandObservation {
        position: Some(Vector3::new(x, 0.0, 0.0)),
        interaction_prob: p,
    }
}

fn obs_left(frame: u64, step_ns: i64, left: HandObservation) -> Observation {
    Observation {
        frame_index: frame,
        timestamp_ns: frame as i64 * step_ns,
        camera: test_camera(),
        hands: Hands {
            left,
            right: HandObservation::absent(),
        },
        track_updates: Vec::new(),
    }
}

fn run_stream(frames: Vec<Observation>) -> Vec<(u64, Vec<IntervalEvent>)> {
    let graph = test_graph();
    let mut det = Detector::new(DetectorConfig::default()).unwrap();
    let mut out = Vec::new();
    for obs in frames {
        let frame = obs.frame_index;
        let events = det.push(obs, &graph).unwrap();
        if !events.is_empty() {
            out.push((frame, events));
        }
    }
    out
}

/// Approach until frame 12, interact while withdrawing through frame 39,
/// idle afterwards. The canonical scripted interval: start 12, end 40.
fn scripted_stream(x_offset: f64) -> Vec<Observation> {
    (0..=48)
        .map(|f| {
            let x = if f < 12 {
                0.5 - 0.0375 * f as f64
            } else {
                0.05 + 0.01 * (f - 12) as f64
            };
            let p = if (12..=39).contains(&f) { 0.6 } else { 0.0 };
            obs_left(f as u64, FRAME_NS, present(x + x_offset, p))
        })
        .collect()
}

#[test]
fn warmup_emits_nothing() {
    let graph = test_graph();
    let mut det = Detector::new(DetectorConfig::default()).unwrap();
    // Interacting from the very first frame; nothing can be decided until
    // the look-ahead fills.
    for f in 0..8u64 {
        let events = det
            .push(obs_left(f, FRAME_NS, present(0.05, 0.9)), &graph)
            .unwrap();
        assert!(events.is_empty(), "no decision before frame {} + 8", f);
    }
    let events = det
        .push(obs_left(8, FRAME_NS, present(0.05, 0.9)), &graph)
        .unwrap();
    assert_eq!(events.len(), 1);
    assert_eq!(events[0].frame_index, 0);
}

#[test]
fn quiet_stream_stays_quiet() {
    let frames = (0..50)
        .map(|f| obs_left(f, FRAME_NS, present(0.05, 0.0)))
        .collect();
    assert!(run_stream(frames).is_empty());
}

#[test]
fn scripted_interval_start_and_end() {
    let out = run_stream(scripted_stream(0.0));
    assert_eq!(out.len(), 2);

    // Start decided for frame 12, emitted exactly at the push of frame 20.
    let (push_frame, events) = &out[0];
    assert_eq!(*push_frame, 20);
    assert_eq!(events.len(), 1);
    let start = &events[0];
    assert_eq!(start.kind, EventKind::Start);
    assert_eq!(start.hand, Hand::Left);
    assert_eq!(start.frame_index, 12);
    assert_eq!(start.object_id, Some(1));
    assert_relative_eq!(start.hand_position.unwrap().x, 0.05);

    // End decided for frame 40, emitted at the push of frame 48.
    let (push_frame, events) = &out[1];
    assert_eq!(*push_frame, 48);
    assert_eq!(events.len(), 1);
    let end = &events[0];
    assert_eq!(end.kind, EventKind::End);
    assert_eq!(end.hand, Hand::Left);
    assert_eq!(end.frame_index, 40);
    assert_eq!(end.object_id, None);
}

#[test]
fn start_requires_proximity() {
    // Same timing, but the closest approach is 15 cm: outside tau_d.
    assert!(run_stream(scripted_stream(0.10)).is_empty());
}

#[test]
fn start_requires_lookahead_positives() {
    // Only frames 12..=15 are positive: every look-ahead count stays below
    // theta_reg, so the contact never confirms.
    let frames = (0..=30)
        .map(|f| {
            let x = if f < 12 {
                0.5 - 0.0375 * f as f64
            } else {
                0.05 + 0.01 * (f - 12) as f64
            };
            let p = if (12..=15).contains(&f) { 0.6 } else { 0.0 };
            obs_left(f as u64, FRAME_NS, present(x, p))
        })
        .collect();
    assert!(run_stream(frames).is_empty());
}

#[test]
fn start_requires_receding_hand() {
    // One look-ahead dip toward the object at frame 14 pushes the start out
    // to the dip itself: frames 12 and 13 see a closer future position.
    let frames: Vec<Observation> = (0..=48)
        .map(|f| {
            let x = if f < 12 {
                0.5 - 0.0375 * f as f64
            } else if f == 14 {
                0.04
            } else {
                0.05 + 0.01 * (f - 12) as f64
            };
            let p = if (12..=39).contains(&f) { 0.6 } else { 0.0 };
            obs_left(f as u64, FRAME_NS, present(x, p))
        })
        .collect();
    let out = run_stream(frames);
    let events: Vec<&IntervalEvent> = out.iter().flat_map(|(_, e)| e).collect();
    assert_eq!(events.len(), 2);
    assert_eq!(events[0].kind, EventKind::Start);
    assert_eq!(events[0].frame_index, 14);
    assert_eq!(events[1].kind, EventKind::End);
    assert_eq!(events[1].frame_index, 40);
}

#[test]
fn probability_at_threshold_is_negative() {
    // p_o == tau_o must not count as positive.
    let frames = (0..=48)
        .map(|f| {
            let x = if f < 12 {
                0.5 - 0.0375 * f as f64
            } else {
                0.05 + 0.01 * (f - 12) as f64
            };
            let p = if (12..=39).contains(&f) { 0.5 } else { 0.0 };
            obs_left(f as u64, FRAME_NS, present(x, p))
        })
        .collect();
    assert!(run_stream(frames).is_empty());
}

/// Build the interact-then-flicker stream for the end-rule branch tests:
/// positive through frame 19, a gap at 20, positives 21..=25, quiet after.
/// `h_step` is the per-frame displacement from frame 21 on.
fn flicker_stream(h_step: f64) -> Vec<Observation> {
    (0..=36)
        .map(|f| {
            let x = if f < 12 {
                0.5 - 0.0375 * f as f64
            } else if f <= 20 {
                0.05 + 0.01 * (f - 12) as f64
            } else {
                0.13 + h_step * (f - 20) as f64
            };
            let p = if (12..=19).contains(&f) || (21..=25).contains(&f) {
                0.6
            } else {
                0.0
            };
            obs_left(f as u64, FRAME_NS, present(x, p))
        })
        .collect()
}

#[test]
fn end_rule_steady_velocity_bridges_flicker() {
    // Five positives in the look-ahead and no velocity change: the regular
    // threshold (4) is met, so the interaction survives the gap at frame 20
    // and ends at frame 26 instead.
    let out = run_stream(flicker_stream(0.01));
    let events: Vec<&IntervalEvent> = out.iter().flat_map(|(_, e)| e).collect();
    assert_eq!(events.len(), 2);
    assert_eq!(events[0].frame_index, 12);
    assert_eq!(events[1].kind, EventKind::End);
    assert_eq!(events[1].frame_index, 26);
}

#[test]
fn end_rule_velocity_jump_raises_threshold() {
    // Same five positives, but the hand speed triples across the decision
    // point: the high threshold (6) applies and the interval ends at the
    // flicker frame itself.
    let out = run_stream(flicker_stream(0.03));
    let events: Vec<&IntervalEvent> = out.iter().flat_map(|(_, e)| e).collect();
    assert_eq!(events.len(), 2);
    assert_eq!(events[0].frame_index, 12);
    assert_eq!(events[1].kind, EventKind::End);
    assert_eq!(events[1].frame_index, 20);
}

/// Stationary grasp, then a departure at an exactly representable speed.
/// One-second timestamps keep every speed exact in floating point.
fn boundary_stream() -> Vec<Observation> {
    (0..=34)
        .map(|f| {
            let x = if f <= 20 {
                0.05
            } else {
                0.25 * (f - 20) as f64
            };
            let p = if f <= 19 || (21..=25).contains(&f) {
                0.6
            } else {
                0.0
            };
            obs_left(f as u64, 1_000_000_000, present(x, p))
        })
        .collect()
}

#[test]
fn velocity_gap_equal_to_delta_uses_regular_threshold() {
    // v_prior is exactly 0, v_post exactly 0.25 m/s. With delta_diff set to
    // that same 0.25 the gap is not strictly greater, so the regular branch
    // bridges the flicker; one ulp of slack below and the high branch ends
    // the interval immediately.
    let graph = test_graph();
    let run = |delta_diff: f64| {
        let config = DetectorConfig {
            delta_diff,
            ..DetectorConfig::default()
        };
        let mut det = Detector::new(config).unwrap();
        let mut events = Vec::new();
        for obs in boundary_stream() {
            events.extend(det.push(obs, &graph).unwrap());
        }
        events
    };

    let at_boundary = run(0.25);
    assert_eq!(at_boundary.len(), 2);
    assert_eq!(at_boundary[0].frame_index, 0);
    assert_eq!(at_boundary[1].kind, EventKind::End);
    assert_eq!(at_boundary[1].frame_index, 26);

    let below_boundary = run(0.2);
    assert_eq!(below_boundary.len(), 2);
    assert_eq!(below_boundary[1].kind, EventKind::End);
    assert_eq!(below_boundary[1].frame_index, 20);
}

#[test]
fn full_lookahead_survives_any_velocity_jump() {
    // Eight positives meet both thresholds, so even a violent speed change
    // cannot end the interval at the flicker frame.
    let frames: Vec<Observation> = (0..=40)
        .map(|f| {
            let x = if f <= 20 {
                0.05
            } else {
                0.05 + 0.5 * (f - 20) as f64
            };
            let p = if f == 20 || f >= 29 { 0.0 } else { 0.6 };
            obs_left(f as u64, FRAME_NS, present(x, p))
        })
        .collect();
    let out = run_stream(frames);
    let events: Vec<&IntervalEvent> = out.iter().flat_map(|(_, e)| e).collect();
    assert_eq!(events.len(), 2);
    assert_eq!(events[0].frame_index, 0);
    assert_eq!(events[1].kind, EventKind::End);
    assert_eq!(events[1].frame_index, 29);
}

#[test]
fn vanished_hand_ends_interval_without_position() {
    let frames: Vec<Observation> = (0..=40)
        .map(|f| {
            if f < 20 {
                obs_left(f, FRAME_NS, present(0.05, 0.9))
            } else {
                obs_left(f, FRAME_NS, HandObservation::absent())
            }
        })
        .collect();
    let out = run_stream(frames);
    let events: Vec<&IntervalEvent> = out.iter().flat_map(|(_, e)| e).collect();
    assert_eq!(events.len(), 2);
    assert_eq!(events[0].kind, EventKind::Start);
    assert_eq!(events[0].frame_index, 0);
    let end = events[1];
    assert_eq!(end.kind, EventKind::End);
    assert_eq!(end.frame_index, 20);
    assert_eq!(end.hand_position, None);
}

#[test]
fn missing_probability_without_position_is_negative() {
    // High probability but no 3D position can never be a positive
    // observation, so nothing fires.
    let frames: Vec<Observation> = (0..=30)
        .map(|f| {
            obs_left(
                f,
                FRAME_NS,
                HandObservation {
                    position: None,
                    interaction_prob: 0.95,
                },
            )
        })
        .collect();
    assert!(run_stream(frames).is_empty());
}

fn window_of(frames: &[Observation]) -> DecisionWindow<'_> {
    let mid = frames.len() - 9;
    DecisionWindow {
        prior: frames[..mid].iter().collect(),
        current: &frames[mid],
        lookahead: frames[mid + 1..].iter().collect(),
    }
}

#[test]
fn velocities_skip_pairs_with_missing_endpoints() {
    // Buffer: positions at 0,1 then a hole, then 3,4 (indices); only the
    // adjacent complete pairs contribute.
    let mut frames: Vec<Observation> = (0..17)
        .map(|f| obs_left(f, 1_000_000_000, present(0.1 * f as f64, 0.9)))
        .collect();
    frames[2].hands.left.position = None;
    frames[5].hands.left.position = None;
    let w = window_of(&frames);
    let (v_prior, v_post) = hand_velocities(&w, Hand::Left).unwrap();
    // Surviving prior pairs all advance 0.1 m in 1 s.
    assert_relative_eq!(v_prior, 0.1, epsilon = 1e-12);
    assert_relative_eq!(v_post, 0.1, epsilon = 1e-12);

    // Alternating presence leaves no adjacent pair at all.
    let mut sparse: Vec<Observation> = (0..17)
        .map(|f| obs_left(f, 1_000_000_000, present(0.1 * f as f64, 0.9)))
        .collect();
    for f in (0..8).step_by(2) {
        sparse[f].hands.left.position = None;
    }
    let w = window_of(&sparse);
    assert!(matches!(
        hand_velocities(&w, Hand::Left),
        Err(InteractionError::InsufficientSamples)
    ));
}

#[test]
fn velocities_match_direct_recomputation() {
    let mut rng = ChaCha12Rng::seed_from_u64(99);
    for _ in 0..100 {
        let mut ts = 0i64;
        let frames: Vec<Observation> = (0..17)
            .map(|f| {
                ts += rng.random_range(20_000_000..50_000_000);
                let left = if rng.random_range(0.0..1.0) < 0.8 {
                    HandObservation {
                        position: Some(Vector3::new(
                            rng.random_range(-1.0..1.0),
                            rng.random_range(-1.0..1.0),
                            rng.random_range(-1.0..1.0),
                        )),
                        interaction_prob: 0.0,
                    }
                } else {
                    HandObservation::absent()
                };
                Observation {
                    frame_index: f,
                    timestamp_ns: ts,
                    camera: test_camera(),
                    hands: Hands {
                        left,
                        right: HandObservation::absent(),
                    },
                    track_updates: Vec::new(),
                }
            })
            .collect();

        let w = window_of(&frames);
        let expect_side = |side: &[&Observation]| -> Option<f64> {
            let mut speeds = Vec::new();
            for i in 0..side.len() - 1 {
                if let (Some(a), Some(b)) = (
                    side[i].hands.left.position,
                    side[i + 1].hands.left.position,
                ) {
                    let dt = (side[i + 1].timestamp_ns - side[i].timestamp_ns) as f64 * 1e-9;
                    speeds.push((b - a).norm() / dt);
                }
            }
            if speeds.is_empty() {
                None
            } else {
                Some(speeds.iter().sum::<f64>() / speeds.len() as f64)
            }
        };
        let want_prior = expect_side(&w.prior);
        let want_post = expect_side(&w.lookahead);
        match hand_velocities(&w, Hand::Left) {
            Ok((vp, vq)) => {
                assert_eq!(Some(vp), want_prior);
                assert_eq!(Some(vq), want_post);
            }
            Err(_) => assert!(want_prior.is_none() || want_post.is_none()),
        }
    }
}

#[test]
fn thirty_fps_centimeter_steps_are_point_three() {
    let frames: Vec<Observation> = (0..17)
        .map(|f| obs_left(f, FRAME_NS, present(0.01 * f as f64, 0.9)))
        .collect();
    let w = window_of(&frames);
    let (v_prior, v_post) = hand_velocities(&w, Hand::Left).unwrap();
    assert_relative_eq!(v_prior, 0.3, max_relative = 1e-6);
    assert_relative_eq!(v_post, 0.3, max_relative = 1e-6);
}

#[test]
fn adding_positives_never_ends_a_continuing_interval() {
    // With velocities fixed, the continuation decision is monotone in the
    // look-ahead positive count, on both threshold branches.
    let config = DetectorConfig::default();
    for h_step in [0.0, 0.5] {
        let mut previous_continues = false;
        for count in 0..=8usize {
            let frames: Vec<Observation> = (0..17)
                .map(|f| {
                    let x = if f <= 8 { 0.0 } else { h_step * (f - 8) as f64 };
                    let p = if f > 8 && (f - 9) < count as u64 { 0.9 } else { 0.0 };
                    obs_left(f, 1_000_000_000, present(x, p))
                })
                .collect();
            let w = window_of(&frames);
            let continues = !detect_end(&w, &config, Hand::Left);
            assert!(
                !previous_continues || continues,
                "continue flipped to end when count rose to {count} (step {h_step})"
            );
            previous_continues = continues;
        }
        assert!(previous_continues, "full look-ahead must continue");
    }
}

#[test]
fn out_of_order_and_invalid_pushes_are_rejected() {
    let graph = test_graph();
    let mut det = Detector::new(DetectorConfig::default()).unwrap();
    det.push(obs_left(5, FRAME_NS, present(0.5, 0.0)), &graph)
        .unwrap();
    assert!(matches!(
        det.push(obs_left(5, FRAME_NS, present(0.5, 0.0)), &graph),
        Err(InteractionError::OutOfOrder { last: 5, got: 5 })
    ));
    assert!(matches!(
        det.push(obs_left(4, FRAME_NS, present(0.5, 0.0)), &graph),
        Err(InteractionError::OutOfOrder { last: 5, got: 4 })
    ));
    // Frame index advances but the clock does not.
    let mut stale = obs_left(6, FRAME_NS, present(0.5, 0.0));
    stale.timestamp_ns = 5 * FRAME_NS;
    assert!(matches!(
        det.push(stale, &graph),
        Err(InteractionError::InvalidObservation(_))
    ));
    let mut bad_prob = obs_left(6, FRAME_NS, present(0.5, 1.5));
    bad_prob.timestamp_ns = 6 * FRAME_NS;
    assert!(matches!(
        det.push(bad_prob, &graph),
        Err(InteractionError::InvalidObservation(_))
    ));
}

#[test]
fn config_validation_catches_bad_thresholds() {
    let ok = DetectorConfig::default();
    assert!(ok.validate().is_ok());
    let cases = [
        DetectorConfig {
            theta_high: 3,
            ..ok
        },
        DetectorConfig {
            theta_reg: 0,
            theta_high: 0,
            ..ok
        },
        DetectorConfig {
            theta_high: 9,
            ..ok
        },
        DetectorConfig { tau_o: 0.0, ..ok },
        DetectorConfig { tau_d: -0.1, ..ok },
        DetectorConfig {
            delta_diff: 0.0,
            ..ok
        },
        DetectorConfig {
            lookahead_len: 0,
            ..ok
        },
    ];
    for (i, c) in cases.iter().enumerate() {
        assert!(c.validate().is_err(), "case {i} should fail validation");
        assert!(Detector::new(*c).is_err());
    }
}

#[test]
fn approaching_hand_never_confirms_contact() {
    // Permanently positive and within range, but always creeping closer:
    // the withdrawal condition can never hold, so no start fires.
    let frames: Vec<Observation> = (0..300)
        .map(|f| obs_left(f, FRAME_NS, present(0.09 - 0.0001 * f as f64, 1.0)))
        .collect();
    assert!(run_stream(frames).is_empty());
}

#[test]
fn stationary_hand_confirms_exactly_one_start() {
    // Equal distances satisfy the withdrawal condition inclusively, and a
    // permanently positive hand never ends.
    let frames: Vec<Observation> = (0..300)
        .map(|f| obs_left(f, FRAME_NS, present(0.05, 1.0)))
        .collect();
    let out = run_stream(frames);
    let events: Vec<&IntervalEvent> = out.iter().flat_map(|(_, e)| e).collect();
    assert_eq!(events.len(), 1);
    assert_eq!(events[0].kind, EventKind::Start);
    assert_eq!(events[0].frame_index, 0);
    assert_eq!(events[0].object_id, Some(1));
}

#[test]
fn noisy_streams_alternate_and_replay_identically() {
    let graph = test_graph();
    let mut rng = ChaCha12Rng::seed_from_u64(314);
    let frames: Vec<Observation> = (0..400)
        .map(|f| {
            let wander = |rng: &mut ChaCha12Rng, base: f64| {
                if rng.random_range(0.0..1.0) < 0.9 {
                    HandObservation {
                        position: Some(Vector3::new(
                            base + rng.random_range(-0.2..0.2),
                            rng.random_range(-0.05..0.05),
                            rng.random_range(-0.05..0.05),
                        )),
                        interaction_prob: rng.random_range(0.0..1.0),
                    }
                } else {
                    HandObservation::absent()
                }
            };
            let left = wander(&mut rng, 0.08);
            let right = wander(&mut rng, 0.15);
            Observation {
                frame_index: f,
                timestamp_ns: f as i64 * FRAME_NS,
                camera: test_camera(),
                hands: Hands { left, right },
                track_updates: Vec::new(),
            }
        })
        .collect();

    let run = |frames: &[Observation]| {
        let mut det = Detector::new(DetectorConfig::default()).unwrap();
        let mut out = Vec::new();
        for obs in frames {
            let push_frame = obs.frame_index;
            for e in det.push(obs.clone(), &graph).unwrap() {
                out.push((push_frame, e));
            }
        }
        out
    };
    let first = run(&frames);
    let second = run(&frames);
    assert_eq!(first, second);

    // Every decision lands exactly eight pushes after its frame.
    for (push_frame, event) in &first {
        assert_eq!(event.frame_index + 8, *push_frame);
    }
    // Per hand: starts and ends strictly alternate, frames increase.
    for hand in Hand::BOTH {
        let mut expect = EventKind::Start;
        let mut last_frame = None;
        for (_, e) in first.iter().filter(|(_, e)| e.hand == hand) {
            assert_eq!(e.kind, expect);
            if let Some(prev) = last_frame {
                assert!(e.frame_index > prev);
            }
            last_frame = Some(e.frame_index);
            expect = match expect {
                EventKind::Start => EventKind::End,
                EventKind::End => EventKind::Start,
            };
        }
    }
}

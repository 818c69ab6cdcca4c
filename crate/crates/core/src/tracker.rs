//! Per-interaction 6DoF object tracking.
//!
//! A track is born from a detector start event: the object's designated
//! keypoints are projected into the start frame to seed 2D-3D
//! correspondences, and the grasp offset between hand and object centroid is
//! remembered in the object frame. Every following frame refreshes the 2D
//! points from the stream, solves PnP for orientation, and places the object
//! either through the hand (translation = hand + rotated grasp offset) or
//! through the PnP pose alone. Drawer tracks keep their orientation and only
//! slide along the drawer front normal.

use std::collections::VecDeque;

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    solve_pnp_ransac, Correspondence, RansacConfig, RigidPose, TrackStatus,
};
use crate::interaction::{
    Detector, DetectorConfig, EventKind, Hand, IntervalEvent, InteractionError, Observation,
};
use crate::scene_graph::{NodeId, NodeKind, SceneGraph, SceneGraphError};

#[derive(Debug, Error)]
pub enum TrackerError {
    #[error("unknown object {0}")]
    UnknownObject(NodeId),
    #[error("object {object_id} not visible: {visible} of {needed} required keypoints project into frame")]
    ObjectNotVisible {
        object_id: NodeId,
        visible: usize,
        needed: usize,
    },
    #[error("invalid event for this operation: {0}")]
    InvalidEvent(String),
    #[error("tracking lost at frame {frame}")]
    TrackingLost { frame: u64 },
    #[error("track already ended")]
    AlreadyEnded,
    #[error("invalid tracker config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Detector(#[from] InteractionError),
    #[error(transparent)]
    Graph(#[from] SceneGraphError),
}

/// Stable stream identity of one tracked keypoint: the owning node in the
/// high bits, the keypoint ordinal in the low 20. The simulator and the
/// tracker both derive ids this way, so a stream is interpretable from the
/// scene file alone.
pub fn track_id(object: NodeId, ordinal: u32) -> u64 {
    (object as u64) << 20 | ordinal as u64
}

pub fn track_id_object(id: u64) -> NodeId {
    (id >> 20) as NodeId
}

pub fn track_id_ordinal(id: u64) -> u32 {
    (id & 0xF_FFFF) as u32
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerConfig {
    pub ransac: RansacConfig,
    /// Minimum visible correspondences to attempt a pose solve.
    pub min_visible_points: usize,
    /// Translate through the hand (on) or through PnP alone (off).
    pub hand_anchor: bool,
    /// Restrict drawer motion to the front-normal axis.
    pub drawer_axis_constraint: bool,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            ransac: RansacConfig::default(),
            min_visible_points: 6,
            hand_anchor: true,
            drawer_axis_constraint: true,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<(), TrackerError> {
        if self.min_visible_points < 4 {
            return Err(TrackerError::InvalidConfig(format!(
                "min_visible_points must be at least 4, got {}",
                self.min_visible_points
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackState {
    Active,
    Lost,
    Ended,
}

#[derive(Debug, Clone)]
pub struct InteractionTrack {
    hand: Hand,
    object_id: NodeId,
    start_frame: u64,
    /// Object-frame 3D points with their current 2D measurements; index is
    /// the keypoint ordinal.
    correspondences: Vec<Correspondence>,
    /// Grasp offset in the object frame; fixed for the whole interaction.
    delta_obj: Vector3<f64>,
    pose_history: Vec<(u64, RigidPose)>,
    state: TrackState,
    /// Reprojection RMSE of the most recent successful solve; decides which
    /// of two hands wins when both end on the same object together.
    last_rmse: f64,
    start_pose: RigidPose,
    /// World-frame slide axis; drawers only.
    axis: Option<Vector3<f64>>,
}

impl InteractionTrack {
    pub fn hand(&self) -> Hand {
        self.hand
    }

    pub fn object_id(&self) -> NodeId {
        self.object_id
    }

    pub fn start_frame(&self) -> u64 {
        self.start_frame
    }

    pub fn state(&self) -> TrackState {
        self.state
    }

    pub fn delta_obj(&self) -> Vector3<f64> {
        self.delta_obj
    }

    pub fn pose_history(&self) -> &[(u64, RigidPose)] {
        &self.pose_history
    }

    pub fn current_pose(&self) -> &RigidPose {
        &self.pose_history.last().expect("history never empty").1
    }

    pub fn last_rmse(&self) -> f64 {
        self.last_rmse
    }

    /// Signed opening distance along the drawer axis, for drawer tracks.
    pub fn opening(&self) -> Option<f64> {
        let axis = self.axis?;
        Some((self.current_pose().translation - self.start_pose.translation).dot(&axis))
    }
}

/// Starts tracking the object named by a start event. The object's
/// keypoints are projected through the camera of the start frame; the track
/// fails if too few land inside the image.
pub fn begin_track(
    graph: &SceneGraph,
    event: &IntervalEvent,
    obs: &Observation,
    config: &TrackerConfig,
) -> Result<InteractionTrack, TrackerError> {
    if event.kind != EventKind::Start {
        return Err(TrackerError::InvalidEvent(
            "begin_track needs a start event".to_string(),
        ));
    }
    let object_id = event
        .object_id
        .ok_or_else(|| TrackerError::InvalidEvent("start event without object".to_string()))?;
    let hand_position = event.hand_position.ok_or_else(|| {
        TrackerError::InvalidEvent("start event without hand position".to_string())
    })?;
    let node = graph
        .node(object_id)
        .ok_or(TrackerError::UnknownObject(object_id))?;
    let start_pose = *node.pose();

    let mut correspondences = Vec::with_capacity(node.keypoint_count());
    let mut visible = 0usize;
    for (_, local) in node.keypoints() {
        let world = start_pose.transform_point(&local);
        let (point2d, ok) = match obs.camera.project(&world) {
            Ok(px) if obs.camera.intrinsics.contains_pixel(&px) => (px, true),
            _ => (Vector2::zeros(), false),
        };
        visible += ok as usize;
        correspondences.push(Correspondence {
            point3d: local,
            point2d,
            visible: ok,
        });
    }
    if visible < config.min_visible_points {
        return Err(TrackerError::ObjectNotVisible {
            object_id,
            visible,
            needed: config.min_visible_points,
        });
    }

    let centroid = node.centroid();
    let rotation_start = start_pose.rotation;
    let delta_world = centroid - hand_position;
    let delta_obj = rotation_start.inverse() * delta_world;

    let axis = match (node.kind, node.front_normal()) {
        (NodeKind::Drawer, Some(n)) => Some(rotation_start * *n),
        _ => None,
    };

    Ok(InteractionTrack {
        hand: event.hand,
        object_id,
        start_frame: event.frame_index,
        correspondences,
        delta_obj,
        pose_history: vec![(event.frame_index, start_pose)],
        state: TrackState::Active,
        last_rmse: f64::INFINITY,
        start_pose,
        axis,
    })
}

/// Advances the track by one frame. 2D measurements are refreshed from the
/// stream (a keypoint without an update this frame counts as unseen), PnP is
/// solved, and the configured translation rule is applied. On too few
/// visible points or a failed solve the pose freezes, the state becomes
/// lost, and later frames may still recover.
pub fn step_track(
    track: &mut InteractionTrack,
    obs: &Observation,
    config: &TrackerConfig,
) -> Result<RigidPose, TrackerError> {
    if track.state == TrackState::Ended {
        return Err(TrackerError::AlreadyEnded);
    }
    for c in &mut track.correspondences {
        c.visible = false;
    }
    for tu in &obs.track_updates {
        if track_id_object(tu.track_id) != track.object_id {
            continue;
        }
        let ordinal = track_id_ordinal(tu.track_id) as usize;
        if let Some(c) = track.correspondences.get_mut(ordinal) {
            c.point2d = tu.point2d;
            c.visible = tu.visible;
        }
    }
    let visible = track.correspondences.iter().filter(|c| c.visible).count();
    if visible < config.min_visible_points {
        track.state = TrackState::Lost;
        return Err(TrackerError::TrackingLost {
            frame: obs.frame_index,
        });
    }

    let pnp = match solve_pnp_ransac(&track.correspondences, &obs.camera.intrinsics, &config.ransac)
    {
        Ok(p) => p,
        Err(_) => {
            track.state = TrackState::Lost;
            return Err(TrackerError::TrackingLost {
                frame: obs.frame_index,
            });
        }
    };

    // Lift the object-to-camera solve into the world frame once; both
    // translation rules share its rotation, so the anchor ablation can never
    // change orientation.
    let world_pose = obs.camera.pose.compose(&pnp.pose_obj_to_cam);
    let hand_position = obs.hands.get(track.hand).position;

    let pose = if track.axis.is_some() && config.drawer_axis_constraint {
        drawer_pose(track, world_pose, hand_position, config)
    } else {
        let rotation = world_pose.rotation;
        let translation = match (config.hand_anchor, hand_position) {
            (true, Some(r)) => r + rotation * track.delta_obj,
            _ => world_pose.translation,
        };
        RigidPose::new(rotation, translation)
    };

    track.state = TrackState::Active;
    track.last_rmse = pnp.reprojection_rmse;
    track.pose_history.push((obs.frame_index, pose));
    Ok(pose)
}

/// Drawer update: orientation stays at the start pose, and the translation
/// candidate (hand-anchored or PnP) is projected onto the line through the
/// start position along the front normal.
fn drawer_pose(
    track: &InteractionTrack,
    world_pose: RigidPose,
    hand_position: Option<Vector3<f64>>,
    config: &TrackerConfig,
) -> RigidPose {
    let axis = track.axis.expect("drawer track has an axis");
    let rotation = track.start_pose.rotation;
    let unconstrained = match (config.hand_anchor, hand_position) {
        (true, Some(r)) => r + rotation * track.delta_obj,
        _ => world_pose.translation,
    };
    let s = (unconstrained - track.start_pose.translation).dot(&axis);
    RigidPose::new(rotation, track.start_pose.translation + s * axis)
}

/// Closes the track and writes its final pose into the scene graph.
/// Returns the new graph revision.
pub fn end_track(
    track: &mut InteractionTrack,
    graph: &mut SceneGraph,
    event: &IntervalEvent,
) -> Result<u64, TrackerError> {
    if event.kind != EventKind::End {
        return Err(TrackerError::InvalidEvent(
            "end_track needs an end event".to_string(),
        ));
    }
    if track.state == TrackState::Ended {
        return Err(TrackerError::AlreadyEnded);
    }
    let pose = *track.current_pose();
    let revision = graph.apply_pose_update(track.object_id, pose)?;
    track.state = TrackState::Ended;
    Ok(revision)
}

/// True when `a` should be preferred over `b` for the final graph update
/// when both hands release the same object at the same frame: lower
/// reprojection error wins, the left hand on a tie.
pub(crate) fn better_final_track(a: &InteractionTrack, b: &InteractionTrack) -> bool {
    if a.last_rmse != b.last_rmse {
        return a.last_rmse < b.last_rmse;
    }
    a.hand <= b.hand
}

/// One line of tracked output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub frame_index: u64,
    pub timestamp_ns: i64,
    pub object_id: NodeId,
    pub pose: RigidPose,
    pub status: TrackStatus,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub detector: DetectorConfig,
    pub tracker: TrackerConfig,
}

#[derive(Debug, Default)]
pub struct SessionOutput {
    pub trajectories: Vec<TrajectoryRow>,
    pub events: Vec<IntervalEvent>,
    /// Human-readable notes about non-fatal incidents (losses, fallbacks).
    pub log: Vec<String>,
}

/// Runs the full delayed-online pipeline over an observation stream: the
/// detector decides interval boundaries, tracks are begun, stepped, and
/// ended against the live scene graph.
///
/// Decisions lag the stream by the detector look-ahead, so the session keeps
/// its own queue of pending frames and processes each one as its decision
/// becomes available. Tracks still open when the stream ends are closed at
/// the last decided frame with their latest pose.
pub fn run_session(
    graph: &mut SceneGraph,
    observations: impl IntoIterator<Item = Observation>,
    config: &SessionConfig,
) -> Result<SessionOutput, TrackerError> {
    config.detector.validate()?;
    config.tracker.validate()?;
    let mut detector = Detector::new(config.detector)?;
    let lookahead = config.detector.lookahead_len;

    let mut out = SessionOutput::default();
    let mut pending: VecDeque<Observation> = VecDeque::with_capacity(lookahead + 1);
    let mut tracks: [Option<InteractionTrack>; 2] = [None, None];
    let mut last_decided: Option<Observation> = None;

    for obs in observations {
        pending.push_back(obs.clone());
        let events = detector.push(obs, graph)?;
        if pending.len() < lookahead + 1 {
            debug_assert!(events.is_empty());
            continue;
        }
        let decided = pending.pop_front().expect("queue holds the decided frame");
        debug_assert!(events
            .iter()
            .all(|e| e.frame_index == decided.frame_index));
        process_decided_frame(
            graph,
            &decided,
            &events,
            &mut tracks,
            config,
            &mut out,
        )?;
        out.events.extend(events);
        last_decided = Some(decided);
    }

    // Stream exhausted: the queue still holds undecidable frames. Anything
    // still tracking is finalized at the last frame that was decided.
    if let Some(decided) = last_decided {
        let open: Vec<Hand> = Hand::BOTH
            .iter()
            .copied()
            .filter(|h| tracks[*h as usize].is_some())
            .collect();
        if !open.is_empty() {
            let fallback: Vec<IntervalEvent> = open
                .iter()
                .map(|&hand| IntervalEvent {
                    kind: EventKind::End,
                    hand,
                    frame_index: decided.frame_index,
                    timestamp_ns: decided.timestamp_ns,
                    object_id: None,
                    hand_position: decided.hands.get(hand).position,
                })
                .collect();
            for hand in &open {
                out.log.push(format!(
                    "stream ended with {hand} hand still tracking; closing at frame {}",
                    decided.frame_index
                ));
            }
            apply_track_ends(graph, &fallback, &mut tracks, &mut out)?;
        }
    }
    Ok(out)
}

fn process_decided_frame(
    graph: &mut SceneGraph,
    decided: &Observation,
    events: &[IntervalEvent],
    tracks: &mut [Option<InteractionTrack>; 2],
    config: &SessionConfig,
    out: &mut SessionOutput,
) -> Result<(), TrackerError> {
    let ends: Vec<IntervalEvent> = events
        .iter()
        .filter(|e| e.kind == EventKind::End)
        .cloned()
        .collect();
    apply_track_ends(graph, &ends, tracks, out)?;

    for event in events.iter().filter(|e| e.kind == EventKind::Start) {
        match begin_track(graph, event, decided, &config.tracker) {
            Ok(track) => {
                out.trajectories.push(TrajectoryRow {
                    frame_index: decided.frame_index,
                    timestamp_ns: decided.timestamp_ns,
                    object_id: track.object_id,
                    pose: *track.current_pose(),
                    status: TrackStatus::Tracked,
                });
                tracks[event.hand as usize] = Some(track);
            }
            Err(err) => {
                // The detector believes this hand is interacting; without a
                // track its future end event will simply find nothing.
                out.log.push(format!(
                    "could not begin track for {} hand on object {:?} at frame {}: {}",
                    event.hand, event.object_id, event.frame_index, err
                ));
            }
        }
    }

    for hand in Hand::BOTH {
        let Some(track) = tracks[hand as usize].as_mut() else {
            continue;
        };
        if track.start_frame == decided.frame_index {
            continue;
        }
        let (pose, status) = match step_track(track, decided, &config.tracker) {
            Ok(pose) => (pose, TrackStatus::Tracked),
            Err(TrackerError::TrackingLost { frame }) => {
                out.log
                    .push(format!("{hand} hand lost object {} at frame {frame}", track.object_id));
                (*track.current_pose(), TrackStatus::Lost)
            }
            Err(other) => return Err(other),
        };
        out.trajectories.push(TrajectoryRow {
            frame_index: decided.frame_index,
            timestamp_ns: decided.timestamp_ns,
            object_id: track.object_id,
            pose,
            status,
        });
    }
    Ok(())
}

/// Ends the given tracks, resolving the case where both hands release the
/// same object at once: only the better track (lower final reprojection
/// error, left on ties) writes the graph.
fn apply_track_ends(
    graph: &mut SceneGraph,
    ends: &[IntervalEvent],
    tracks: &mut [Option<InteractionTrack>; 2],
    out: &mut SessionOutput,
) -> Result<(), TrackerError> {
    let mut ending: Vec<(IntervalEvent, InteractionTrack)> = Vec::new();
    for event in ends {
        match tracks[event.hand as usize].take() {
            Some(track) => ending.push((event.clone(), track)),
            None => out.log.push(format!(
                "end event for {} hand at frame {} had no running track",
                event.hand, event.frame_index
            )),
        }
    }
    let mut skip = vec![false; ending.len()];
    for i in 0..ending.len() {
        for j in (i + 1)..ending.len() {
            if ending[i].1.object_id() == ending[j].1.object_id() {
                let keep_i = better_final_track(&ending[i].1, &ending[j].1);
                let lose = if keep_i { j } else { i };
                skip[lose] = true;
                out.log.push(format!(
                    "both hands released object {} at frame {}; applying the {} hand track",
                    ending[i].1.object_id(),
                    ending[i].0.frame_index,
                    if keep_i { ending[i].1.hand() } else { ending[j].1.hand() },
                ));
            }
        }
    }
    for (i, (event, mut track)) in ending.into_iter().enumerate() {
        if skip[i] {
            track.state = TrackState::Ended;
            continue;
        }
        end_track(&mut track, graph, &event)?;
    }
    Ok(())
}

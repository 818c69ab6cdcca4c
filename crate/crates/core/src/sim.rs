//! Synthetic recording generator. A scenario scripts a camera path, hand
//! motions, and pick-and-place actions against a scene; `generate` renders it
//! into an observation stream plus the ground-truth trajectory, which is the
//! verification oracle for the detector and tracker.

use std::collections::{HashMap, HashSet};

use nalgebra::{Rotation3, UnitQuaternion, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{CameraIntrinsics, CameraModel, RigidPose, TrackStatus};
use crate::interaction::{Hand, HandObservation, Hands, Observation, TrackUpdate};
use crate::scene_graph::{NodeId, NodeKind, PoseRecord, SceneGraph};
use crate::tracker::{track_id, TrajectoryRow};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("scenario references unknown object {0}")]
    UnknownObject(NodeId),
    #[error("object {object_id} leaves the frame at frame {frame}")]
    InvisibleAction { object_id: NodeId, frame: u64 },
}

/// Pinhole intrinsics as written in scenario files.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct IntrinsicsSpec {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Default for IntrinsicsSpec {
    fn default() -> Self {
        IntrinsicsSpec {
            fx: 600.0,
            fy: 600.0,
            cx: 320.0,
            cy: 240.0,
            width: 640,
            height: 480,
        }
    }
}

impl IntrinsicsSpec {
    fn build(&self) -> CameraIntrinsics {
        CameraIntrinsics::new(self.fx, self.fy, self.cx, self.cy, self.width, self.height)
    }
}

/// Camera waypoint; the path interpolates position and look-at target
/// linearly between consecutive keyframes and clamps outside them.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CameraKeyframe {
    pub time: f64,
    pub position: [f64; 3],
    pub look_at: [f64; 3],
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    pub pixel_sigma: f64,
    pub hand_sigma: f64,
    pub p_o_flip_rate: f64,
    pub track_dropout_rate: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            pixel_sigma: 0.0,
            hand_sigma: 0.0,
            p_o_flip_rate: 0.0,
            track_dropout_rate: 0.0,
        }
    }
}

/// Mid-action grasp change: from `time` onward the hand holds the object at
/// the new offset. The object's motion is unaffected.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Regrasp {
    pub time: f64,
    pub grasp_offset: [f64; 3],
}

/// One scripted interaction. Exactly one of `place_pose` (free 6DoF move)
/// and `drawer_delta` (signed slide along the drawer normal) must be set,
/// and `drawer_delta` is required for drawer nodes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Action {
    pub object_id: NodeId,
    pub hand: Hand,
    #[serde(default)]
    pub grasp_offset: [f64; 3],
    pub pick_time: f64,
    pub place_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub place_pose: Option<PoseRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drawer_delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub regrasps: Vec<Regrasp>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    /// Scene file this scenario plays against; resolved by the CLI relative
    /// to the scenario file, unused by the library API.
    #[serde(default)]
    pub scene: String,
    #[serde(default = "default_frame_rate")]
    pub frame_rate: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub intrinsics: IntrinsicsSpec,
    #[serde(default)]
    pub noise: NoiseSpec,
    pub camera_path: Vec<CameraKeyframe>,
    #[serde(default)]
    pub actions: Vec<Action>,
    /// Recording continues this long past the last place so the detector's
    /// lookahead can close the final interval.
    #[serde(default = "default_tail")]
    pub tail: f64,
}

fn default_frame_rate() -> f64 {
    30.0
}

fn default_tail() -> f64 {
    1.0
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub stream: Vec<Observation>,
    pub ground_truth: Vec<TrajectoryRow>,
}

/// Renders the scenario against the scene. The scene graph is read at its
/// current poses; actions move objects away from those.
pub fn generate(graph: &SceneGraph, scenario: &Scenario) -> Result<SimOutput, SimError> {
    let plan = Plan::build(graph, scenario)?;
    plan.check_visibility()?;
    Ok(plan.render())
}

/// Renders the scenario twice: once as given (with its regrasp events) and
/// once with every regrasp stripped. Everything else, including the noise
/// sequence, is identical between the two.
pub fn make_ablation_pair(
    graph: &SceneGraph,
    scenario: &Scenario,
) -> Result<(SimOutput, SimOutput), SimError> {
    let with_regrasp = generate(graph, scenario)?;
    let mut stripped = scenario.clone();
    for action in &mut stripped.actions {
        action.regrasps.clear();
    }
    let without_regrasp = generate(graph, &stripped)?;
    Ok((with_regrasp, without_regrasp))
}

/// Minimum keypoints that must project in-frame on every action frame.
const VISIBLE_KEYPOINT_FLOOR: usize = 8;

/// Hand park position relative to the grasp point outside interactions.
fn rest_offset() -> Vector3<f64> {
    Vector3::new(0.30, -0.25, 0.0)
}

struct PlannedAction {
    object_id: NodeId,
    hand: Hand,
    grasp_offset: Vector3<f64>,
    pick_frame: u64,
    place_frame: u64,
    start: RigidPose,
    target: RigidPose,
    /// (frame, offset) grasp changes, ascending.
    regrasps: Vec<(u64, Vector3<f64>)>,
}

impl PlannedAction {
    fn last_moving_frame(&self) -> u64 {
        self.place_frame - 1
    }

    /// Object pose at a frame; frames past the ends clamp to them.
    fn pose_at(&self, frame: u64) -> RigidPose {
        if frame <= self.pick_frame {
            return self.start;
        }
        if frame >= self.last_moving_frame() {
            return self.target;
        }
        let fraction = (frame - self.pick_frame) as f64
            / (self.last_moving_frame() - self.pick_frame) as f64;
        RigidPose::new(
            self.start.rotation.slerp(&self.target.rotation, fraction),
            self.start.translation
                + fraction * (self.target.translation - self.start.translation),
        )
    }

    fn grasp_offset_at(&self, frame: u64) -> Vector3<f64> {
        let mut offset = self.grasp_offset;
        for &(regrasp_frame, new_offset) in &self.regrasps {
            if frame >= regrasp_frame {
                offset = new_offset;
            }
        }
        offset
    }

    /// World grasp point while the hand rides the object.
    fn grasp_point_at(&self, frame: u64) -> Vector3<f64> {
        self.pose_at(frame)
            .transform_point(&self.grasp_offset_at(frame))
    }

    fn active_at(&self, frame: u64) -> bool {
        (self.pick_frame..self.place_frame).contains(&frame)
    }
}

struct Plan<'a> {
    graph: &'a SceneGraph,
    scenario: &'a Scenario,
    intrinsics: CameraIntrinsics,
    actions: Vec<PlannedAction>,
    frame_count: u64,
}

impl<'a> Plan<'a> {
    fn build(graph: &'a SceneGraph, scenario: &'a Scenario) -> Result<Self, SimError> {
        let invalid = |msg: String| SimError::InvalidScenario(msg);
        let fps = scenario.frame_rate;
        if !(fps.is_finite() && fps > 0.0) {
            return Err(invalid(format!("frame_rate {fps} must be positive")));
        }
        if !(scenario.tail.is_finite() && scenario.tail >= 0.0) {
            return Err(invalid(format!("tail {} must be non-negative", scenario.tail)));
        }
        let spec = &scenario.intrinsics;
        if !(spec.fx > 0.0 && spec.fy > 0.0) || spec.width == 0 || spec.height == 0 {
            return Err(invalid("intrinsics are degenerate".to_string()));
        }
        let noise = &scenario.noise;
        for (name, value) in [
            ("pixel_sigma", noise.pixel_sigma),
            ("hand_sigma", noise.hand_sigma),
            ("p_o_flip_rate", noise.p_o_flip_rate),
            ("track_dropout_rate", noise.track_dropout_rate),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(invalid(format!("noise.{name} {value} must be non-negative")));
            }
        }
        if noise.p_o_flip_rate > 1.0 || noise.track_dropout_rate > 1.0 {
            return Err(invalid("noise rates must not exceed 1".to_string()));
        }
        if scenario.camera_path.is_empty() {
            return Err(invalid("camera_path needs at least one keyframe".to_string()));
        }
        for pair in scenario.camera_path.windows(2) {
            if !(pair[1].time > pair[0].time) {
                return Err(invalid("camera keyframe times must strictly increase".to_string()));
            }
        }
        for key in &scenario.camera_path {
            let coords = key.position.iter().chain(key.look_at.iter());
            if !key.time.is_finite() || !coords.clone().all(|c| c.is_finite()) {
                return Err(invalid("camera keyframe is not finite".to_string()));
            }
            if key.position == key.look_at {
                return Err(invalid("camera keyframe looks at its own position".to_string()));
            }
        }

        let frame_of = |time: f64| (time * fps).round() as u64;
        let mut actions = Vec::with_capacity(scenario.actions.len());
        let mut deltas = Vec::with_capacity(scenario.actions.len());
        for action in &scenario.actions {
            let node = graph
                .node(action.object_id)
                .ok_or(SimError::UnknownObject(action.object_id))?;
            if !action.grasp_offset.iter().all(|c| c.is_finite()) {
                return Err(invalid(format!(
                    "object {} grasp_offset is not finite",
                    action.object_id
                )));
            }
            if !(action.pick_time.is_finite()
                && action.place_time.is_finite()
                && action.pick_time >= 0.0
                && action.pick_time < action.place_time)
            {
                return Err(invalid(format!(
                    "object {} needs 0 <= pick_time < place_time",
                    action.object_id
                )));
            }
            let pick_frame = frame_of(action.pick_time);
            let place_frame = frame_of(action.place_time);
            if place_frame < pick_frame + 2 {
                return Err(invalid(format!(
                    "object {} action too short at {fps} fps",
                    action.object_id
                )));
            }
            let start = *node.pose();
            let target = match (&action.place_pose, action.drawer_delta) {
                (Some(pose), None) => {
                    if node.kind == NodeKind::Drawer {
                        return Err(invalid(format!(
                            "drawer {} must use drawer_delta",
                            action.object_id
                        )));
                    }
                    RigidPose::from(pose)
                }
                (None, Some(delta)) => {
                    if !delta.is_finite() {
                        return Err(invalid(format!(
                            "object {} drawer_delta is not finite",
                            action.object_id
                        )));
                    }
                    let normal = node.front_normal().ok_or_else(|| {
                        invalid(format!("object {} is not a drawer", action.object_id))
                    })?;
                    let axis = start.rotate_vector(normal);
                    RigidPose::new(start.rotation, start.translation + delta * axis)
                }
                _ => {
                    return Err(invalid(format!(
                        "object {} needs exactly one of place_pose and drawer_delta",
                        action.object_id
                    )));
                }
            };
            let mut regrasps = Vec::with_capacity(action.regrasps.len());
            for regrasp in &action.regrasps {
                if !regrasp.time.is_finite()
                    || !regrasp.grasp_offset.iter().all(|c| c.is_finite())
                {
                    return Err(invalid(format!(
                        "object {} regrasp is not finite",
                        action.object_id
                    )));
                }
                let frame = frame_of(regrasp.time);
                if frame <= pick_frame || frame >= place_frame {
                    return Err(invalid(format!(
                        "object {} regrasp must fall mid-action",
                        action.object_id
                    )));
                }
                if let Some(&(last, _)) = regrasps.last() {
                    if frame <= last {
                        return Err(invalid(format!(
                            "object {} regrasps must strictly increase in time",
                            action.object_id
                        )));
                    }
                }
                regrasps.push((frame, Vector3::from(regrasp.grasp_offset)));
            }
            actions.push(PlannedAction {
                object_id: action.object_id,
                hand: action.hand,
                grasp_offset: Vector3::from(action.grasp_offset),
                pick_frame,
                place_frame,
                start,
                target,
                regrasps,
            });
            deltas.push(action.drawer_delta);
        }

        for hand in Hand::BOTH {
            let mut intervals: Vec<(u64, u64)> = actions
                .iter()
                .filter(|a| a.hand == hand)
                .map(|a| (a.pick_frame, a.place_frame))
                .collect();
            intervals.sort_unstable();
            for pair in intervals.windows(2) {
                if pair[1].0 <= pair[0].1 {
                    return Err(invalid(format!("{hand} hand actions overlap")));
                }
            }
        }
        // Two hands may move one object together, but then they must agree
        // on its motion; the object has a single ground truth.
        for i in 0..actions.len() {
            for j in i + 1..actions.len() {
                let (a, b) = (&actions[i], &actions[j]);
                if a.object_id != b.object_id
                    || a.place_frame <= b.pick_frame
                    || b.place_frame <= a.pick_frame
                {
                    continue;
                }
                let agree = a.pick_frame == b.pick_frame
                    && a.place_frame == b.place_frame
                    && a.target.rotation_wxyz() == b.target.rotation_wxyz()
                    && a.target.translation == b.target.translation;
                if !agree {
                    return Err(invalid(format!(
                        "conflicting concurrent actions on object {}",
                        a.object_id
                    )));
                }
            }
        }

        // A later action on an already-moved object continues from the pose
        // the earlier one left behind, not from the scene file pose. The two
        // halves of a concurrent pair share one start so their targets stay
        // in agreement.
        let mut order: Vec<usize> = (0..actions.len()).collect();
        order.sort_by_key(|&i| (actions[i].pick_frame, actions[i].place_frame));
        let mut last: HashMap<NodeId, (u64, u64, RigidPose, RigidPose)> = HashMap::new();
        for idx in order {
            let (pick, place) = (actions[idx].pick_frame, actions[idx].place_frame);
            let object_id = actions[idx].object_id;
            let inherited = match last.get(&object_id) {
                Some(&(prev_pick, prev_place, prev_start, _))
                    if (pick, place) == (prev_pick, prev_place) =>
                {
                    Some(prev_start)
                }
                Some(&(_, prev_place, _, prev_target)) if pick >= prev_place => Some(prev_target),
                _ => None,
            };
            if let Some(start) = inherited {
                let action = &mut actions[idx];
                action.start = start;
                action.target = match deltas[idx] {
                    Some(delta) => {
                        let node = graph.node(object_id).expect("validated above");
                        let normal = node.front_normal().expect("validated above");
                        let axis = start.rotate_vector(normal);
                        RigidPose::new(start.rotation, start.translation + delta * axis)
                    }
                    None => action.target,
                };
            }
            let a = &actions[idx];
            last.insert(object_id, (pick, place, a.start, a.target));
        }

        let last_place = actions.iter().map(|a| a.place_frame).max().unwrap_or(0);
        let path_end = frame_of(scenario.camera_path.last().unwrap().time);
        let tail_frames = (scenario.tail * fps).round() as u64;
        let frame_count = (last_place + tail_frames).max(path_end) + 1;

        Ok(Plan {
            graph,
            scenario,
            intrinsics: spec.build(),
            actions,
            frame_count,
        })
    }

    fn timestamp_ns(&self, frame: u64) -> i64 {
        (frame as f64 * 1e9 / self.scenario.frame_rate).round() as i64
    }

    fn camera_at(&self, frame: u64) -> CameraModel {
        let time = frame as f64 / self.scenario.frame_rate;
        let path = &self.scenario.camera_path;
        let (position, look_at) = if time <= path[0].time {
            (path[0].position, path[0].look_at)
        } else if time >= path[path.len() - 1].time {
            let last = &path[path.len() - 1];
            (last.position, last.look_at)
        } else {
            let i = path.partition_point(|k| k.time <= time) - 1;
            let (a, b) = (&path[i], &path[i + 1]);
            let u = (time - a.time) / (b.time - a.time);
            let lerp = |p: [f64; 3], q: [f64; 3]| {
                [
                    p[0] + u * (q[0] - p[0]),
                    p[1] + u * (q[1] - p[1]),
                    p[2] + u * (q[2] - p[2]),
                ]
            };
            (lerp(a.position, b.position), lerp(a.look_at, b.look_at))
        };
        CameraModel::new(
            self.intrinsics,
            look_at_pose(Vector3::from(position), Vector3::from(look_at)),
        )
    }

    /// Noiseless hand position; `None` means the hand never appears.
    fn hand_at(&self, hand: Hand, frame: u64) -> Option<Vector3<f64>> {
        let mut owned: Vec<&PlannedAction> =
            self.actions.iter().filter(|a| a.hand == hand).collect();
        if owned.is_empty() {
            return None;
        }
        owned.sort_unstable_by_key(|a| a.pick_frame);

        let fps = self.scenario.frame_rate;
        let transition_frames = fps.round() as u64;
        let first = owned[0];
        let first_grasp = first.grasp_point_at(first.pick_frame);

        // Approach the first grasp over the last second before the pick.
        if frame < first.pick_frame {
            let approach_start = first.pick_frame.saturating_sub(transition_frames);
            if frame <= approach_start {
                return Some(first_grasp + rest_offset());
            }
            return Some(ease_between(
                first_grasp + rest_offset(),
                first_grasp,
                approach_start,
                first.pick_frame,
                frame,
            ));
        }
        for (i, action) in owned.iter().enumerate() {
            if action.active_at(frame) {
                return Some(action.grasp_point_at(frame));
            }
            let released = action.last_moving_frame();
            if frame <= released {
                continue;
            }
            let release_point = action.grasp_point_at(released);
            if let Some(next) = owned.get(i + 1) {
                if frame < next.pick_frame {
                    return Some(ease_between(
                        release_point,
                        next.grasp_point_at(next.pick_frame),
                        released,
                        next.pick_frame,
                        frame,
                    ));
                }
                continue;
            }
            // Retreat after the last action, then park.
            let retreat_end = released + transition_frames;
            if frame >= retreat_end {
                return Some(release_point + rest_offset());
            }
            return Some(ease_between(
                release_point,
                release_point + rest_offset(),
                released,
                retreat_end,
                frame,
            ));
        }
        unreachable!("frame ranges above cover the timeline");
    }

    fn interaction_prob(&self, hand: Hand, frame: u64) -> f64 {
        let active = self
            .actions
            .iter()
            .any(|a| a.hand == hand && a.active_at(frame));
        if active {
            1.0
        } else {
            0.0
        }
    }

    /// Actions emitting keypoint updates this frame, one per object.
    fn emitting_actions(&self, frame: u64) -> Vec<&PlannedAction> {
        let mut seen = HashSet::new();
        self.actions
            .iter()
            .filter(|a| a.active_at(frame) && seen.insert(a.object_id))
            .collect()
    }

    /// Rejects any action whose object is insufficiently visible while it
    /// moves; partial occlusion by the frame border is tolerated down to a
    /// floor that keeps the pose solvable.
    fn check_visibility(&self) -> Result<(), SimError> {
        for frame in 0..self.frame_count {
            let camera = self.camera_at(frame);
            for action in self.emitting_actions(frame) {
                let node = self.graph.node(action.object_id).unwrap();
                let pose = action.pose_at(frame);
                let visible = node
                    .keypoints()
                    .filter(|(_, local)| {
                        let world = pose.transform_point(local);
                        matches!(camera.project(&world), Ok(px) if camera.intrinsics.contains_pixel(&px))
                    })
                    .count();
                if visible < VISIBLE_KEYPOINT_FLOOR.min(node.keypoint_count()) {
                    return Err(SimError::InvisibleAction {
                        object_id: action.object_id,
                        frame,
                    });
                }
            }
        }
        Ok(())
    }

    fn render(&self) -> SimOutput {
        let noise = &self.scenario.noise;
        let mut rng = ChaCha12Rng::seed_from_u64(self.scenario.seed);
        let normal = |sigma: f64, rng: &mut ChaCha12Rng| {
            let z: f64 = rng.sample(StandardNormal);
            sigma * z
        };
        let mut stream = Vec::with_capacity(self.frame_count as usize);
        let mut ground_truth = Vec::new();

        for frame in 0..self.frame_count {
            let camera = self.camera_at(frame);
            let mut hands = Hands {
                left: HandObservation::absent(),
                right: HandObservation::absent(),
            };
            for hand in Hand::BOTH {
                let Some(mut position) = self.hand_at(hand, frame) else {
                    continue;
                };
                if noise.hand_sigma > 0.0 {
                    position += Vector3::new(
                        normal(noise.hand_sigma, &mut rng),
                        normal(noise.hand_sigma, &mut rng),
                        normal(noise.hand_sigma, &mut rng),
                    );
                }
                let mut prob = self.interaction_prob(hand, frame);
                if noise.p_o_flip_rate > 0.0 && rng.random::<f64>() < noise.p_o_flip_rate {
                    prob = 1.0 - prob;
                }
                *match hand {
                    Hand::Left => &mut hands.left,
                    Hand::Right => &mut hands.right,
                } = HandObservation {
                    position: Some(position),
                    interaction_prob: prob,
                };
            }

            let mut track_updates = Vec::new();
            for action in self.emitting_actions(frame) {
                let node = self.graph.node(action.object_id).unwrap();
                let pose = action.pose_at(frame);
                for (ordinal, local) in node.keypoints() {
                    let world = pose.transform_point(&local);
                    let mut visible = matches!(
                        camera.project(&world),
                        Ok(px) if camera.intrinsics.contains_pixel(&px)
                    );
                    if visible
                        && noise.track_dropout_rate > 0.0
                        && rng.random::<f64>() < noise.track_dropout_rate
                    {
                        visible = false;
                    }
                    let point2d = if visible {
                        let mut px = camera.project(&world).unwrap();
                        if noise.pixel_sigma > 0.0 {
                            px += Vector2::new(
                                normal(noise.pixel_sigma, &mut rng),
                                normal(noise.pixel_sigma, &mut rng),
                            );
                        }
                        px
                    } else {
                        Vector2::zeros()
                    };
                    track_updates.push(TrackUpdate {
                        track_id: track_id(action.object_id, ordinal),
                        point2d,
                        visible,
                    });
                }
                ground_truth.push(TrajectoryRow {
                    frame_index: frame,
                    timestamp_ns: self.timestamp_ns(frame),
                    object_id: action.object_id,
                    pose,
                    status: TrackStatus::Truth,
                });
            }

            stream.push(Observation {
                frame_index: frame,
                timestamp_ns: self.timestamp_ns(frame),
                camera,
                hands,
                track_updates,
            });
        }
        SimOutput {
            stream,
            ground_truth,
        }
    }
}

/// Smoothstep interpolation between two points over a frame window, exact at
/// both endpoints.
fn ease_between(
    from: Vector3<f64>,
    to: Vector3<f64>,
    start_frame: u64,
    end_frame: u64,
    frame: u64,
) -> Vector3<f64> {
    debug_assert!(start_frame < end_frame && (start_frame..=end_frame).contains(&frame));
    if frame == start_frame {
        return from;
    }
    if frame == end_frame {
        return to;
    }
    let u = (frame - start_frame) as f64 / (end_frame - start_frame) as f64;
    let s = u * u * (3.0 - 2.0 * u);
    from + s * (to - from)
}

/// Camera pose looking from `eye` toward `target`, with the image x axis
/// horizontal (world +y is "down" unless the view axis is vertical).
fn look_at_pose(eye: Vector3<f64>, target: Vector3<f64>) -> RigidPose {
    let forward = (target - eye).normalize();
    let down_hint = if forward.y.abs() > 0.999 {
        Vector3::z()
    } else {
        Vector3::y()
    };
    let right = down_hint.cross(&forward).normalize();
    let down = forward.cross(&right);
    let rotation = Rotation3::from_matrix_unchecked(nalgebra::Matrix3::from_columns(&[
        right, down, forward,
    ]));
    RigidPose::new(UnitQuaternion::from_rotation_matrix(&rotation), eye)
}

//! Sliding-window detection of hand-object interaction intervals.
//!
//! The detector consumes a frame stream and decides, per hand, where an
//! interaction starts and ends. A decision about frame k is only made once
//! the look-ahead horizon after k is full, so every event is emitted exactly
//! `lookahead_len` pushes after its frame.

use std::collections::VecDeque;

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::CameraModel;
use crate::scene_graph::{NodeFilter, NodeId, SceneGraph};

#[derive(Debug, Error)]
pub enum InteractionError {
    #[error("observation out of order: frame {got} after frame {last}")]
    OutOfOrder { last: u64, got: u64 },
    #[error("invalid observation: {0}")]
    InvalidObservation(String),
    #[error("invalid detector config: {0}")]
    InvalidConfig(String),
    #[error("not enough valid hand positions to estimate velocity")]
    InsufficientSamples,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hand {
    Left,
    Right,
}

impl Hand {
    pub const BOTH: [Hand; 2] = [Hand::Left, Hand::Right];
}

impl std::fmt::Display for Hand {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Hand::Left => write!(f, "left"),
            Hand::Right => write!(f, "right"),
        }
    }
}

/// Per-hand measurement for one frame. A hand that was not detected has no
/// position; its probability is whatever the upstream network reported.
#[derive(Debug, Clone, PartialEq)]
pub struct HandObservation {
    pub position: Option<Vector3<f64>>,
    pub interaction_prob: f64,
}

impl HandObservation {
    pub fn absent() -> Self {
        HandObservation {
            position: None,
            interaction_prob: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hands {
    pub left: HandObservation,
    pub right: HandObservation,
}

impl Hands {
    pub fn get(&self, hand: Hand) -> &HandObservation {
        match hand {
            Hand::Left => &self.left,
            Hand::Right => &self.right,
        }
    }
}

/// 2D keypoint measurement carried by the stream for the tracker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackUpdate {
    pub track_id: u64,
    pub point2d: Vector2<f64>,
    pub visible: bool,
}

/// Everything the pipeline knows about one frame.
#[derive(Debug, Clone)]
pub struct Observation {
    pub frame_index: u64,
    pub timestamp_ns: i64,
    pub camera: CameraModel,
    pub hands: Hands,
    pub track_updates: Vec<TrackUpdate>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    /// Interaction probability threshold, exceeded strictly.
    pub tau_o: f64,
    /// Hand-to-object distance gate in meters, strict.
    pub tau_d: f64,
    /// Positive-count threshold when hand velocity is steady.
    pub theta_reg: usize,
    /// Positive-count threshold under a notable velocity change.
    pub theta_high: usize,
    /// Velocity gap in m/s that selects the high threshold.
    pub delta_diff: f64,
    /// Frames of history used for the prior velocity.
    pub buffer_len: usize,
    /// Frames of look-ahead before a decision is made.
    pub lookahead_len: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            tau_o: 0.5,
            tau_d: 0.10,
            theta_reg: 4,
            theta_high: 6,
            delta_diff: 0.025,
            buffer_len: 8,
            lookahead_len: 8,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), InteractionError> {
        if !(self.tau_o > 0.0 && self.tau_o < 1.0) {
            return Err(InteractionError::InvalidConfig(format!(
                "tau_o must be in (0, 1), got {}",
                self.tau_o
            )));
        }
        if !(self.tau_d > 0.0) {
            return Err(InteractionError::InvalidConfig(format!(
                "tau_d must be positive, got {}",
                self.tau_d
            )));
        }
        if !(self.delta_diff > 0.0) {
            return Err(InteractionError::InvalidConfig(format!(
                "delta_diff must be positive, got {}",
                self.delta_diff
            )));
        }
        if self.theta_reg == 0 || self.theta_high < self.theta_reg {
            return Err(InteractionError::InvalidConfig(format!(
                "need 0 < theta_reg <= theta_high, got {} and {}",
                self.theta_reg, self.theta_high
            )));
        }
        if self.theta_high > self.lookahead_len {
            return Err(InteractionError::InvalidConfig(format!(
                "theta_high {} exceeds lookahead_len {}",
                self.theta_high, self.lookahead_len
            )));
        }
        if self.buffer_len == 0 || self.lookahead_len == 0 {
            return Err(InteractionError::InvalidConfig(
                "buffer_len and lookahead_len must be positive".to_string(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Start,
    End,
}

/// Detected interval boundary. `object_id` is only present on starts; the
/// end of an interval is matched to its start by hand identity.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalEvent {
    pub kind: EventKind,
    pub hand: Hand,
    pub frame_index: u64,
    pub timestamp_ns: i64,
    pub object_id: Option<NodeId>,
    pub hand_position: Option<Vector3<f64>>,
}

/// The frames surrounding one decision: `prior` is the observation buffer
/// (most recent last), `current` the frame being decided, `lookahead` the
/// horizon after it. Velocities are computed inside `prior` and inside
/// `lookahead`; pairs spanning the current frame are not used.
pub struct DecisionWindow<'a> {
    pub prior: Vec<&'a Observation>,
    pub current: &'a Observation,
    pub lookahead: Vec<&'a Observation>,
}

/// Positive observation test: the hand was seen and its interaction
/// probability strictly exceeds the threshold.
pub fn is_positive(obs: &Observation, hand: Hand, tau_o: f64) -> bool {
    let h = obs.hands.get(hand);
    h.position.is_some() && h.interaction_prob > tau_o
}

/// Mean speed over consecutive frame pairs, separately for the buffer and
/// the look-ahead. A pair counts only when the hand is present in both of
/// its frames; a side with no usable pair cannot produce an estimate.
pub fn hand_velocities(
    window: &DecisionWindow<'_>,
    hand: Hand,
) -> Result<(f64, f64), InteractionError> {
    let prior = mean_speed(&window.prior, hand)?;
    let post = mean_speed(&window.lookahead, hand)?;
    Ok((prior, post))
}

fn mean_speed(frames: &[&Observation], hand: Hand) -> Result<f64, InteractionError> {
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for pair in frames.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let (Some(ra), Some(rb)) = (a.hands.get(hand).position, b.hands.get(hand).position)
        else {
            continue;
        };
        let dt = (b.timestamp_ns - a.timestamp_ns) as f64 * 1e-9;
        sum += (rb - ra).norm() / dt;
        pairs += 1;
    }
    if pairs == 0 {
        return Err(InteractionError::InsufficientSamples);
    }
    Ok(sum / pairs as f64)
}

fn lookahead_positive_count(window: &DecisionWindow<'_>, hand: Hand, tau_o: f64) -> usize {
    window
        .lookahead
        .iter()
        .filter(|o| is_positive(o, hand, tau_o))
        .count()
}

/// The interval-continuation test: enough positives in the look-ahead,
/// where "enough" is raised when the hand speed changed notably across the
/// decision point. Without velocity estimates the regular threshold applies.
fn continuation_holds(window: &DecisionWindow<'_>, config: &DetectorConfig, hand: Hand) -> bool {
    let count = lookahead_positive_count(window, hand, config.tau_o);
    let threshold = match hand_velocities(window, hand) {
        Ok((v_prior, v_post)) if (v_prior - v_post).abs() > config.delta_diff => config.theta_high,
        _ => config.theta_reg,
    };
    count >= threshold
}

/// True when an active interaction for `hand` should end at the decided
/// frame, i.e. the continuation test fails.
pub fn detect_end(window: &DecisionWindow<'_>, config: &DetectorConfig, hand: Hand) -> bool {
    !continuation_holds(window, config, hand)
}

/// Contact test for an idle hand at the decided frame. All four conditions
/// must hold: the observation is positive, the hand is within `tau_d` of the
/// nearest node, the look-ahead holds at least `theta_reg` positives, and
/// every future hand position is at least as far from that node's centroid
/// as the current one (the hand withdraws after placing contact).
pub fn detect_start(
    window: &DecisionWindow<'_>,
    graph: &SceneGraph,
    config: &DetectorConfig,
    hand: Hand,
) -> Option<NodeId> {
    if !is_positive(window.current, hand, config.tau_o) {
        return None;
    }
    let position = window.current.hands.get(hand).position?;
    let (object_id, distance) = graph.nearest_node(&position, &NodeFilter::default()).ok()?;
    if distance >= config.tau_d {
        return None;
    }
    if lookahead_positive_count(window, hand, config.tau_o) < config.theta_reg {
        return None;
    }
    let centroid = graph.node(object_id)?.centroid();
    let current_distance = (position - centroid).norm();
    let receding = window
        .lookahead
        .iter()
        .filter_map(|o| o.hands.get(hand).position)
        .all(|r| (r - centroid).norm() >= current_distance);
    if !receding {
        return None;
    }
    Some(object_id)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum HandState {
    Idle,
    Active,
}

/// Streaming detector. Push frames in order; each push past the warm-up
/// returns the events decided for the frame `lookahead_len` pushes back.
#[derive(Debug)]
pub struct Detector {
    config: DetectorConfig,
    frames: VecDeque<Observation>,
    states: [HandState; 2],
    last_frame: Option<(u64, i64)>,
}

impl Detector {
    pub fn new(config: DetectorConfig) -> Result<Self, InteractionError> {
        config.validate()?;
        Ok(Detector {
            config,
            frames: VecDeque::new(),
            states: [HandState::Idle, HandState::Idle],
            last_frame: None,
        })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    fn state_mut(&mut self, hand: Hand) -> &mut HandState {
        &mut self.states[hand as usize]
    }

    pub fn hand_active(&self, hand: Hand) -> bool {
        self.states[hand as usize] == HandState::Active
    }

    /// Ingest the next frame; returns the events decided during this push.
    /// Ends are listed before starts, left hand before right within a kind.
    pub fn push(
        &mut self,
        obs: Observation,
        graph: &SceneGraph,
    ) -> Result<Vec<IntervalEvent>, InteractionError> {
        if let Some((last_frame, last_ts)) = self.last_frame {
            if obs.frame_index <= last_frame {
                return Err(InteractionError::OutOfOrder {
                    last: last_frame,
                    got: obs.frame_index,
                });
            }
            if obs.timestamp_ns <= last_ts {
                return Err(InteractionError::InvalidObservation(format!(
                    "timestamp {} not after previous {}",
                    obs.timestamp_ns, last_ts
                )));
            }
        }
        for hand in Hand::BOTH {
            let h = obs.hands.get(hand);
            if !(0.0..=1.0).contains(&h.interaction_prob) {
                return Err(InteractionError::InvalidObservation(format!(
                    "{} interaction_prob {} outside [0, 1]",
                    hand, h.interaction_prob
                )));
            }
        }
        self.last_frame = Some((obs.frame_index, obs.timestamp_ns));
        self.frames.push_back(obs);
        if self.frames.len() > self.config.buffer_len + 1 + self.config.lookahead_len {
            self.frames.pop_front();
        }
        if self.frames.len() < self.config.lookahead_len + 1 {
            return Ok(Vec::new());
        }

        let decided = self.frames.len() - 1 - self.config.lookahead_len;
        let window = DecisionWindow {
            prior: self.frames.range(..decided).collect(),
            current: &self.frames[decided],
            lookahead: self.frames.range(decided + 1..).collect(),
        };

        let mut starts = Vec::new();
        let mut ends = Vec::new();
        for hand in Hand::BOTH {
            match self.states[hand as usize] {
                HandState::Idle => {
                    if let Some(object_id) = detect_start(&window, graph, &self.config, hand) {
                        starts.push(IntervalEvent {
                            kind: EventKind::Start,
                            hand,
                            frame_index: window.current.frame_index,
                            timestamp_ns: window.current.timestamp_ns,
                            object_id: Some(object_id),
                            hand_position: window.current.hands.get(hand).position,
                        });
                    }
                }
                HandState::Active => {
                    // A positive frame keeps the interaction alive outright;
                    // otherwise the look-ahead decides whether this was just
                    // a detection flicker.
                    if !is_positive(window.current, hand, self.config.tau_o)
                        && detect_end(&window, &self.config, hand)
                    {
                        ends.push(IntervalEvent {
                            kind: EventKind::End,
                            hand,
                            frame_index: window.current.frame_index,
                            timestamp_ns: window.current.timestamp_ns,
                            object_id: None,
                            hand_position: window.current.hands.get(hand).position,
                        });
                    }
                }
            }
        }
        for e in &ends {
            *self.state_mut(e.hand) = HandState::Idle;
        }
        for e in &starts {
            *self.state_mut(e.hand) = HandState::Active;
        }
        let mut events = ends;
        events.append(&mut starts);
        Ok(events)
    }
}

#[cfg(test)]
mod tests;

//! On-disk formats. Scenes, scenarios, and session configs are single JSON
//! documents; observation streams, trajectories, and events are JSON Lines,
//! one record per line in frame order. Poses are written as `[w, x, y, z]`
//! quaternions plus translations in meters, matching the scene format.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{Vector2, Vector3};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{CameraIntrinsics, CameraModel, RigidPose, TrackStatus};
use crate::interaction::{
    EventKind, Hand, HandObservation, Hands, IntervalEvent, Observation, TrackUpdate,
};
use crate::scene_graph::{NodeId, SceneDocument, SceneGraph, SceneGraphError};
use crate::sim::Scenario;
use crate::tracker::{SessionConfig, TrajectoryRow};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Malformed {
        path: String,
        source: serde_json::Error,
    },
    #[error("{path}:{line}: {source}")]
    MalformedLine {
        path: String,
        line: usize,
        source: serde_json::Error,
    },
    #[error(transparent)]
    Graph(#[from] SceneGraphError),
}

fn io_err(path: &Path, source: std::io::Error) -> IoError {
    IoError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<SceneGraph, IoError> {
    let path = path.as_ref();
    let doc: SceneDocument = read_json(path)?;
    Ok(SceneGraph::from_document(doc)?)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, IoError> {
    read_json(path.as_ref())
}

pub fn load_session_config(path: impl AsRef<Path>) -> Result<SessionConfig, IoError> {
    read_json(path.as_ref())
}

pub fn save_session_config(
    path: impl AsRef<Path>,
    config: &SessionConfig,
) -> Result<(), IoError> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(config).expect("config serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|source| IoError::Malformed {
        path: path.display().to_string(),
        source,
    })
}

/// One stream frame as written to disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObservationRecord {
    pub frame_index: u64,
    pub timestamp_ns: i64,
    pub camera: CameraRecord,
    pub hands: HandsRecord,
    pub track_updates: Vec<TrackUpdateRecord>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CameraRecord {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    pub rotation_wxyz: [f64; 4],
    pub translation_xyz: [f64; 3],
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HandsRecord {
    pub left: HandRecord,
    pub right: HandRecord,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HandRecord {
    pub position: Option<[f64; 3]>,
    pub interaction_prob: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrackUpdateRecord {
    pub track_id: u64,
    pub point2d: [f64; 2],
    pub visible: bool,
}

impl From<&Observation> for ObservationRecord {
    fn from(obs: &Observation) -> Self {
        let hand = |h: &HandObservation| HandRecord {
            position: h.position.map(|p| [p.x, p.y, p.z]),
            interaction_prob: h.interaction_prob,
        };
        ObservationRecord {
            frame_index: obs.frame_index,
            timestamp_ns: obs.timestamp_ns,
            camera: CameraRecord {
                fx: obs.camera.intrinsics.fx,
                fy: obs.camera.intrinsics.fy,
                cx: obs.camera.intrinsics.cx,
                cy: obs.camera.intrinsics.cy,
                width: obs.camera.intrinsics.width,
                height: obs.camera.intrinsics.height,
                rotation_wxyz: obs.camera.pose.rotation_wxyz(),
                translation_xyz: obs.camera.pose.translation_xyz(),
            },
            hands: HandsRecord {
                left: hand(&obs.hands.left),
                right: hand(&obs.hands.right),
            },
            track_updates: obs
                .track_updates
                .iter()
                .map(|u| TrackUpdateRecord {
                    track_id: u.track_id,
                    point2d: [u.point2d.x, u.point2d.y],
                    visible: u.visible,
                })
                .collect(),
        }
    }
}

impl From<&ObservationRecord> for Observation {
    fn from(rec: &ObservationRecord) -> Self {
        let hand = |h: &HandRecord| HandObservation {
            position: h.position.map(Vector3::from),
            interaction_prob: h.interaction_prob,
        };
        Observation {
            frame_index: rec.frame_index,
            timestamp_ns: rec.timestamp_ns,
            camera: CameraModel::new(
                CameraIntrinsics::new(
                    rec.camera.fx,
                    rec.camera.fy,
                    rec.camera.cx,
                    rec.camera.cy,
                    rec.camera.width,
                    rec.camera.height,
                ),
                RigidPose::from_wxyz(rec.camera.rotation_wxyz, rec.camera.translation_xyz),
            ),
            hands: Hands {
                left: hand(&rec.hands.left),
                right: hand(&rec.hands.right),
            },
            track_updates: rec
                .track_updates
                .iter()
                .map(|u| TrackUpdate {
                    track_id: u.track_id,
                    point2d: Vector2::new(u.point2d[0], u.point2d[1]),
                    visible: u.visible,
                })
                .collect(),
        }
    }
}

/// One trajectory sample as written to disk.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub frame_index: u64,
    pub timestamp_ns: i64,
    pub object_id: NodeId,
    pub rotation_wxyz: [f64; 4],
    pub translation_xyz: [f64; 3],
    pub status: TrackStatus,
}

impl From<&TrajectoryRow> for TrajectoryRecord {
    fn from(row: &TrajectoryRow) -> Self {
        TrajectoryRecord {
            frame_index: row.frame_index,
            timestamp_ns: row.timestamp_ns,
            object_id: row.object_id,
            rotation_wxyz: row.pose.rotation_wxyz(),
            translation_xyz: row.pose.translation_xyz(),
            status: row.status,
        }
    }
}

impl From<&TrajectoryRecord> for TrajectoryRow {
    fn from(rec: &TrajectoryRecord) -> Self {
        TrajectoryRow {
            frame_index: rec.frame_index,
            timestamp_ns: rec.timestamp_ns,
            object_id: rec.object_id,
            pose: RigidPose::from_wxyz(rec.rotation_wxyz, rec.translation_xyz),
            status: rec.status,
        }
    }
}

/// One interval event as written to disk.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EventRecord {
    pub kind: EventKind,
    pub hand: Hand,
    pub frame_index: u64,
    pub timestamp_ns: i64,
    pub object_id: Option<NodeId>,
    pub hand_position: Option<[f64; 3]>,
}

impl From<&IntervalEvent> for EventRecord {
    fn from(event: &IntervalEvent) -> Self {
        EventRecord {
            kind: event.kind,
            hand: event.hand,
            frame_index: event.frame_index,
            timestamp_ns: event.timestamp_ns,
            object_id: event.object_id,
            hand_position: event.hand_position.map(|p| [p.x, p.y, p.z]),
        }
    }
}

impl From<&EventRecord> for IntervalEvent {
    fn from(rec: &EventRecord) -> Self {
        IntervalEvent {
            kind: rec.kind,
            hand: rec.hand,
            frame_index: rec.frame_index,
            timestamp_ns: rec.timestamp_ns,
            object_id: rec.object_id,
            hand_position: rec.hand_position.map(Vector3::from),
        }
    }
}

pub fn save_stream(path: impl AsRef<Path>, stream: &[Observation]) -> Result<(), IoError> {
    write_jsonl(path.as_ref(), stream.iter().map(ObservationRecord::from))
}

pub fn load_stream(path: impl AsRef<Path>) -> Result<Vec<Observation>, IoError> {
    Ok(read_jsonl::<ObservationRecord>(path.as_ref())?
        .iter()
        .map(Observation::from)
        .collect())
}

pub fn save_trajectories(
    path: impl AsRef<Path>,
    rows: &[TrajectoryRow],
) -> Result<(), IoError> {
    write_jsonl(path.as_ref(), rows.iter().map(TrajectoryRecord::from))
}

pub fn load_trajectories(path: impl AsRef<Path>) -> Result<Vec<TrajectoryRow>, IoError> {
    Ok(read_jsonl::<TrajectoryRecord>(path.as_ref())?
        .iter()
        .map(TrajectoryRow::from)
        .collect())
}

pub fn save_events(path: impl AsRef<Path>, events: &[IntervalEvent]) -> Result<(), IoError> {
    write_jsonl(path.as_ref(), events.iter().map(EventRecord::from))
}

pub fn load_events(path: impl AsRef<Path>) -> Result<Vec<IntervalEvent>, IoError> {
    Ok(read_jsonl::<EventRecord>(path.as_ref())?
        .iter()
        .map(IntervalEvent::from)
        .collect())
}

fn write_jsonl<T: Serialize>(
    path: &Path,
    records: impl Iterator<Item = T>,
) -> Result<(), IoError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut writer = BufWriter::new(file);
    for record in records {
        let line = serde_json::to_string(&record).expect("record serializes");
        writer
            .write_all(line.as_bytes())
            .and_then(|_| writer.write_all(b"\n"))
            .map_err(|e| io_err(path, e))?;
    }
    writer.flush().map_err(|e| io_err(path, e))
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, IoError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|source| IoError::MalformedLine {
            path: path.display().to_string(),
            line: index + 1,
            source,
        })?;
        records.push(record);
    }
    Ok(records)
}

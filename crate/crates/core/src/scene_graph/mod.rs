//! 3D scene graph: object and drawer nodes with poses, plus proximity and
//! containment edges kept consistent under pose updates.
//!
//! Node point sets are stored in a local frame centered at the load-time
//! centroid, so a node's initial pose is identity rotation with translation at
//! that centroid, and the current centroid is always the posed local mean.
//! The graph is single-writer: mutation goes through `&mut self` and bumps a
//! version counter that readers can use to detect staleness.

mod kdtree;

pub use kdtree::KdTree;

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::RigidPose;

pub type NodeId = u32;

/// Limit on the default keypoint subset designated for tracking.
const MAX_DEFAULT_KEYPOINTS: usize = 100;

#[derive(Debug, Error)]
pub enum SceneGraphError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("node {0} references unknown node {1}")]
    DanglingReference(NodeId, NodeId),
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("no node matches the filter")]
    NoMatch,
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("node {0} is not a drawer")]
    NotADrawer(NodeId),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Object,
    Drawer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    /// Directed nearest-neighbor relation, one outgoing edge per node.
    CloseTo,
    /// Drawer to the furniture object it is part of.
    PartOf,
    /// Drawer to an object whose centroid lies inside its content box.
    Contains,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub source: NodeId,
    pub kind: EdgeKind,
    pub target: NodeId,
}

/// Axis-aligned box in a node's local frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl Aabb {
    /// Inclusive on all faces.
    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        p.x >= self.min.x
            && p.x <= self.max.x
            && p.y >= self.min.y
            && p.y <= self.max.y
            && p.z >= self.min.z
            && p.z <= self.max.z
    }
}

#[derive(Debug, Clone)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    pub label: String,
    /// Points exactly as they appeared in the scene file (world frame at the
    /// canonical placement); kept verbatim so save/load round-trips bitwise.
    raw_points: Vec<Vector3<f64>>,
    /// Raw points re-expressed relative to the load-time centroid.
    local_points: Vec<Vector3<f64>>,
    local_centroid: Vector3<f64>,
    keypoint_indices: Vec<usize>,
    pose: RigidPose,
    /// Content volume in the local frame; drawers only.
    content_box: Option<Aabb>,
    /// World-frame box exactly as read from the file, kept for round-trips.
    raw_content_box: Option<BoxRecord>,
    /// Unit outward normal of the drawer front, local frame; drawers only.
    front_normal: Option<Vector3<f64>>,
    raw_front_normal: Option<[f64; 3]>,
    part_of: Option<NodeId>,
    /// Reserved for room/building hierarchy levels; carried but unused.
    parent: Option<NodeId>,
}

impl Node {
    pub fn pose(&self) -> &RigidPose {
        &self.pose
    }

    /// Current world centroid: the posed mean of the local points.
    pub fn centroid(&self) -> Vector3<f64> {
        self.pose.transform_point(&self.local_centroid)
    }

    pub fn local_points(&self) -> &[Vector3<f64>] {
        &self.local_points
    }

    pub fn world_points(&self) -> Vec<Vector3<f64>> {
        self.local_points
            .iter()
            .map(|p| self.pose.transform_point(p))
            .collect()
    }

    /// Designated tracking keypoints as (ordinal, local point) pairs.
    pub fn keypoints(&self) -> impl Iterator<Item = (u32, Vector3<f64>)> + '_ {
        self.keypoint_indices
            .iter()
            .enumerate()
            .map(|(ord, &i)| (ord as u32, self.local_points[i]))
    }

    pub fn keypoint_count(&self) -> usize {
        self.keypoint_indices.len()
    }

    pub fn content_box(&self) -> Option<&Aabb> {
        self.content_box.as_ref()
    }

    pub fn front_normal(&self) -> Option<&Vector3<f64>> {
        self.front_normal.as_ref()
    }

    pub fn part_of(&self) -> Option<NodeId> {
        self.part_of
    }

    /// Largest pairwise distance in the point set.
    pub fn diameter(&self) -> f64 {
        let mut best: f64 = 0.0;
        for i in 0..self.local_points.len() {
            for j in (i + 1)..self.local_points.len() {
                best = best.max((self.local_points[i] - self.local_points[j]).norm());
            }
        }
        best
    }

    /// True when `world_point` falls inside this drawer's content box, which
    /// moves rigidly with the drawer pose.
    pub fn box_contains_world(&self, world_point: &Vector3<f64>) -> bool {
        match &self.content_box {
            Some(b) => b.contains(&self.pose.inverse().transform_point(world_point)),
            None => false,
        }
    }
}

/// Optional node predicate for nearest-neighbor queries.
#[derive(Debug, Clone, Default)]
pub struct NodeFilter {
    pub kind: Option<NodeKind>,
    pub label: Option<String>,
}

impl NodeFilter {
    pub fn accepts(&self, node: &Node) -> bool {
        if let Some(k) = self.kind {
            if node.kind != k {
                return false;
            }
        }
        if let Some(l) = &self.label {
            if &node.label != l {
                return false;
            }
        }
        true
    }
}

#[derive(Debug, Clone, Default)]
pub struct SceneGraph {
    nodes: BTreeMap<NodeId, Node>,
    close_to: BTreeMap<NodeId, NodeId>,
    part_of: BTreeMap<NodeId, NodeId>,
    contains: BTreeSet<(NodeId, NodeId)>,
    index: KdTree,
    version: u64,
}

impl SceneGraph {
    pub fn load_scene(path: impl AsRef<Path>) -> Result<Self, SceneGraphError> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(std::io::BufReader::new(file))
    }

    pub fn from_reader(reader: impl Read) -> Result<Self, SceneGraphError> {
        let doc: SceneDocument = serde_json::from_reader(reader)
            .map_err(|e| SceneGraphError::Schema(e.to_string()))?;
        Self::from_document(doc)
    }

    pub fn from_document(doc: SceneDocument) -> Result<Self, SceneGraphError> {
        let mut nodes = BTreeMap::new();
        for record in doc.nodes {
            let node = Node::from_record(record)?;
            if nodes.contains_key(&node.id) {
                return Err(SceneGraphError::Schema(format!(
                    "duplicate node id {}",
                    node.id
                )));
            }
            nodes.insert(node.id, node);
        }
        // part_of targets must exist and must be objects.
        let mut part_of = BTreeMap::new();
        for node in nodes.values() {
            if let Some(target) = node.part_of {
                let parent = nodes
                    .get(&target)
                    .ok_or(SceneGraphError::DanglingReference(node.id, target))?;
                if node.kind != NodeKind::Drawer {
                    return Err(SceneGraphError::Schema(format!(
                        "part_of on node {} which is not a drawer",
                        node.id
                    )));
                }
                if parent.kind != NodeKind::Object {
                    return Err(SceneGraphError::Schema(format!(
                        "part_of target {target} of drawer {} is not an object",
                        node.id
                    )));
                }
                part_of.insert(node.id, target);
            }
            if let Some(p) = node.parent {
                if !nodes.contains_key(&p) {
                    return Err(SceneGraphError::DanglingReference(node.id, p));
                }
            }
        }
        let mut graph = SceneGraph {
            nodes,
            close_to: BTreeMap::new(),
            part_of,
            contains: BTreeSet::new(),
            index: KdTree::default(),
            version: 0,
        };
        graph.rebuild_index();
        graph.rebuild_derived_edges();
        Ok(graph)
    }

    pub fn save_scene(&self, path: impl AsRef<Path>) -> Result<(), SceneGraphError> {
        let file = std::fs::File::create(path)?;
        let mut writer = std::io::BufWriter::new(file);
        self.to_writer(&mut writer)
    }

    pub fn to_writer(&self, mut writer: impl Write) -> Result<(), SceneGraphError> {
        let doc = self.to_document();
        serde_json::to_writer_pretty(&mut writer, &doc)
            .map_err(|e| SceneGraphError::Schema(e.to_string()))?;
        writer.write_all(b"\n")?;
        Ok(())
    }

    pub fn to_document(&self) -> SceneDocument {
        SceneDocument {
            nodes: self.nodes.values().map(Node::to_record).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.get(&id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.keys().copied()
    }

    /// All edges, sorted by (source, kind, target).
    pub fn edges(&self) -> Vec<Edge> {
        let mut out = Vec::new();
        for (&s, &t) in &self.close_to {
            out.push(Edge {
                source: s,
                kind: EdgeKind::CloseTo,
                target: t,
            });
        }
        for (&s, &t) in &self.part_of {
            out.push(Edge {
                source: s,
                kind: EdgeKind::PartOf,
                target: t,
            });
        }
        for &(s, t) in &self.contains {
            out.push(Edge {
                source: s,
                kind: EdgeKind::Contains,
                target: t,
            });
        }
        out.sort();
        out
    }

    /// Edges touching `id` in either direction.
    pub fn neighbors(&self, id: NodeId) -> Result<Vec<Edge>, SceneGraphError> {
        if !self.nodes.contains_key(&id) {
            return Err(SceneGraphError::UnknownNode(id));
        }
        Ok(self
            .edges()
            .into_iter()
            .filter(|e| e.source == id || e.target == id)
            .collect())
    }

    /// Node with the smallest centroid distance to `position`; exact ties go
    /// to the lowest id.
    pub fn nearest_node(
        &self,
        position: &Vector3<f64>,
        filter: &NodeFilter,
    ) -> Result<(NodeId, f64), SceneGraphError> {
        if self.nodes.is_empty() {
            return Err(SceneGraphError::EmptyGraph);
        }
        let nodes = &self.nodes;
        let accept = |id: NodeId| filter.accepts(&nodes[&id]);
        self.index
            .nearest(position, None, &accept)
            .ok_or(SceneGraphError::NoMatch)
    }

    /// Objects currently inside the drawer's content box.
    pub fn drawer_contents(&self, drawer: NodeId) -> Result<Vec<NodeId>, SceneGraphError> {
        let node = self
            .nodes
            .get(&drawer)
            .ok_or(SceneGraphError::UnknownNode(drawer))?;
        if node.kind != NodeKind::Drawer {
            return Err(SceneGraphError::NotADrawer(drawer));
        }
        Ok(self
            .contains
            .iter()
            .filter(|(d, _)| *d == drawer)
            .map(|&(_, o)| o)
            .collect())
    }

    /// Sets a node's pose and incrementally restores edge consistency.
    /// Returns the new graph version.
    pub fn apply_pose_update(
        &mut self,
        id: NodeId,
        pose: RigidPose,
    ) -> Result<u64, SceneGraphError> {
        let node = self
            .nodes
            .get_mut(&id)
            .ok_or(SceneGraphError::UnknownNode(id))?;
        node.pose = pose;
        self.rebuild_index();
        self.refresh_close_to_after_move(id);
        self.refresh_contains_after_move(id);
        self.version += 1;
        Ok(self.version)
    }

    fn rebuild_index(&mut self) {
        self.index = KdTree::build(self.nodes.values().map(|n| (n.id, n.centroid())));
    }

    /// Recomputes every proximity and containment edge from node state alone.
    fn rebuild_derived_edges(&mut self) {
        self.close_to.clear();
        self.contains.clear();
        let ids: Vec<NodeId> = self.nodes.keys().copied().collect();
        for &id in &ids {
            if let Some((nn, _)) = self.nearest_other(id) {
                self.close_to.insert(id, nn);
            }
        }
        for &d in &ids {
            if self.nodes[&d].kind != NodeKind::Drawer {
                continue;
            }
            for &o in &ids {
                if self.nodes[&o].kind != NodeKind::Object {
                    continue;
                }
                if self.nodes[&d].box_contains_world(&self.nodes[&o].centroid()) {
                    self.contains.insert((d, o));
                }
            }
        }
    }

    fn nearest_other(&self, id: NodeId) -> Option<(NodeId, f64)> {
        self.index
            .nearest(&self.nodes[&id].centroid(), Some(id), &|_| true)
    }

    /// The moved node gets a fresh query; nodes that pointed at it requery;
    /// every remaining node only needs its current target challenged by the
    /// moved node's new position. That is exactly equivalent to a rebuild:
    /// any other node's distances are unchanged, so its winner can only stay
    /// or switch to the moved node.
    fn refresh_close_to_after_move(&mut self, moved: NodeId) {
        if self.nodes.len() < 2 {
            self.close_to.remove(&moved);
            return;
        }
        match self.nearest_other(moved) {
            Some((nn, _)) => {
                self.close_to.insert(moved, nn);
            }
            None => {
                self.close_to.remove(&moved);
            }
        }
        let moved_centroid = self.nodes[&moved].centroid();
        let ids: Vec<NodeId> = self.nodes.keys().copied().collect();
        for n in ids {
            if n == moved {
                continue;
            }
            let current = self.close_to.get(&n).copied();
            match current {
                Some(t) if t == moved => {
                    if let Some((nn, _)) = self.nearest_other(n) {
                        self.close_to.insert(n, nn);
                    }
                }
                Some(t) => {
                    let c = self.nodes[&n].centroid();
                    let d_cur = (self.nodes[&t].centroid() - c).norm_squared();
                    let d_moved = (moved_centroid - c).norm_squared();
                    if d_moved < d_cur || (d_moved == d_cur && moved < t) {
                        self.close_to.insert(n, moved);
                    }
                }
                None => {
                    if let Some((nn, _)) = self.nearest_other(n) {
                        self.close_to.insert(n, nn);
                    }
                }
            }
        }
    }

    fn refresh_contains_after_move(&mut self, moved: NodeId) {
        let ids: Vec<NodeId> = self.nodes.keys().copied().collect();
        match self.nodes[&moved].kind {
            NodeKind::Object => {
                let c = self.nodes[&moved].centroid();
                for d in ids {
                    if self.nodes[&d].kind != NodeKind::Drawer {
                        continue;
                    }
                    if self.nodes[&d].box_contains_world(&c) {
                        self.contains.insert((d, moved));
                    } else {
                        self.contains.remove(&(d, moved));
                    }
                }
            }
            NodeKind::Drawer => {
                for o in ids {
                    if self.nodes[&o].kind != NodeKind::Object {
                        continue;
                    }
                    let c = self.nodes[&o].centroid();
                    if self.nodes[&moved].box_contains_world(&c) {
                        self.contains.insert((moved, o));
                    } else {
                        self.contains.remove(&(moved, o));
                    }
                }
            }
        }
    }
}

/// On-disk pose: `[w, x, y, z]` quaternion plus meters translation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub rotation_wxyz: [f64; 4],
    pub translation: [f64; 3],
}

impl From<&RigidPose> for PoseRecord {
    fn from(pose: &RigidPose) -> Self {
        PoseRecord {
            rotation_wxyz: pose.rotation_wxyz(),
            translation: pose.translation_xyz(),
        }
    }
}

impl From<&PoseRecord> for RigidPose {
    fn from(rec: &PoseRecord) -> Self {
        RigidPose::from_wxyz(rec.rotation_wxyz, rec.translation)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxRecord {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

/// One node as it appears in the scene file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneNodeRecord {
    pub id: NodeId,
    pub kind: NodeKind,
    pub label: String,
    pub points: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keypoints: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content_box: Option<BoxRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub front_normal: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub part_of: Option<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose: Option<PoseRecord>,
}

/// The scene file: a single JSON document listing all nodes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneDocument {
    pub nodes: Vec<SceneNodeRecord>,
}

impl SceneDocument {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, SceneGraphError> {
        let file = std::fs::File::open(path)?;
        serde_json::from_reader(std::io::BufReader::new(file))
            .map_err(|e| SceneGraphError::Schema(e.to_string()))
    }
}

impl Node {
    fn from_record(rec: SceneNodeRecord) -> Result<Self, SceneGraphError> {
        if rec.points.is_empty() {
            return Err(SceneGraphError::Schema(format!(
                "node {} has no points",
                rec.id
            )));
        }
        let raw_points: Vec<Vector3<f64>> = rec
            .points
            .iter()
            .map(|p| Vector3::new(p[0], p[1], p[2]))
            .collect();
        if raw_points.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(SceneGraphError::Schema(format!(
                "node {} has non-finite point coordinates",
                rec.id
            )));
        }
        let canonical_centroid = raw_points.iter().sum::<Vector3<f64>>() / raw_points.len() as f64;
        let local_points: Vec<Vector3<f64>> = raw_points
            .iter()
            .map(|p| p - canonical_centroid)
            .collect();
        let local_centroid =
            local_points.iter().sum::<Vector3<f64>>() / local_points.len() as f64;

        let keypoint_indices = match &rec.keypoints {
            Some(list) => {
                if list.is_empty() {
                    return Err(SceneGraphError::Schema(format!(
                        "node {} has an empty keypoint list",
                        rec.id
                    )));
                }
                for &i in list {
                    if i >= raw_points.len() {
                        return Err(SceneGraphError::Schema(format!(
                            "node {} keypoint index {i} out of range ({} points)",
                            rec.id,
                            raw_points.len()
                        )));
                    }
                }
                list.clone()
            }
            None => default_keypoint_indices(raw_points.len()),
        };

        match rec.kind {
            NodeKind::Drawer => {
                if rec.content_box.is_none() || rec.front_normal.is_none() {
                    return Err(SceneGraphError::Schema(format!(
                        "drawer {} needs content_box and front_normal",
                        rec.id
                    )));
                }
            }
            NodeKind::Object => {
                if rec.content_box.is_some() || rec.front_normal.is_some() {
                    return Err(SceneGraphError::Schema(format!(
                        "object {} must not carry content_box or front_normal",
                        rec.id
                    )));
                }
            }
        }

        let content_box = match &rec.content_box {
            Some(b) => {
                let min = Vector3::new(b.min[0], b.min[1], b.min[2]) - canonical_centroid;
                let max = Vector3::new(b.max[0], b.max[1], b.max[2]) - canonical_centroid;
                if !(min.x <= max.x && min.y <= max.y && min.z <= max.z) {
                    return Err(SceneGraphError::Schema(format!(
                        "drawer {} content_box has min above max",
                        rec.id
                    )));
                }
                Some(Aabb { min, max })
            }
            None => None,
        };
        let front_normal = match &rec.front_normal {
            Some(n) => {
                let v = Vector3::new(n[0], n[1], n[2]);
                if v.norm() < 1e-9 || !v.iter().all(|c| c.is_finite()) {
                    return Err(SceneGraphError::Schema(format!(
                        "drawer {} front_normal is degenerate",
                        rec.id
                    )));
                }
                Some(v.normalize())
            }
            None => None,
        };

        // The canonical placement is identity rotation at the centroid; a
        // stored pose (from a snapshot) overrides it.
        let pose = match &rec.pose {
            Some(p) => RigidPose::from(p),
            None => RigidPose::new(nalgebra::UnitQuaternion::identity(), canonical_centroid),
        };

        Ok(Node {
            id: rec.id,
            kind: rec.kind,
            label: rec.label,
            raw_points,
            local_points,
            local_centroid,
            keypoint_indices,
            pose,
            content_box,
            raw_content_box: rec.content_box,
            front_normal,
            raw_front_normal: rec.front_normal,
            part_of: rec.part_of,
            parent: rec.parent,
        })
    }

    fn to_record(&self) -> SceneNodeRecord {
        SceneNodeRecord {
            id: self.id,
            kind: self.kind,
            label: self.label.clone(),
            points: self.raw_points.iter().map(|p| [p.x, p.y, p.z]).collect(),
            keypoints: Some(self.keypoint_indices.clone()),
            content_box: self.raw_content_box,
            front_normal: self.raw_front_normal,
            part_of: self.part_of,
            parent: self.parent,
            pose: Some(PoseRecord::from(&self.pose)),
        }
    }
}

/// Evenly strided subset when the scene file does not designate keypoints.
/// Derived from the point count alone so every consumer of the same scene
/// arrives at the same subset.
fn default_keypoint_indices(n: usize) -> Vec<usize> {
    let m = n.min(MAX_DEFAULT_KEYPOINTS);
    (0..m).map(|i| i * n / m).collect()
}

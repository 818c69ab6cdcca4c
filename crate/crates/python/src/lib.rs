//! Python bindings over the core crate: rigid poses, scene graph queries,
//! and the simulate / track / evaluate pipeline. Streams and trajectories
//! cross the boundary as files in the library's own formats, so results are
//! interchangeable with the command-line tool; poses and graph queries cross
//! as values.

use std::path::PathBuf;

use nalgebra::Vector3;
use pyo3::exceptions::{PyIOError, PyKeyError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use scenetrack_core::eval;
use scenetrack_core::geometry::{MetricsReport, RigidPose};
use scenetrack_core::io;
use scenetrack_core::scene_graph::{EdgeKind, NodeFilter, NodeId, NodeKind, SceneGraph};
use scenetrack_core::sim;
use scenetrack_core::tracker::{run_session, SessionConfig, TrackerConfig};

fn io_err(e: impl std::fmt::Display) -> PyErr {
    PyIOError::new_err(e.to_string())
}

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn missing_node(id: NodeId) -> PyErr {
    PyKeyError::new_err(format!("no node {id}"))
}

fn kind_name(kind: NodeKind) -> &'static str {
    match kind {
        NodeKind::Object => "object",
        NodeKind::Drawer => "drawer",
    }
}

fn kind_from_name(name: &str) -> PyResult<NodeKind> {
    match name {
        "object" => Ok(NodeKind::Object),
        "drawer" => Ok(NodeKind::Drawer),
        other => Err(value_err(format!(
            "unknown node kind {other:?}, expected \"object\" or \"drawer\""
        ))),
    }
}

fn edge_name(kind: EdgeKind) -> &'static str {
    match kind {
        EdgeKind::CloseTo => "close_to",
        EdgeKind::PartOf => "part_of",
        EdgeKind::Contains => "contains",
    }
}

/// Rotation plus translation, immutable. Rotations are unit quaternions in
/// scalar-first order.
#[pyclass(name = "RigidPose", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyRigidPose {
    inner: RigidPose,
}

#[pymethods]
impl PyRigidPose {
    #[new]
    fn new(rotation_wxyz: [f64; 4], translation: [f64; 3]) -> Self {
        PyRigidPose {
            inner: RigidPose::from_wxyz(rotation_wxyz, translation),
        }
    }

    #[staticmethod]
    fn identity() -> Self {
        PyRigidPose {
            inner: RigidPose::identity(),
        }
    }

    #[getter]
    fn rotation_wxyz(&self) -> [f64; 4] {
        self.inner.rotation_wxyz()
    }

    #[getter]
    fn translation(&self) -> [f64; 3] {
        self.inner.translation_xyz()
    }

    /// `self` applied after `other`.
    fn compose(&self, other: &PyRigidPose) -> Self {
        PyRigidPose {
            inner: self.inner.compose(&other.inner),
        }
    }

    fn inverse(&self) -> Self {
        PyRigidPose {
            inner: self.inner.inverse(),
        }
    }

    fn transform_point(&self, point: [f64; 3]) -> [f64; 3] {
        let p = self.inner.transform_point(&Vector3::from(point));
        [p.x, p.y, p.z]
    }

    fn translation_distance_to(&self, other: &PyRigidPose) -> f64 {
        self.inner.translation_distance_to(&other.inner)
    }

    /// Geodesic rotation distance in radians.
    fn rotation_angle_to(&self, other: &PyRigidPose) -> f64 {
        self.inner.rotation_angle_to(&other.inner)
    }

    fn __repr__(&self) -> String {
        let [w, x, y, z] = self.inner.rotation_wxyz();
        let [tx, ty, tz] = self.inner.translation_xyz();
        format!(
            "RigidPose(rotation_wxyz=[{w:.6}, {x:.6}, {y:.6}, {z:.6}], \
             translation=[{tx:.6}, {ty:.6}, {tz:.6}])"
        )
    }
}

/// The live scene: nodes with model points and poses, plus the derived
/// proximity, part-of, and containment edges.
#[pyclass(name = "SceneGraph")]
struct PySceneGraph {
    inner: SceneGraph,
}

#[pymethods]
impl PySceneGraph {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PySceneGraph {
            inner: io::load_scene(path).map_err(io_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save_scene(path).map_err(io_err)
    }

    fn node_ids(&self) -> Vec<NodeId> {
        self.inner.node_ids().collect()
    }

    fn label(&self, id: NodeId) -> PyResult<String> {
        Ok(self.inner.node(id).ok_or_else(|| missing_node(id))?.label.clone())
    }

    fn kind(&self, id: NodeId) -> PyResult<&'static str> {
        Ok(kind_name(self.inner.node(id).ok_or_else(|| missing_node(id))?.kind))
    }

    fn pose(&self, id: NodeId) -> PyResult<PyRigidPose> {
        Ok(PyRigidPose {
            inner: *self.inner.node(id).ok_or_else(|| missing_node(id))?.pose(),
        })
    }

    fn centroid(&self, id: NodeId) -> PyResult<[f64; 3]> {
        let c = self.inner.node(id).ok_or_else(|| missing_node(id))?.centroid();
        Ok([c.x, c.y, c.z])
    }

    /// Largest pairwise distance between the node's model points.
    fn diameter(&self, id: NodeId) -> PyResult<f64> {
        Ok(self.inner.node(id).ok_or_else(|| missing_node(id))?.diameter())
    }

    /// Nearest node centroid to `point`, optionally restricted by kind
    /// and/or label. Returns `(node_id, distance)`.
    #[pyo3(signature = (point, *, kind=None, label=None))]
    fn nearest(
        &self,
        point: [f64; 3],
        kind: Option<&str>,
        label: Option<String>,
    ) -> PyResult<(NodeId, f64)> {
        let filter = NodeFilter {
            kind: kind.map(kind_from_name).transpose()?,
            label,
        };
        self.inner
            .nearest_node(&Vector3::from(point), &filter)
            .map_err(value_err)
    }

    /// Objects whose centroid currently lies inside the drawer's content box.
    fn contents(&self, drawer: NodeId) -> PyResult<Vec<NodeId>> {
        self.inner.drawer_contents(drawer).map_err(value_err)
    }

    /// Every edge as `(source, kind, target)` with kind one of "close_to",
    /// "part_of", "contains".
    fn edges(&self) -> Vec<(NodeId, &'static str, NodeId)> {
        self.inner
            .edges()
            .into_iter()
            .map(|e| (e.source, edge_name(e.kind), e.target))
            .collect()
    }

    /// Moves a node and restores edge consistency; returns the new graph
    /// version.
    fn apply_pose(&mut self, id: NodeId, pose: &PyRigidPose) -> PyResult<u64> {
        self.inner.apply_pose_update(id, pose.inner).map_err(value_err)
    }

    #[getter]
    fn version(&self) -> u64 {
        self.inner.version()
    }

    fn __len__(&self) -> usize {
        self.inner.node_ids().count()
    }
}

/// Renders a scripted scenario against `graph` into an observation stream
/// and its ground-truth trajectories, written to `stream` and
/// `ground_truth`. Returns `(frame_count, ground_truth_rows)`.
#[pyfunction]
fn simulate(
    graph: &PySceneGraph,
    scenario: PathBuf,
    stream: PathBuf,
    ground_truth: PathBuf,
) -> PyResult<(usize, usize)> {
    let scenario = io::load_scenario(scenario).map_err(io_err)?;
    let output = sim::generate(&graph.inner, &scenario).map_err(value_err)?;
    io::save_stream(stream, &output.stream).map_err(io_err)?;
    io::save_trajectories(ground_truth, &output.ground_truth).map_err(io_err)?;
    Ok((output.stream.len(), output.ground_truth.len()))
}

/// Runs the full tracking session over a recorded stream, updating `graph`
/// in place and writing the estimated trajectories and interaction events.
/// Returns `(trajectory_rows, event_count)`.
#[pyfunction]
#[pyo3(signature = (graph, stream, trajectories, events, *, hand_anchor=true, drawer_constraint=true))]
fn track(
    mut graph: PyRefMut<'_, PySceneGraph>,
    stream: PathBuf,
    trajectories: PathBuf,
    events: PathBuf,
    hand_anchor: bool,
    drawer_constraint: bool,
) -> PyResult<(usize, usize)> {
    let observations = io::load_stream(stream).map_err(io_err)?;
    let config = SessionConfig {
        tracker: TrackerConfig {
            hand_anchor,
            drawer_axis_constraint: drawer_constraint,
            ..TrackerConfig::default()
        },
        ..SessionConfig::default()
    };
    let output = run_session(&mut graph.inner, observations, &config).map_err(value_err)?;
    io::save_trajectories(trajectories, &output.trajectories).map_err(io_err)?;
    io::save_events(events, &output.events).map_err(io_err)?;
    Ok((output.trajectories.len(), output.events.len()))
}

fn report_dict<'py>(py: Python<'py>, report: &MetricsReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("translation_rmse_cm", report.translation_rmse_cm)?;
    d.set_item("rotation_rmse_deg", report.rotation_rmse_deg)?;
    d.set_item("add_pct", report.add_pct)?;
    d.set_item("add_s_pct", report.add_s_pct)?;
    d.set_item("acc_5cm_5deg_pct", report.acc_5cm_5deg_pct)?;
    d.set_item("end_translation_cm", report.end_translation_cm)?;
    d.set_item("end_rotation_deg", report.end_rotation_deg)?;
    d.set_item("frames", report.frames)?;
    Ok(d)
}

/// Scores estimated trajectories against ground truth over the scene's
/// model points. Returns a dict with per-object reports under "objects" and
/// the cross-object mean under "mean".
#[pyfunction]
fn evaluate<'py>(
    py: Python<'py>,
    graph: &PySceneGraph,
    estimate: PathBuf,
    ground_truth: PathBuf,
) -> PyResult<Bound<'py, PyDict>> {
    let est = io::load_trajectories(estimate).map_err(io_err)?;
    let gt = io::load_trajectories(ground_truth).map_err(io_err)?;
    let report = eval::evaluate(&graph.inner, &est, &gt).map_err(value_err)?;
    let out = PyDict::new(py);
    let objects: Vec<Bound<'py, PyDict>> = report
        .objects
        .iter()
        .map(|obj| {
            let d = report_dict(py, &obj.report)?;
            d.set_item("object_id", obj.object_id)?;
            d.set_item("label", obj.label.clone())?;
            Ok(d)
        })
        .collect::<PyResult<_>>()?;
    out.set_item("objects", objects)?;
    out.set_item("mean", report_dict(py, &report.mean)?)?;
    Ok(out)
}

#[pymodule]
fn scenetrack(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRigidPose>()?;
    m.add_class::<PySceneGraph>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(track, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    Ok(())
}

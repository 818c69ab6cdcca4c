//! Command-line front end: simulate scenarios, track streams, evaluate
//! trajectories, and query scene snapshots. Every command validates all of
//! its inputs before writing any output file.

use std::fmt::Write as _;
use std::io::Write as IoWrite;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use nalgebra::Vector3;

use scenetrack_core::eval::{evaluate, EvalError};
use scenetrack_core::io::{
    load_scenario, load_scene, load_session_config, load_stream, load_trajectories, save_events,
    save_stream, save_trajectories, IoError,
};
use scenetrack_core::scene_graph::{
    EdgeKind, NodeFilter, NodeId, NodeKind, SceneGraph, SceneGraphError,
};
use scenetrack_core::sim::generate;
use scenetrack_core::tracker::{run_session, SessionConfig};

#[derive(Parser)]
#[command(name = "scenetrack", version, about = "Dynamic scene graph tracking toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a scenario into an observation stream and its ground truth.
    Simulate {
        /// Scenario file; its `scene` path resolves relative to this file.
        scenario: PathBuf,
        /// Directory for stream.jsonl and ground_truth.jsonl.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run detection and tracking over a stream, updating the scene.
    Track {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        stream: PathBuf,
        /// Directory for trajectories.jsonl, events.jsonl, scene_final.json.
        #[arg(long)]
        out_dir: PathBuf,
        /// Session config file; defaults apply for missing keys.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Disable the hand-anchored translation rule.
        #[arg(long)]
        no_hand_anchor: bool,
        /// Disable the drawer sliding-axis constraint.
        #[arg(long)]
        no_drawer_constraint: bool,
        /// Override the pose solver's random seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Score an estimated trajectory against ground truth.
    Eval {
        #[arg(long)]
        est: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        scene: PathBuf,
        /// Emit the report as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Query a scene snapshot.
    Graph {
        #[command(subcommand)]
        query: GraphQuery,
    },
}

#[derive(Subcommand)]
enum GraphQuery {
    /// Nearest node to a point, optionally filtered by kind or label.
    Nearest {
        #[arg(long)]
        scene: PathBuf,
        /// Query position as x,y,z in meters.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        point: Vec<f64>,
        #[arg(long)]
        kind: Option<String>,
        #[arg(long)]
        label: Option<String>,
    },
    /// Objects currently inside a drawer.
    Contents {
        #[arg(long)]
        scene: PathBuf,
        drawer: NodeId,
    },
    /// Edges touching a node.
    Neighbors {
        #[arg(long)]
        scene: PathBuf,
        node: NodeId,
    },
    /// Edge and pose changes between two snapshots.
    Diff { before: PathBuf, after: PathBuf },
}

/// Input problems exit 1, failures during processing or output exit 2. A
/// closed stdout pipe ends the run quietly like any well-behaved filter.
enum CliError {
    Input(String),
    Runtime(String),
    Pipe,
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<SceneGraphError> for CliError {
    fn from(e: SceneGraphError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            CliError::Pipe
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let mut out = std::io::BufWriter::new(stdout.lock());
    let result = run(cli.command, &mut out).and_then(|()| Ok(out.flush()?));
    match result {
        Ok(()) | Err(CliError::Pipe) => ExitCode::SUCCESS,
        Err(CliError::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command, out: &mut impl IoWrite) -> Result<(), CliError> {
    match command {
        Command::Simulate { scenario, out_dir } => cmd_simulate(out, &scenario, &out_dir),
        Command::Track {
            scene,
            stream,
            out_dir,
            config,
            no_hand_anchor,
            no_drawer_constraint,
            seed,
        } => {
            let mut session = match config {
                Some(path) => load_session_config(path)?,
                None => SessionConfig::default(),
            };
            if no_hand_anchor {
                session.tracker.hand_anchor = false;
            }
            if no_drawer_constraint {
                session.tracker.drawer_axis_constraint = false;
            }
            if let Some(seed) = seed {
                session.tracker.ransac.seed = seed;
            }
            cmd_track(out, &scene, &stream, &out_dir, &session)
        }
        Command::Eval {
            est,
            gt,
            scene,
            json,
        } => cmd_eval(out, &est, &gt, &scene, json),
        Command::Graph { query } => cmd_graph(out, query),
    }
}

fn cmd_simulate(
    out: &mut impl IoWrite,
    scenario_path: &Path,
    out_dir: &Path,
) -> Result<(), CliError> {
    let scenario = load_scenario(scenario_path)?;
    if scenario.scene.is_empty() {
        return Err(CliError::Input(format!(
            "{}: scenario names no scene file",
            scenario_path.display()
        )));
    }
    let scene_path = scenario_path
        .parent()
        .unwrap_or(Path::new("."))
        .join(&scenario.scene);
    let graph = load_scene(&scene_path)?;
    let output = generate(&graph, &scenario).map_err(|e| CliError::Input(e.to_string()))?;

    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", out_dir.display())))?;
    let stream_path = out_dir.join("stream.jsonl");
    let gt_path = out_dir.join("ground_truth.jsonl");
    save_stream(&stream_path, &output.stream).map_err(runtime)?;
    save_trajectories(&gt_path, &output.ground_truth).map_err(runtime)?;
    writeln!(
        out,
        "simulated {} frames, {} ground-truth rows",
        output.stream.len(),
        output.ground_truth.len()
    )?;
    writeln!(out, "wrote {}", stream_path.display())?;
    writeln!(out, "wrote {}", gt_path.display())?;
    Ok(())
}

fn cmd_track(
    out: &mut impl IoWrite,
    scene_path: &Path,
    stream_path: &Path,
    out_dir: &Path,
    config: &SessionConfig,
) -> Result<(), CliError> {
    let mut graph = load_scene(scene_path)?;
    let stream = load_stream(stream_path)?;
    let frames = stream.len();

    let started = Instant::now();
    let output = run_session(&mut graph, stream, config)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let elapsed = started.elapsed().as_secs_f64();

    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", out_dir.display())))?;
    let trajectories_path = out_dir.join("trajectories.jsonl");
    let events_path = out_dir.join("events.jsonl");
    let scene_out = out_dir.join("scene_final.json");
    save_trajectories(&trajectories_path, &output.trajectories).map_err(runtime)?;
    save_events(&events_path, &output.events).map_err(runtime)?;
    graph
        .save_scene(&scene_out)
        .map_err(|e| CliError::Runtime(e.to_string()))?;

    for line in &output.log {
        eprintln!("note: {line}");
    }
    let fps = if elapsed > 0.0 {
        frames as f64 / elapsed
    } else {
        f64::INFINITY
    };
    writeln!(
        out,
        "tracked {frames} frames in {elapsed:.3} s ({fps:.1} frames/s), \
         {} events, {} trajectory rows, scene revision {}",
        output.events.len(),
        output.trajectories.len(),
        graph.version()
    )?;
    writeln!(out, "wrote {}", trajectories_path.display())?;
    writeln!(out, "wrote {}", events_path.display())?;
    writeln!(out, "wrote {}", scene_out.display())?;
    Ok(())
}

fn cmd_eval(
    out: &mut impl IoWrite,
    est: &Path,
    gt: &Path,
    scene: &Path,
    json: bool,
) -> Result<(), CliError> {
    let graph = load_scene(scene)?;
    let est_rows = load_trajectories(est)?;
    let gt_rows = load_trajectories(gt)?;
    let report = evaluate(&graph, &est_rows, &gt_rows)
        .map_err(|e: EvalError| CliError::Input(e.to_string()))?;
    if json {
        let text = serde_json::to_string_pretty(&report).expect("report serializes");
        writeln!(out, "{text}")?;
    } else {
        write!(out, "{}", report.pretty_table())?;
    }
    Ok(())
}

fn cmd_graph(out: &mut impl IoWrite, query: GraphQuery) -> Result<(), CliError> {
    match query {
        GraphQuery::Nearest {
            scene,
            point,
            kind,
            label,
        } => {
            let graph = load_scene(&scene)?;
            if point.len() != 3 {
                return Err(CliError::Input(format!(
                    "--point needs x,y,z (got {} values)",
                    point.len()
                )));
            }
            let position = Vector3::new(point[0], point[1], point[2]);
            let filter = NodeFilter {
                kind: kind.as_deref().map(parse_kind).transpose()?,
                label,
            };
            let (id, distance) = graph.nearest_node(&position, &filter)?;
            let node = graph.node(id).unwrap();
            writeln!(out, "{id} {} ({distance:.4} m)", node.label)?;
            Ok(())
        }
        GraphQuery::Contents { scene, drawer } => {
            let graph = load_scene(&scene)?;
            for id in graph.drawer_contents(drawer)? {
                writeln!(out, "{id} {}", graph.node(id).unwrap().label)?;
            }
            Ok(())
        }
        GraphQuery::Neighbors { scene, node } => {
            let graph = load_scene(&scene)?;
            for edge in graph.neighbors(node)? {
                writeln!(
                    out,
                    "{} -{}-> {}",
                    edge.source,
                    edge_name(edge.kind),
                    edge.target
                )?;
            }
            Ok(())
        }
        GraphQuery::Diff { before, after } => {
            let a = load_scene(&before)?;
            let b = load_scene(&after)?;
            write!(out, "{}", graph_diff(&a, &b))?;
            Ok(())
        }
    }
}

fn parse_kind(text: &str) -> Result<NodeKind, CliError> {
    match text {
        "object" => Ok(NodeKind::Object),
        "drawer" => Ok(NodeKind::Drawer),
        other => Err(CliError::Input(format!(
            "unknown node kind {other:?} (expected object or drawer)"
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

/// Lists edges present in exactly one snapshot and nodes whose pose moved.
fn graph_diff(before: &SceneGraph, after: &SceneGraph) -> String {
    let mut out = String::new();
    let edges_a = before.edges();
    let edges_b = after.edges();
    for edge in &edges_a {
        if !edges_b.contains(edge) {
            writeln!(out, "- {} -{}-> {}", edge.source, edge_name(edge.kind), edge.target)
                .unwrap();
        }
    }
    for edge in &edges_b {
        if !edges_a.contains(edge) {
            writeln!(out, "+ {} -{}-> {}", edge.source, edge_name(edge.kind), edge.target)
                .unwrap();
        }
    }
    for node in before.nodes() {
        let Some(moved) = after.node(node.id) else {
            writeln!(out, "- node {} {}", node.id, node.label).unwrap();
            continue;
        };
        let dt = node.pose().translation_distance_to(moved.pose());
        let dr = node.pose().rotation_angle_to(moved.pose());
        if dt > 1e-12 || dr > 1e-12 {
            writeln!(
                out,
                "~ node {} {} moved {dt:.4} m, {:.2} deg",
                node.id,
                node.label,
                dr.to_degrees()
            )
            .unwrap();
        }
    }
    for node in after.nodes() {
        if before.node(node.id).is_none() {
            writeln!(out, "+ node {} {}", node.id, node.label).unwrap();
        }
    }
    out
}

fn runtime(e: IoError) -> CliError {
    CliError::Runtime(e.to_string())
}

//! Pipeline stages. Each stage reads and writes files, and each has a pure
//! counterpart that the file-level entry point wraps.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use flowmap_core::evaluation::evaluate_scene_both;
use flowmap_core::planner::EdgeCost;
use flowmap_core::{
    aggregate, plan, AggregateReport, FlowDescriptor, FlowMapper, GridModel, GridSpec, Mode, NavGraph, NodeId,
    PlannerWeights, Position, SceneReport, TopologyEvent,
};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::formats;
use crate::placement::{place_nodes, PlacementParams};
use crate::scene::SceneConfig;
use crate::simulate::{generate_dataset, generate_scene, inject_topology_events, Observation};

/// Everything the simulator produces for one scene.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneBundle {
    pub config: SceneConfig,
    pub stream: Vec<Observation>,
    pub graph: NavGraph,
    pub events: Vec<TopologyEvent>,
}

/// Built models for one scene: the graph-bound map and the grid baseline fed
/// from the same replay.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSnapshot {
    pub scene: String,
    pub duration: f64,
    pub graph_model: FlowMapper,
    pub grid_model: GridModel,
    /// Observations outside the grid bounds.
    pub grid_dropped: u64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub scenes: Vec<String>,
}

pub fn scene_template(cfg: &RunConfig) -> Result<SceneConfig> {
    match &cfg.dataset.template {
        Some(path) => {
            let scene: SceneConfig = formats::read_toml(path)?;
            scene.validate()?;
            Ok(scene)
        }
        None => Ok(SceneConfig::two_region("scene", cfg.seed)),
    }
}

fn placement(cfg: &RunConfig) -> PlacementParams {
    PlacementParams {
        spacing: cfg.placement.spacing,
        neighbors: cfg.placement.neighbors,
        ..PlacementParams::default()
    }
}

/// Generates every scene of the dataset together with its node layout and
/// topology events.
pub fn simulate(cfg: &RunConfig) -> Result<Vec<SceneBundle>> {
    let template = scene_template(cfg)?;
    let scenes = generate_dataset(cfg.dataset.scenes, &template, cfg.seed)?;
    scenes
        .into_iter()
        .map(|config| {
            let stream = generate_scene(&config)?;
            let graph = place_nodes(&config, &placement(cfg), config.seed ^ 0x9e37_79b9_7f4a_7c15)?;
            let window = (cfg.model.tau.min(config.duration), config.duration);
            let events =
                inject_topology_events(config.seed.rotate_left(17), &graph, cfg.dataset.event_density, window)?;
            Ok(SceneBundle {
                config,
                stream,
                graph,
                events,
            })
        })
        .collect()
}

pub struct ScenePaths {
    pub scene: PathBuf,
    pub stream: PathBuf,
    pub graph: PathBuf,
    pub events: PathBuf,
}

impl ScenePaths {
    pub fn in_dir(dir: &Path, id: &str) -> Self {
        Self {
            scene: dir.join(format!("{id}.scene.toml")),
            stream: dir.join(format!("{id}.stream.csv")),
            graph: dir.join(format!("{id}.graph.json")),
            events: dir.join(format!("{id}.events.csv")),
        }
    }
}

pub fn model_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.model.json"))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn write_bundle(dir: &Path, bundle: &SceneBundle) -> Result<()> {
    let paths = ScenePaths::in_dir(dir, &bundle.config.id);
    formats::write_toml(&paths.scene, &bundle.config)?;
    formats::write_stream(formats::create(&paths.stream)?, &bundle.stream)?;
    formats::write_json(&paths.graph, &bundle.graph)?;
    formats::write_events(formats::create(&paths.events)?, &bundle.events)
}

pub fn read_bundle(dir: &Path, id: &str) -> Result<SceneBundle> {
    let paths = ScenePaths::in_dir(dir, id);
    let config: SceneConfig = formats::read_toml(&paths.scene)?;
    config.validate()?;
    let stream = formats::read_stream(&paths.stream, formats::open(&paths.stream)?)?;
    let graph = formats::read_json(&paths.graph)?;
    let events = if paths.events.exists() {
        formats::read_events(&paths.events, formats::open(&paths.events)?)?
    } else {
        Vec::new()
    };
    Ok(SceneBundle {
        config,
        stream,
        graph,
        events,
    })
}

pub fn run_simulate(cfg: &RunConfig, out: &Path) -> Result<Manifest> {
    ensure_dir(out)?;
    let mut manifest = Manifest::default();
    for bundle in simulate(cfg)? {
        write_bundle(out, &bundle)?;
        manifest.scenes.push(bundle.config.id.clone());
    }
    formats::write_json(&out.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// Grid covering the scene's free space, nodes and observations, padded by
/// the configured margin.
pub fn grid_for(cfg: &RunConfig, bundle: &SceneBundle) -> Result<GridSpec> {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    let mut include = |x: f64, y: f64| {
        lo = [lo[0].min(x), lo[1].min(y)];
        hi = [hi[0].max(x), hi[1].max(y)];
    };
    for r in &bundle.config.regions {
        include(r.min[0], r.min[1]);
        include(r.max[0], r.max[1]);
    }
    for n in bundle.graph.nodes() {
        include(n.position.x, n.position.y);
    }
    for o in &bundle.stream {
        include(o.position.x, o.position.y);
    }
    if !lo[0].is_finite() {
        lo = [0.0; 2];
        hi = [0.0; 2];
    }
    let m = cfg.grid.margin;
    let res = cfg.grid.resolution;
    let snap = |v: f64| (v / res).floor() * res;
    Ok(GridSpec::covering(
        snap(lo[0] - m),
        snap(lo[1] - m),
        hi[0] + m,
        hi[1] + m,
        res,
        cfg.grid.max_cells,
    )?)
}

/// Replays one scene into both models: events before observations at equal
/// timestamps, windows closed on the way, spectra finalized at the end.
pub fn build(cfg: &RunConfig, bundle: &SceneBundle) -> Result<ModelSnapshot> {
    let duration = bundle.config.duration;
    let params = cfg.model_params(duration)?;
    let spec = grid_for(cfg, bundle)?;
    let mut graph_model = FlowMapper::new(params.clone(), bundle.graph.clone())?;
    let mut grid_model = GridModel::new(spec, params.bins, params.temporal.clone())?;
    let mut grid_dropped = 0;
    let mut events = bundle.events.iter().peekable();
    for o in &bundle.stream {
        while let Some(e) = events.next_if(|e| e.t <= o.t) {
            graph_model.apply_event(e)?;
        }
        graph_model.observe(&o.position, o.theta, o.t, 1.0)?;
        if spec.index_of(&o.position).is_some() {
            grid_model.observe(&o.position, o.theta, o.t, 1.0)?;
        } else {
            grid_dropped += 1;
        }
    }
    for e in events {
        graph_model.apply_event(e)?;
    }
    graph_model.finalize(duration)?;
    grid_model.finalize(duration)?;
    Ok(ModelSnapshot {
        scene: bundle.config.id.clone(),
        duration,
        graph_model,
        grid_model,
        grid_dropped,
    })
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    formats::read_json(&dir.join("manifest.json"))
}

/// Builds the selected scenes (all when `only` is empty) and writes one
/// snapshot per scene.
pub fn run_build(cfg: &RunConfig, data: &Path, out: &Path, only: &[String]) -> Result<Vec<PathBuf>> {
    let manifest = read_manifest(data)?;
    for id in only {
        if !manifest.scenes.contains(id) {
            return Err(Error::Usage(format!("scene `{id}` is not in {}", data.display())));
        }
    }
    ensure_dir(out)?;
    let mut written = Vec::new();
    for id in &manifest.scenes {
        if !only.is_empty() && !only.contains(id) {
            continue;
        }
        let snapshot = build(cfg, &read_bundle(data, id)?)?;
        let path = model_path(out, id);
        formats::write_json(&path, &snapshot)?;
        formats::write_cells_jsonl(
            formats::create(&out.join(format!("{id}.cells.jsonl")))?,
            snapshot.graph_model.map(),
        )?;
        let grid_dump = snapshot
            .grid_model
            .field(Mode::Historical, 0.0)?
            .descriptors(&snapshot.graph_model.params().descriptor);
        formats::write_descriptor_dump(formats::create(&out.join(format!("{id}.grid.csv")))?, &grid_dump)?;
        written.push(path);
    }
    Ok(written)
}

pub fn evaluate(cfg: &RunConfig, snapshots: &[ModelSnapshot]) -> Result<(Vec<SceneReport>, AggregateReport)> {
    let reports = snapshots
        .iter()
        .map(|s| {
            evaluate_scene_both(s.scene.clone(), &s.graph_model, &s.grid_model, cfg.t_eval(s.duration))
                .map_err(Error::from)
        })
        .collect::<Result<Vec<_>>>()?;
    let agg = aggregate(&reports)?;
    Ok((reports, agg))
}

/// Every snapshot in `dir`, in file-name order.
pub fn read_snapshots(dir: &Path) -> Result<Vec<ModelSnapshot>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.to_string_lossy().ends_with(".model.json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::format(dir, "no model snapshots found"));
    }
    paths.iter().map(|p| formats::read_json(p)).collect()
}

pub fn run_evaluate(cfg: &RunConfig, models: &Path, out: &Path) -> Result<String> {
    let snapshots = read_snapshots(models)?;
    let (reports, agg) = evaluate(cfg, &snapshots)?;
    ensure_dir(out)?;
    let text = formats::render_report(&agg);
    std::fs::write(out.join("report.txt"), &text).map_err(|e| Error::io(out.join("report.txt"), e))?;
    formats::write_json(&out.join("aggregate.json"), &agg)?;
    formats::write_scene_reports(formats::create(&out.join("scenes.jsonl"))?, &reports)?;
    Ok(text)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub scene: String,
    pub mode: Mode,
    /// Prediction time used for predicted descriptors, seconds.
    pub t: f64,
    pub weights: PlannerWeights,
    pub path: Vec<NodeId>,
    pub edges: Vec<EdgeCost>,
    pub total: f64,
}

pub fn plan_on(
    snapshot: &ModelSnapshot,
    start: NodeId,
    goal: NodeId,
    weights: &PlannerWeights,
    mode: Mode,
    t: f64,
) -> Result<(PlanRecord, BTreeMap<NodeId, FlowDescriptor>)> {
    let model = &snapshot.graph_model;
    let descriptors = model.node_descriptors(mode, t)?;
    let p = plan(model.graph(), start, goal, weights, &descriptors)?;
    Ok((
        PlanRecord {
            scene: snapshot.scene.clone(),
            mode,
            t,
            weights: *weights,
            path: p.path,
            edges: p.edges,
            total: p.total,
        },
        descriptors,
    ))
}

pub fn run_plan(
    cfg: &RunConfig,
    model: &Path,
    start: NodeId,
    goal: NodeId,
    mode: Mode,
    t: Option<f64>,
    out: &Path,
) -> Result<PlanRecord> {
    let snapshot: ModelSnapshot = formats::read_json(model)?;
    let t = t.unwrap_or_else(|| cfg.t_eval(snapshot.duration));
    let (record, descriptors) = plan_on(&snapshot, start, goal, &cfg.planner, mode, t)?;
    ensure_dir(out)?;
    formats::write_json(&out.join(format!("{}.plan.json", snapshot.scene)), &record)?;
    let nodes: Vec<(NodeId, Position, Option<FlowDescriptor>)> = snapshot
        .graph_model
        .graph()
        .nodes()
        .map(|n| (n.id, n.position, descriptors.get(&n.id).copied()))
        .collect();
    formats::write_overlay(
        formats::create(&out.join(format!("{}.overlay.csv", snapshot.scene)))?,
        &nodes,
        &record.path,
    )?;
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.dataset.scenes = 2;
        cfg
    }

    fn short(mut b: SceneBundle, until: f64) -> SceneBundle {
        b.stream.retain(|o| o.t < until);
        b.config.duration = until;
        b.events.retain(|e| e.t < until);
        b
    }

    #[test]
    fn empty_stream_gives_empty_model() {
        let cfg = small_cfg();
        let mut bundle = simulate(&cfg).unwrap().remove(0);
        bundle.stream.clear();
        bundle.events.clear();
        let snap = build(&cfg, &bundle).unwrap();
        assert_eq!(snap.graph_model.map().occupied_count(), 0);
        assert_eq!(snap.graph_model.temporal().channel_count(), 0);
        assert_eq!(snap.grid_model.total_mass(), 0.0);
    }

    #[test]
    fn build_conserves_and_is_deterministic() {
        let cfg = small_cfg();
        let bundle = short(simulate(&cfg).unwrap().remove(0), 300.0);
        let a = build(&cfg, &bundle).unwrap();
        let b = build(&cfg, &bundle).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let n = bundle.stream.len() as f64;
        assert_eq!(a.graph_model.observed_weight(), n);
        assert_eq!(a.graph_model.stored_weight(), n);
        assert_eq!(a.grid_model.total_mass() + a.grid_dropped as f64, n);
        a.graph_model
            .ownership()
            .audit(a.graph_model.graph(), a.graph_model.map())
            .unwrap();
    }

    #[test]
    fn removal_rematerializes_a_cell() {
        let cfg = small_cfg();
        let mut bundle = short(simulate(&cfg).unwrap().remove(0), 300.0);
        bundle.events.clear();
        let before = build(&cfg, &bundle).unwrap();
        let delta = before.graph_model.params().delta;
        let (owner, key) = before
            .graph_model
            .graph()
            .nodes()
            .filter(|n| n.owned_total() > 0.0)
            .map(|n| (n.id, flowmap_core::hash_key(&n.position, delta).unwrap()))
            .find(|(id, key)| before.graph_model.graph().node(*id).unwrap().bound_keys().contains(key))
            .expect("some node owns the cell under it");
        assert!(before.graph_model.map().lookup(&key).is_none());
        bundle.events.push(TopologyEvent {
            t: 300.0,
            node: owner,
            change: flowmap_core::TopologyChange::Remove,
        });
        let after = build(&cfg, &bundle).unwrap();
        assert!(!after.graph_model.graph().contains(owner));
        let cell = after
            .graph_model
            .map()
            .lookup(&key)
            .expect("history is back in hash space");
        assert!(cell.histogram.total() > 0.0);
        assert_eq!(after.graph_model.stored_weight(), bundle.stream.len() as f64);
    }
}

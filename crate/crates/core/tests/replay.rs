use std::f64::consts::PI;

use flowmap_core::temporal::geometric_candidates;
use flowmap_core::{
    evaluate_scene, FlowMapper, GridModel, GridSpec, Mode, ModelParams, NavGraph, NodeId, Orientation, Position,
    TemporalConfig, TopologyChange, TopologyEvent,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DURATION: f64 = 300.0;

fn params() -> ModelParams {
    ModelParams {
        tau: 10.0,
        temporal: TemporalConfig {
            candidates: geometric_candidates(DURATION, 4).unwrap(),
            order: 2,
            update_interval: 5.0,
        },
        ..ModelParams::for_duration(DURATION).unwrap()
    }
}

/// Two walkers circling a 10 m square, one clockwise and one not.
fn stream() -> Vec<(f64, Position, Orientation)> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut out = Vec::new();
    let mut t = 0.0f64;
    while t < DURATION {
        for (sign, speed) in [(1.0f64, 0.8), (-1.0, 1.1)] {
            let a = sign * t * speed / 5.0;
            let p = Position::new(
                5.0 + 4.0 * a.cos() + rng.random_range(-0.05..0.05),
                5.0 + 4.0 * a.sin() + rng.random_range(-0.05..0.05),
                0.0,
            );
            let heading = a + sign * PI / 2.0;
            out.push((t, p, Orientation::new(heading).unwrap()));
        }
        t += 0.5;
    }
    out
}

fn replay(graph: NavGraph, events: &[TopologyEvent]) -> (FlowMapper, GridModel) {
    let p = params();
    let spec = GridSpec::new(0.0, 0.0, p.delta, 20, 20).unwrap();
    let mut grid = GridModel::new(spec, p.bins, p.temporal.clone()).unwrap();
    let mut mapper = FlowMapper::new(p, graph).unwrap();
    let mut pending = events.iter().peekable();
    for (t, pos, theta) in stream() {
        while let Some(e) = pending.next_if(|e| e.t <= t) {
            mapper.apply_event(e).unwrap();
        }
        mapper.observe(&pos, theta, t, 1.0).unwrap();
        grid.observe(&pos, theta, t, 1.0).unwrap();
    }
    mapper.finalize(DURATION).unwrap();
    grid.finalize(DURATION).unwrap();
    (mapper, grid)
}

#[test]
fn graphless_replay_matches_grid_exactly() {
    let (mapper, grid) = replay(NavGraph::new(), &[]);
    assert_eq!(mapper.stored_weight(), grid.total_mass());
    for mode in [Mode::Historical, Mode::Predicted] {
        let r = evaluate_scene(&mapper, &grid, mode, DURATION / 2.0).unwrap();
        assert!(r.entropy.js < 1e-12 && r.flow.js < 1e-12, "{mode:?}: {r:?}");
        assert!(r.direction.wasserstein_deg < 1e-9, "{mode:?}: {r:?}");
    }
}

#[test]
fn churned_replay_conserves_mass() {
    let mut graph = NavGraph::new();
    for i in 0..8u64 {
        let a = i as f64 * PI / 4.0;
        graph
            .insert_node(NodeId(i), Position::new(5.0 + 4.0 * a.cos(), 5.0 + 4.0 * a.sin(), 0.0))
            .unwrap();
    }
    let events = [
        TopologyEvent {
            t: 60.0,
            node: NodeId(2),
            change: TopologyChange::Reposition(Position::new(5.2, 9.1, 0.0)),
        },
        TopologyEvent {
            t: 120.0,
            node: NodeId(5),
            change: TopologyChange::Remove,
        },
        TopologyEvent {
            t: 150.0,
            node: NodeId(8),
            change: TopologyChange::Insert(Position::new(1.0, 5.0, 0.0)),
        },
        TopologyEvent {
            t: 200.0,
            node: NodeId(0),
            change: TopologyChange::Remove,
        },
    ];
    let (mapper, grid) = replay(graph, &events);
    assert_eq!(mapper.observed_weight(), grid.total_mass());
    assert_eq!(mapper.stored_weight(), mapper.observed_weight());
    mapper.ownership().audit(mapper.graph(), mapper.map()).unwrap();
    assert!(mapper.graph().nodes().any(|n| !n.bound_keys().is_empty()));
    let r = evaluate_scene(&mapper, &grid, Mode::Historical, DURATION / 2.0).unwrap();
    assert!(r.overlap_cells > 0);
}

#[test]
fn model_survives_serde_round_trip() {
    let mut graph = NavGraph::new();
    graph.insert_node(NodeId(0), Position::new(9.0, 5.0, 0.0)).unwrap();
    graph.insert_node(NodeId(1), Position::new(1.0, 5.0, 0.0)).unwrap();
    graph.add_edge(NodeId(0), NodeId(1)).unwrap();
    let (mapper, grid) = replay(graph, &[]);
    let text = serde_json::to_string(&mapper).unwrap();
    let back: FlowMapper = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string(&back).unwrap(), text);
    for t in [0.0, 77.7, 1e4] {
        let a = mapper.node_prediction(NodeId(0), t).unwrap();
        let b = back.node_prediction(NodeId(0), t).unwrap();
        assert_eq!(a, b);
    }
    let grid_text = serde_json::to_string(&grid).unwrap();
    let grid_back: GridModel = serde_json::from_str(&grid_text).unwrap();
    assert_eq!(grid_back.total_mass(), grid.total_mass());
}

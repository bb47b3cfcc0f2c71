//! Navigational node placement over a scene's free space.

use flowmap_core::{NavGraph, NodeId, Position};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scene::SceneConfig;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlacementParams {
    /// Minimum spacing between nodes, meters.
    pub spacing: f64,
    /// Edges per node toward its nearest visible neighbours.
    pub neighbors: usize,
    /// Longest edge, in multiples of `spacing`.
    pub max_edge: f64,
    /// Rejection samples drawn per square meter.
    pub samples_per_m2: f64,
}

impl Default for PlacementParams {
    fn default() -> Self {
        Self {
            spacing: 1.0,
            neighbors: 4,
            max_edge: 2.5,
            samples_per_m2: 60.0,
        }
    }
}

/// Dart-throwing Poisson-disk sampling of the free regions, then edges to the
/// nearest visible neighbours.
pub fn place_nodes(scene: &SceneConfig, params: &PlacementParams, seed: u64) -> Result<NavGraph> {
    if !(params.spacing > 0.0 && params.max_edge > 0.0 && params.samples_per_m2 > 0.0) {
        return Err(Error::Usage("placement parameters must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points: Vec<[f64; 2]> = Vec::new();
    let min_sq = params.spacing * params.spacing;
    for region in &scene.regions {
        let darts = (region.area() * params.samples_per_m2).ceil() as usize;
        for _ in 0..darts {
            let x = rng.random_range(region.min[0]..=region.max[0]);
            let y = rng.random_range(region.min[1]..=region.max[1]);
            let clear = points
                .iter()
                .all(|p| (p[0] - x) * (p[0] - x) + (p[1] - y) * (p[1] - y) >= min_sq);
            if clear {
                points.push([x, y]);
            }
        }
    }
    let mut graph = NavGraph::new();
    for (i, p) in points.iter().enumerate() {
        graph.insert_node(NodeId(i as u64), Position::new(p[0], p[1], 0.0))?;
    }
    connect_nearest(&mut graph, scene, params.neighbors, params.max_edge * params.spacing)?;
    Ok(graph)
}

/// Adds edges from every node to its `k` nearest neighbours within `reach`
/// that it can see.
pub fn connect_nearest(graph: &mut NavGraph, scene: &SceneConfig, k: usize, reach: f64) -> Result<()> {
    let nodes: Vec<(NodeId, Position)> = graph.nodes().map(|n| (n.id, n.position)).collect();
    for &(a, pa) in &nodes {
        let mut near: Vec<(f64, NodeId)> = nodes
            .iter()
            .filter(|(b, pb)| *b != a && pa.distance(pb) <= reach && scene.line_of_sight([pa.x, pa.y], [pb.x, pb.y]))
            .map(|&(b, pb)| (pa.distance(&pb), b))
            .collect();
        near.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        for &(_, b) in near.iter().take(k) {
            if !graph.has_edge(a, b) {
                graph.add_edge(a, b)?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_coverage_and_walls() {
        let scene = SceneConfig::two_region("p", 0);
        let params = PlacementParams::default();
        let g = place_nodes(&scene, &params, 5).unwrap();
        let nodes: Vec<_> = g.nodes().collect();
        assert!(nodes.len() > 100);
        for (i, a) in nodes.iter().enumerate() {
            assert!(scene.in_free_space(a.position.x, a.position.y));
            for b in &nodes[i + 1..] {
                assert!(a.position.distance(&b.position) >= params.spacing);
            }
        }
        for e in g.edges() {
            let (pa, pb) = (g.node(e.a).unwrap().position, g.node(e.b).unwrap().position);
            assert!(scene.line_of_sight([pa.x, pa.y], [pb.x, pb.y]));
        }
        // Near-maximal sampling leaves no point of free space far from a node.
        for ix in 0..60 {
            for iy in 0..20 {
                let (x, y) = (ix as f64 * 0.5 + 0.25, iy as f64 * 0.5 + 0.25);
                if scene.in_free_space(x, y) {
                    let p = Position::new(x, y, 0.0);
                    let d = nodes
                        .iter()
                        .map(|n| n.position.distance(&p))
                        .fold(f64::INFINITY, f64::min);
                    assert!(d < 1.5 * params.spacing, "gap at ({x}, {y}): {d}");
                }
            }
        }
        assert_eq!(g, place_nodes(&scene, &params, 5).unwrap());
    }
}

//! A* over the navigational graph with edge costs inflated by the temporal
//! dynamics of the nodes they connect.

use alloc::collections::{BTreeMap, BinaryHeap};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graph::{NavGraph, NodeId};
use crate::histogram::FlowDescriptor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerWeights {
    pub entropy: f64,
    pub flow: f64,
    pub direction: f64,
}

impl Default for PlannerWeights {
    fn default() -> Self {
        Self {
            entropy: 1.0,
            flow: 1.0,
            direction: 1.0,
        }
    }
}

impl PlannerWeights {
    pub const ZERO: Self = Self {
        entropy: 0.0,
        flow: 0.0,
        direction: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        for w in [self.entropy, self.flow, self.direction] {
            if !(w.is_finite() && w >= 0.0) {
                return Err(invalid("planner weights must be finite and non-negative"));
            }
        }
        Ok(())
    }
}

/// Cost of occupying a node given how busy and how disordered it is.
pub fn temporal_cost(descriptor: Option<&FlowDescriptor>, weights: &PlannerWeights, flow_max: f64) -> f64 {
    let Some(d) = descriptor else { return 0.0 };
    let flow = if flow_max > 0.0 {
        (d.magnitude / flow_max).min(1.0)
    } else {
        0.0
    };
    weights.entropy * d.entropy + weights.flow * flow
}

/// Penalty for entering a node against its dominant flow.
pub fn directional_penalty(edge_heading: f64, descriptor: Option<&FlowDescriptor>, weights: &PlannerWeights) -> f64 {
    let Some(d) = descriptor else { return 0.0 };
    let Some(dominant) = d.dominant_direction else {
        return 0.0;
    };
    weights.direction * d.resultant_length * (1.0 - libm::cos(edge_heading - dominant.radians())) / 2.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeCost {
    pub from: NodeId,
    pub to: NodeId,
    pub distance: f64,
    pub mean_temporal: f64,
    pub directional: f64,
    pub total: f64,
}

/// Largest flow magnitude among the descriptors, or 1 when there is no flow.
pub fn flow_normalizer(descriptors: &BTreeMap<NodeId, FlowDescriptor>) -> f64 {
    let max = descriptors
        .values()
        .map(|d| d.magnitude)
        .filter(|m| m.is_finite())
        .fold(0.0, f64::max);
    if max > 0.0 {
        max
    } else {
        1.0
    }
}

pub fn edge_cost(
    graph: &NavGraph,
    from: NodeId,
    to: NodeId,
    weights: &PlannerWeights,
    descriptors: &BTreeMap<NodeId, FlowDescriptor>,
    flow_max: f64,
) -> Result<EdgeCost> {
    if from == to || !graph.has_edge(from, to) {
        return Err(invalid(alloc::format!("no edge between {from} and {to}")));
    }
    let (a, b) = match (graph.node(from), graph.node(to)) {
        (Some(a), Some(b)) => (a.position, b.position),
        _ => return Err(invalid(alloc::format!("no edge between {from} and {to}"))),
    };
    let distance = a.distance(&b);
    let mean_temporal = (temporal_cost(descriptors.get(&from), weights, flow_max)
        + temporal_cost(descriptors.get(&to), weights, flow_max))
        / 2.0;
    let directional = directional_penalty(a.heading_to(&b), descriptors.get(&to), weights);
    Ok(EdgeCost {
        from,
        to,
        distance,
        mean_temporal,
        directional,
        total: distance + (mean_temporal + directional) * distance,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub path: Vec<NodeId>,
    pub edges: Vec<EdgeCost>,
    pub total: f64,
}

struct Entry {
    f: f64,
    g: f64,
    path: Vec<NodeId>,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // Reversed so the max-heap pops the cheapest, then lexicographically
    // smallest, path first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.f.total_cmp(&self.f).then_with(|| other.path.cmp(&self.path))
    }
}

struct Label {
    g: f64,
    path: Vec<NodeId>,
}

fn improves(g: f64, path: &[NodeId], best: Option<&Label>) -> bool {
    match best {
        None => true,
        Some(l) => match g.total_cmp(&l.g) {
            Ordering::Less => true,
            Ordering::Equal => path < l.path.as_slice(),
            Ordering::Greater => false,
        },
    }
}

/// Cheapest path from `start` to `goal`; among equal-cost paths the
/// lexicographically smallest id sequence wins.
pub fn plan(
    graph: &NavGraph,
    start: NodeId,
    goal: NodeId,
    weights: &PlannerWeights,
    descriptors: &BTreeMap<NodeId, FlowDescriptor>,
) -> Result<Plan> {
    weights.validate()?;
    for id in [start, goal] {
        if !graph.contains(id) {
            return Err(Error::NotFound(alloc::format!("node {id}")));
        }
    }
    let goal_pos = graph
        .node(goal)
        .map(|n| n.position)
        .ok_or(Error::NotFound(alloc::format!("node {goal}")))?;
    let heuristic = |id: NodeId| graph.node(id).map_or(0.0, |n| n.position.distance(&goal_pos));
    let flow_max = flow_normalizer(descriptors);

    let mut best: BTreeMap<NodeId, Label> = BTreeMap::new();
    let mut open = BinaryHeap::new();
    best.insert(
        start,
        Label {
            g: 0.0,
            path: vec![start],
        },
    );
    open.push(Entry {
        f: heuristic(start),
        g: 0.0,
        path: vec![start],
    });

    while let Some(Entry { f, g, path }) = open.pop() {
        if let Some(done) = best.get(&goal) {
            // Every path that could still tie the goal has f at most its cost.
            if f > done.g {
                break;
            }
        }
        let node = *path.last().expect("paths are never empty");
        match best.get(&node) {
            Some(l) if l.g == g && l.path == path => {}
            _ => continue,
        }
        if node == goal {
            continue;
        }
        let neighbors: Vec<NodeId> = graph.neighbors(node).collect();
        for next in neighbors {
            if path.contains(&next) {
                continue;
            }
            let step = edge_cost(graph, node, next, weights, descriptors, flow_max)?;
            let g_next = g + step.total;
            let mut p_next = path.clone();
            p_next.push(next);
            if improves(g_next, &p_next, best.get(&next)) {
                best.insert(
                    next,
                    Label {
                        g: g_next,
                        path: p_next.clone(),
                    },
                );
                open.push(Entry {
                    f: g_next + heuristic(next),
                    g: g_next,
                    path: p_next,
                });
            }
        }
    }

    let Some(found) = best.remove(&goal) else {
        return Err(Error::NoPath {
            from: start.0,
            to: goal.0,
        });
    };
    let mut edges = Vec::with_capacity(found.path.len().saturating_sub(1));
    let mut total = 0.0;
    for w in found.path.windows(2) {
        let e = edge_cost(graph, w[0], w[1], weights, descriptors, flow_max)?;
        total += e.total;
        edges.push(e);
    }
    Ok(Plan {
        path: found.path,
        edges,
        total,
    })
}

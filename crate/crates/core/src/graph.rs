//! Navigational layer: nodes at traversable places, traversability edges, and
//! the topology events a loop closure can produce.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{CellKey, Position};
use crate::histogram::DirectionalHistogram;
use crate::ownership::{OwnershipState, Release};
use crate::sparse::SparseHashMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NavNode {
    pub id: NodeId,
    pub position: Position,
    pub(crate) owned: Option<DirectionalHistogram>,
    pub(crate) bound_keys: BTreeSet<CellKey>,
}

impl NavNode {
    fn new(id: NodeId, position: Position) -> Self {
        Self {
            id,
            position,
            owned: None,
            bound_keys: BTreeSet::new(),
        }
    }

    /// Motion history this node has taken ownership of.
    pub fn owned_dynamics(&self) -> Option<&DirectionalHistogram> {
        self.owned.as_ref()
    }

    pub fn bound_keys(&self) -> &BTreeSet<CellKey> {
        &self.bound_keys
    }

    pub fn owned_total(&self) -> f64 {
        self.owned.as_ref().map_or(0.0, DirectionalHistogram::total)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub a: NodeId,
    pub b: NodeId,
    pub length: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(into = "GraphRepr", try_from = "GraphRepr")]
pub struct NavGraph {
    nodes: BTreeMap<NodeId, NavNode>,
    adjacency: BTreeMap<NodeId, BTreeSet<NodeId>>,
    retired: BTreeSet<NodeId>,
}

impl NavGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert_node(&mut self, id: NodeId, position: Position) -> Result<()> {
        if !position.is_finite() {
            return Err(invalid("node position must be finite"));
        }
        if self.nodes.contains_key(&id) || self.retired.contains(&id) {
            return Err(invalid(format!("node id {id} already used")));
        }
        self.nodes.insert(id, NavNode::new(id, position));
        self.adjacency.insert(id, BTreeSet::new());
        Ok(())
    }

    pub fn add_edge(&mut self, a: NodeId, b: NodeId) -> Result<()> {
        if a == b {
            return Err(invalid("self-loops are not allowed"));
        }
        if !self.nodes.contains_key(&a) || !self.nodes.contains_key(&b) {
            return Err(invalid("edge endpoint does not exist"));
        }
        self.adjacency.entry(a).or_default().insert(b);
        self.adjacency.entry(b).or_default().insert(a);
        Ok(())
    }

    pub fn node(&self, id: NodeId) -> Option<&NavNode> {
        self.nodes.get(&id)
    }

    pub(crate) fn node_mut(&mut self, id: NodeId) -> Option<&mut NavNode> {
        self.nodes.get_mut(&id)
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.nodes.contains_key(&id)
    }

    /// Nodes in id order.
    pub fn nodes(&self) -> impl Iterator<Item = &NavNode> {
        self.nodes.values()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn neighbors(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.adjacency.get(&id).into_iter().flatten().copied()
    }

    pub fn has_edge(&self, a: NodeId, b: NodeId) -> bool {
        self.adjacency.get(&a).is_some_and(|n| n.contains(&b))
    }

    /// Euclidean length of the edge `a–b`, always derived from current positions.
    pub fn edge_length(&self, a: NodeId, b: NodeId) -> Option<f64> {
        if !self.has_edge(a, b) {
            return None;
        }
        Some(self.nodes[&a].position.distance(&self.nodes[&b].position))
    }

    /// Every undirected edge once, with `a < b`, in id order.
    pub fn edges(&self) -> Vec<Edge> {
        let mut out = Vec::new();
        for (&a, neighbors) in &self.adjacency {
            for &b in neighbors.range(a..) {
                if a != b {
                    let length = self.nodes[&a].position.distance(&self.nodes[&b].position);
                    out.push(Edge { a, b, length });
                }
            }
        }
        out
    }

    /// Moves a node. Owned dynamics travel with it.
    pub fn reposition(&mut self, id: NodeId, position: Position) -> Result<()> {
        if !position.is_finite() {
            return Err(invalid("node position must be finite"));
        }
        let node = self
            .nodes
            .get_mut(&id)
            .ok_or_else(|| invalid(format!("unknown node {id}")))?;
        node.position = position;
        Ok(())
    }

    /// Drops the node and its edges. Callers must release ownership first.
    pub(crate) fn remove_node(&mut self, id: NodeId) -> Option<NavNode> {
        let node = self.nodes.remove(&id)?;
        if let Some(neighbors) = self.adjacency.remove(&id) {
            for n in neighbors {
                if let Some(set) = self.adjacency.get_mut(&n) {
                    set.remove(&id);
                }
            }
        }
        self.retired.insert(id);
        Some(node)
    }

    /// Nearest node within `d_max` of `p`; ties go to the smallest id.
    pub fn nearest_node(&self, p: &Position, d_max: f64) -> Option<NodeId> {
        let mut best: Option<(f64, NodeId)> = None;
        for node in self.nodes.values() {
            let d = node.position.distance(p);
            if d > d_max {
                continue;
            }
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, node.id));
            }
        }
        best.map(|(_, id)| id)
    }

    /// Smallest id never used by this graph.
    pub fn next_free_id(&self) -> NodeId {
        let live = self.nodes.keys().next_back().map_or(0, |id| id.0 + 1);
        let retired = self.retired.iter().next_back().map_or(0, |id| id.0 + 1);
        NodeId(live.max(retired))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum TopologyChange {
    Insert(Position),
    Reposition(Position),
    Remove,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopologyEvent {
    pub t: f64,
    pub node: NodeId,
    pub change: TopologyChange,
}

/// Applies one topology event. Removal releases the node's history back into
/// hash space before the node is dropped.
pub fn apply_event(
    graph: &mut NavGraph,
    ownership: &mut OwnershipState,
    map: &mut SparseHashMap,
    event: &TopologyEvent,
) -> Result<Option<Release>> {
    match event.change {
        TopologyChange::Insert(p) => {
            graph.insert_node(event.node, p)?;
            Ok(None)
        }
        TopologyChange::Reposition(p) => {
            graph.reposition(event.node, p)?;
            Ok(None)
        }
        TopologyChange::Remove => {
            let release = ownership.release_on_removal(graph, map, event.node, event.t)?;
            graph.remove_node(event.node);
            Ok(Some(release))
        }
    }
}

#[derive(Serialize, Deserialize)]
struct GraphRepr {
    nodes: Vec<NavNode>,
    edges: Vec<(NodeId, NodeId)>,
    #[serde(default)]
    retired: Vec<NodeId>,
}

impl From<NavGraph> for GraphRepr {
    fn from(g: NavGraph) -> Self {
        let edges = g.edges().into_iter().map(|e| (e.a, e.b)).collect();
        Self {
            nodes: g.nodes.into_values().collect(),
            edges,
            retired: g.retired.into_iter().collect(),
        }
    }
}

impl TryFrom<GraphRepr> for NavGraph {
    type Error = crate::Error;

    fn try_from(r: GraphRepr) -> Result<Self> {
        let mut g = NavGraph::new();
        for node in r.nodes {
            let id = node.id;
            if node.owned.is_some() != !node.bound_keys.is_empty() {
                return Err(invalid(format!("node {id} has inconsistent ownership")));
            }
            g.insert_node(id, node.position)?;
            *g.nodes.get_mut(&id).expect("just inserted") = node;
        }
        for (a, b) in r.edges {
            g.add_edge(a, b)?;
        }
        for id in r.retired {
            if g.nodes.contains_key(&id) {
                return Err(invalid(format!("node {id} is both live and retired")));
            }
            g.retired.insert(id);
        }
        Ok(g)
    }
}

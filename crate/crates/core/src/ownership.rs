//! Temporal ownership transfer between hash cells and navigational nodes.
//!
//! A cell's history moves into the nearest node once the cell is older than
//! the stability window. The redirect table then routes later observations at
//! that key to the owner. Removing a node writes its history back into hash
//! space at the node's last pose, so no history is ever lost or held twice.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{hash_key, orientation_bin, CellKey, Orientation, Position};
use crate::graph::{NavGraph, NodeId};
use crate::histogram::DirectionalHistogram;
use crate::sparse::{FxMap, SparseHashMap};

/// Where an observation or a released history ended up.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Destination {
    Node(NodeId),
    Cell(CellKey),
}

/// Outcome of releasing a removed node's history.
#[derive(Clone, Debug, PartialEq)]
pub struct Release {
    pub node: NodeId,
    /// Keys that were bound to the node.
    pub released_keys: Vec<CellKey>,
    /// Lattice key of the node's final pose.
    pub target_key: CellKey,
    /// `None` when the node owned nothing.
    pub landed: Option<Destination>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "OwnershipRepr", try_from = "OwnershipRepr")]
pub struct OwnershipState {
    redirect: FxMap<CellKey, NodeId>,
    tau: f64,
    bind_radius: f64,
}

impl OwnershipState {
    pub fn new(tau: f64, bind_radius: f64) -> Result<Self> {
        if !(tau >= 0.0) || !tau.is_finite() {
            return Err(invalid("stability window must be non-negative"));
        }
        if !(bind_radius > 0.0) || !bind_radius.is_finite() {
            return Err(invalid("bind radius must be positive"));
        }
        Ok(Self {
            redirect: FxMap::default(),
            tau,
            bind_radius,
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn bind_radius(&self) -> f64 {
        self.bind_radius
    }

    pub fn owner_of(&self, key: &CellKey) -> Option<NodeId> {
        self.redirect.get(key).copied()
    }

    pub fn bound_count(&self) -> usize {
        self.redirect.len()
    }

    /// Moves every cell older than the stability window into the nearest node
    /// within the bind radius of the cell center. Cells with no such node stay.
    pub fn bind_stable_cells(
        &mut self,
        graph: &mut NavGraph,
        map: &mut SparseHashMap,
        now: f64,
    ) -> Vec<(CellKey, NodeId)> {
        let mut bound = Vec::new();
        let delta = map.delta();
        for key in map.keys_ordered() {
            let Some(cell) = map.lookup(&key) else { continue };
            if cell.created_t > now - self.tau {
                continue;
            }
            let Some(owner) = graph.nearest_node(&key.center(delta), self.bind_radius) else {
                continue;
            };
            let cell = map.remove_cell(&key).expect("cell looked up above");
            let node = graph.node_mut(owner).expect("nearest node exists");
            absorb(&mut node.owned, &cell.histogram);
            node.bound_keys.insert(key);
            self.redirect.insert(key, owner);
            bound.push((key, owner));
        }
        bound
    }

    /// Routes one observation either to the owning node or into hash space.
    pub fn route_observation(
        &self,
        graph: &mut NavGraph,
        map: &mut SparseHashMap,
        p: &Position,
        theta: Orientation,
        t: f64,
        weight: f64,
    ) -> Result<Destination> {
        let key = hash_key(p, map.delta())?;
        match self.redirect.get(&key) {
            Some(&owner) => {
                let bins = map.bins();
                let bin = orientation_bin(theta, bins)?;
                let node = graph
                    .node_mut(owner)
                    .ok_or_else(|| Error::Protocol(format!("key {key:?} redirects to missing node {owner}")))?;
                let hist = match node.owned.as_mut() {
                    Some(h) => h,
                    None => node.owned.insert(DirectionalHistogram::new(bins)?),
                };
                hist.accumulate(bin, t, weight)?;
                Ok(Destination::Node(owner))
            }
            None => map.upsert_observation(p, theta, t, weight).map(Destination::Cell),
        }
    }

    /// Releases everything `node` owns back into hash space at its current pose.
    ///
    /// If that pose falls on a key still bound to another live node, the history
    /// goes to that node instead, keeping each key's history in one place.
    pub fn release_on_removal(
        &mut self,
        graph: &mut NavGraph,
        map: &mut SparseHashMap,
        node: NodeId,
        t: f64,
    ) -> Result<Release> {
        let entry = graph
            .node_mut(node)
            .ok_or_else(|| invalid(format!("unknown node {node}")))?;
        let position = entry.position;
        let owned = entry.owned.take();
        let keys: Vec<CellKey> = core::mem::take(&mut entry.bound_keys).into_iter().collect();
        self.redirect.retain(|_, owner| *owner != node);

        let target_key = hash_key(&position, map.delta())?;
        let landed = match owned {
            None => None,
            Some(history) => match self.redirect.get(&target_key).copied() {
                Some(other) => {
                    let other_node = graph.node_mut(other).ok_or_else(|| {
                        Error::Protocol(format!("key {target_key:?} redirects to missing node {other}"))
                    })?;
                    absorb(&mut other_node.owned, &history);
                    Some(Destination::Node(other))
                }
                None => {
                    map.deposit(target_key, history, t)?;
                    Some(Destination::Cell(target_key))
                }
            },
        };
        Ok(Release {
            node,
            released_keys: keys,
            target_key,
            landed,
        })
    }

    /// Checks the structural invariants: every redirect points at a live node
    /// that lists the key, node key sets match the table, and no key is held
    /// by both a node and a cell.
    pub fn audit(&self, graph: &NavGraph, map: &SparseHashMap) -> Result<()> {
        let mut seen = BTreeSet::new();
        for node in graph.nodes() {
            if node.owned.is_some() == node.bound_keys.is_empty() {
                return Err(Error::Protocol(format!("node {} ownership flag mismatch", node.id)));
            }
            for key in &node.bound_keys {
                if !seen.insert(*key) {
                    return Err(Error::Protocol(format!("key {key:?} owned twice")));
                }
                if self.redirect.get(key) != Some(&node.id) {
                    return Err(Error::Protocol(format!("key {key:?} missing from redirect")));
                }
                if map.lookup(key).is_some() {
                    return Err(Error::Protocol(format!("key {key:?} held by node and cell")));
                }
            }
        }
        if seen.len() != self.redirect.len() {
            return Err(Error::Protocol("redirect table has dangling entries".into()));
        }
        Ok(())
    }
}

fn absorb(slot: &mut Option<DirectionalHistogram>, history: &DirectionalHistogram) {
    match slot {
        Some(h) => h
            .merge_from(history)
            .expect("node and cell histograms share the bin count"),
        None => *slot = Some(history.clone()),
    }
}

#[derive(Serialize, Deserialize)]
struct OwnershipRepr {
    tau: f64,
    bind_radius: f64,
    redirect: Vec<(CellKey, NodeId)>,
}

impl From<OwnershipState> for OwnershipRepr {
    fn from(s: OwnershipState) -> Self {
        let mut redirect: Vec<(CellKey, NodeId)> = s.redirect.into_iter().collect();
        redirect.sort_unstable();
        Self {
            tau: s.tau,
            bind_radius: s.bind_radius,
            redirect,
        }
    }
}

impl TryFrom<OwnershipRepr> for OwnershipState {
    type Error = Error;

    fn try_from(r: OwnershipRepr) -> Result<Self> {
        let mut s = OwnershipState::new(r.tau, r.bind_radius)?;
        for (key, node) in r.redirect {
            if s.redirect.insert(key, node).is_some() {
                return Err(invalid("duplicate redirect key"));
            }
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{apply_event, TopologyChange, TopologyEvent};

    fn east() -> Orientation {
        Orientation::new(0.0).unwrap()
    }

    fn setup() -> (NavGraph, OwnershipState, SparseHashMap) {
        let mut g = NavGraph::new();
        g.insert_node(NodeId(0), Position::new(0.25, 0.25, 0.0)).unwrap();
        (
            g,
            OwnershipState::new(60.0, 1.0).unwrap(),
            SparseHashMap::new(0.5, 8).unwrap(),
        )
    }

    #[test]
    fn binding_moves_history_into_node() {
        let (mut g, mut own, mut map) = setup();
        let key = map
            .upsert_observation(&Position::new(0.2, 0.2, 0.0), east(), 0.0, 3.0)
            .unwrap();
        assert!(own.bind_stable_cells(&mut g, &mut map, 30.0).is_empty());
        assert!(map.lookup(&key).is_some());

        let bound = own.bind_stable_cells(&mut g, &mut map, 60.0);
        assert_eq!(bound, vec![(key, NodeId(0))]);
        assert!(map.lookup(&key).is_none());
        assert_eq!(g.node(NodeId(0)).unwrap().owned_total(), 3.0);
        assert_eq!(own.owner_of(&key), Some(NodeId(0)));
        own.audit(&g, &map).unwrap();
    }

    #[test]
    fn cells_without_a_nearby_node_stay_unbound() {
        let (mut g, mut own, mut map) = setup();
        let key = map
            .upsert_observation(&Position::new(10.0, 10.0, 0.0), east(), 0.0, 1.0)
            .unwrap();
        assert!(own.bind_stable_cells(&mut g, &mut map, 1000.0).is_empty());
        assert!(map.lookup(&key).is_some());
        assert_eq!(own.owner_of(&key), None);
    }

    #[test]
    fn routing_follows_the_redirect() {
        let (mut g, mut own, mut map) = setup();
        map.upsert_observation(&Position::new(0.2, 0.2, 0.0), east(), 0.0, 1.0)
            .unwrap();
        own.bind_stable_cells(&mut g, &mut map, 100.0);

        let d = own
            .route_observation(&mut g, &mut map, &Position::new(0.3, 0.1, 0.0), east(), 101.0, 1.0)
            .unwrap();
        assert_eq!(d, Destination::Node(NodeId(0)));
        assert_eq!(map.occupied_count(), 0);
        assert_eq!(g.node(NodeId(0)).unwrap().owned_total(), 2.0);

        let d = own
            .route_observation(&mut g, &mut map, &Position::new(3.0, 0.1, 0.0), east(), 102.0, 1.0)
            .unwrap();
        assert_eq!(d, Destination::Cell(CellKey::new(6, 0, 0)));
        assert_eq!(map.total_mass() + g.node(NodeId(0)).unwrap().owned_total(), 3.0);
    }

    #[test]
    fn release_rematerializes_at_final_pose() {
        let (mut g, mut own, mut map) = setup();
        let key = map
            .upsert_observation(&Position::new(0.2, 0.2, 0.0), east(), 0.0, 9.0)
            .unwrap();
        own.bind_stable_cells(&mut g, &mut map, 100.0);
        g.reposition(NodeId(0), Position::new(2.1, 0.1, 0.0)).unwrap();

        let r = own.release_on_removal(&mut g, &mut map, NodeId(0), 120.0).unwrap();
        assert_eq!(r.released_keys, vec![key]);
        assert_eq!(r.landed, Some(Destination::Cell(CellKey::new(4, 0, 0))));
        let cell = map.lookup(&CellKey::new(4, 0, 0)).unwrap();
        assert_eq!((cell.histogram.total(), cell.created_t), (9.0, 120.0));
        assert_eq!(own.owner_of(&key), None);
        assert!(g.node(NodeId(0)).unwrap().bound_keys().is_empty());
    }

    #[test]
    fn release_into_occupied_cell_merges() {
        let (mut g, mut own, mut map) = setup();
        map.upsert_observation(&Position::new(0.2, 0.2, 0.0), east(), 0.0, 5.0)
            .unwrap();
        own.bind_stable_cells(&mut g, &mut map, 100.0);
        g.reposition(NodeId(0), Position::new(5.1, 0.1, 0.0)).unwrap();
        map.upsert_observation(&Position::new(5.2, 0.2, 0.0), east(), 101.0, 2.0)
            .unwrap();
        own.release_on_removal(&mut g, &mut map, NodeId(0), 102.0).unwrap();
        let cell = map.lookup(&CellKey::new(10, 0, 0)).unwrap();
        assert_eq!(cell.histogram.total(), 7.0);
        assert_eq!(cell.created_t, 101.0);
    }

    #[test]
    fn release_without_dynamics_is_a_no_op() {
        let (mut g, mut own, mut map) = setup();
        let r = own.release_on_removal(&mut g, &mut map, NodeId(0), 0.0).unwrap();
        assert_eq!(r.landed, None);
        assert_eq!(map.occupied_count(), 0);
        assert!(own.release_on_removal(&mut g, &mut map, NodeId(7), 0.0).is_err());
    }

    #[test]
    fn release_onto_a_key_owned_elsewhere_goes_to_that_owner() {
        let mut g = NavGraph::new();
        g.insert_node(NodeId(0), Position::new(0.25, 0.25, 0.0)).unwrap();
        g.insert_node(NodeId(1), Position::new(5.25, 0.25, 0.0)).unwrap();
        let mut own = OwnershipState::new(0.0, 1.0).unwrap();
        let mut map = SparseHashMap::new(0.5, 8).unwrap();
        map.upsert_observation(&Position::new(0.2, 0.2, 0.0), east(), 0.0, 2.0)
            .unwrap();
        map.upsert_observation(&Position::new(5.2, 0.2, 0.0), east(), 0.0, 3.0)
            .unwrap();
        own.bind_stable_cells(&mut g, &mut map, 1.0);
        g.reposition(NodeId(0), Position::new(5.2, 0.2, 0.0)).unwrap();
        let ev = TopologyEvent {
            t: 2.0,
            node: NodeId(0),
            change: TopologyChange::Remove,
        };
        let r = apply_event(&mut g, &mut own, &mut map, &ev).unwrap().unwrap();
        assert_eq!(r.landed, Some(Destination::Node(NodeId(1))));
        assert_eq!(g.node(NodeId(1)).unwrap().owned_total(), 5.0);
        assert_eq!(map.occupied_count(), 0);
        own.audit(&g, &map).unwrap();
    }

    #[test]
    fn bind_release_round_trip_restores_the_map() {
        let (mut g, mut own, mut map) = setup();
        map.upsert_observation(&Position::new(0.2, 0.2, 0.0), east(), 0.0, 4.0)
            .unwrap();
        let before = map.lookup(&CellKey::new(0, 0, 0)).unwrap().histogram.clone();
        own.bind_stable_cells(&mut g, &mut map, 100.0);
        own.release_on_removal(&mut g, &mut map, NodeId(0), 100.0).unwrap();
        assert_eq!(map.lookup(&CellKey::new(0, 0, 0)).unwrap().histogram, before);
    }
}

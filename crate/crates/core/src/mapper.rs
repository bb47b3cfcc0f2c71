//! Streaming construction of the graph-bound map.
//!
//! Observations enter through [`FlowMapper::observe`] in time order. Window
//! boundaries flush normalized activity into the temporal model, bind stable
//! cells to nodes and republish the spectrum. Topology events are applied at
//! their timestamps and carry spectral history along with released histories.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::{FieldSource, Mode};
use crate::geometry::{hash_key, orientation_bin, CellKey, Orientation, Position};
use crate::graph::{apply_event, NavGraph, NodeId, TopologyEvent};
use crate::histogram::{DescriptorParams, DirectionalHistogram, FlowDescriptor};
use crate::ownership::{Destination, OwnershipState, Release};
use crate::sparse::{SparseHashMap, DEFAULT_RESOLUTION};
use crate::temporal::{geometric_candidates, GlobalTemporalModel, TemporalConfig, WindowAccumulator, WindowSchedule};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Hash lattice resolution, meters.
    pub delta: f64,
    pub bins: usize,
    /// Association threshold, meters.
    pub d_max: f64,
    /// Stability window before a cell may bind, seconds.
    pub tau: f64,
    pub bind_radius: f64,
    pub temporal: TemporalConfig,
    pub descriptor: DescriptorParams,
}

impl ModelParams {
    /// Defaults with a candidate ladder spanning `duration` seconds.
    pub fn for_duration(duration: f64) -> Result<Self> {
        let d_max = 1.0;
        Ok(Self {
            delta: DEFAULT_RESOLUTION,
            bins: 8,
            d_max,
            tau: 60.0,
            bind_radius: d_max,
            temporal: TemporalConfig {
                candidates: geometric_candidates(duration, 7)?,
                order: 2,
                update_interval: 10.0,
            },
            descriptor: DescriptorParams::default(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(invalid("delta must be positive"));
        }
        if self.bins < 2 {
            return Err(invalid("bin count must be at least 2"));
        }
        if !(self.d_max > 0.0) || !self.d_max.is_finite() {
            return Err(invalid("d_max must be positive"));
        }
        if !(self.descriptor.t_floor > 0.0) || !(self.descriptor.eps_dir >= 0.0) {
            return Err(invalid("descriptor thresholds out of range"));
        }
        self.temporal.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowMapper {
    params: ModelParams,
    map: SparseHashMap,
    graph: NavGraph,
    ownership: OwnershipState,
    temporal: GlobalTemporalModel,
    window: WindowAccumulator,
    schedule: WindowSchedule,
    clock: f64,
    observed: f64,
}

impl FlowMapper {
    pub fn new(params: ModelParams, graph: NavGraph) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            map: SparseHashMap::new(params.delta, params.bins)?,
            ownership: OwnershipState::new(params.tau, params.bind_radius)?,
            temporal: GlobalTemporalModel::new(params.temporal.clone())?,
            window: WindowAccumulator::new(params.bins),
            schedule: WindowSchedule::new(params.temporal.update_interval)?,
            graph,
            params,
            clock: 0.0,
            observed: 0.0,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn map(&self) -> &SparseHashMap {
        &self.map
    }

    pub fn graph(&self) -> &NavGraph {
        &self.graph
    }

    pub fn ownership(&self) -> &OwnershipState {
        &self.ownership
    }

    pub fn temporal(&self) -> &GlobalTemporalModel {
        &self.temporal
    }

    /// Sum of all accepted observation weights.
    pub fn observed_weight(&self) -> f64 {
        self.observed
    }

    /// Mass held by cells plus mass owned by nodes.
    pub fn stored_weight(&self) -> f64 {
        self.map.total_mass() + self.graph.nodes().map(|n| n.owned_total()).sum::<f64>()
    }

    fn check_time(&mut self, t: f64) -> Result<()> {
        if !t.is_finite() || t < self.clock {
            return Err(invalid("timestamps must be finite and non-decreasing"));
        }
        self.clock = t;
        Ok(())
    }

    pub fn observe(&mut self, p: &Position, theta: Orientation, t: f64, weight: f64) -> Result<Destination> {
        self.check_time(t)?;
        self.advance_to(t)?;
        let dest = self
            .ownership
            .route_observation(&mut self.graph, &mut self.map, p, theta, t, weight)?;
        let key = hash_key(p, self.params.delta)?;
        let bin = orientation_bin(theta, self.params.bins)?;
        self.window.record(key, bin, weight);
        self.observed += weight;
        Ok(dest)
    }

    /// Closes every window ending at or before `t`.
    pub fn advance_to(&mut self, t: f64) -> Result<()> {
        let mut closed = false;
        while let Some((mid, end)) = self.schedule.close_if_due(t) {
            self.window.flush(&mut self.temporal, mid)?;
            self.ownership.bind_stable_cells(&mut self.graph, &mut self.map, end);
            closed = true;
        }
        if closed {
            self.temporal.update_spectrum();
        }
        Ok(())
    }

    pub fn apply_event(&mut self, event: &TopologyEvent) -> Result<Option<Release>> {
        self.check_time(event.t)?;
        self.advance_to(event.t)?;
        let release = apply_event(&mut self.graph, &mut self.ownership, &mut self.map, event)?;
        if let Some(r) = &release {
            if r.landed.is_some() {
                for key in &r.released_keys {
                    self.temporal.remap_location(key, &r.target_key);
                    self.window.remap(key, &r.target_key);
                }
            }
        }
        Ok(release)
    }

    pub fn finalize(&mut self, t_end: f64) -> Result<()> {
        let t_end = t_end.max(self.clock);
        self.advance_to(t_end)?;
        if self.window.has_pending() {
            let mid = self.schedule.current_mid();
            self.window.flush(&mut self.temporal, mid)?;
            self.schedule.close_if_due(f64::INFINITY);
        }
        self.temporal.update_spectrum();
        Ok(())
    }

    /// Nearest node within `d_max`.
    pub fn associate(&self, p: &Position) -> Option<NodeId> {
        self.graph.nearest_node(p, self.params.d_max)
    }

    pub fn location_prediction(&self, key: &CellKey, t: f64) -> Result<Vec<f64>> {
        self.temporal.predict_location(key, t, self.params.bins)
    }

    /// Sum of the predictions of every location the node owns.
    pub fn node_prediction(&self, id: NodeId, t: f64) -> Result<Vec<f64>> {
        let node = self
            .graph
            .node(id)
            .ok_or_else(|| Error::NotFound(alloc::format!("node {id}")))?;
        let mut out = alloc::vec![0.0; self.params.bins];
        let mut any = false;
        for key in node.bound_keys() {
            if let Ok(v) = self.location_prediction(key, t) {
                any = true;
                for (a, b) in out.iter_mut().zip(v) {
                    *a += b;
                }
            }
        }
        if !any {
            return Err(Error::NotFound(alloc::format!("node {id} has no temporal channels")));
        }
        Ok(out)
    }

    pub fn node_histogram(&self, id: NodeId, mode: Mode, t: f64) -> Result<Option<DirectionalHistogram>> {
        let node = self
            .graph
            .node(id)
            .ok_or_else(|| Error::NotFound(alloc::format!("node {id}")))?;
        match mode {
            Mode::Historical => Ok(node.owned_dynamics().cloned()),
            Mode::Predicted => match self.node_prediction(id, t) {
                Ok(v) => Ok(Some(DirectionalHistogram::from_activity(&v, t)?)),
                Err(Error::NotFound(_)) => Ok(None),
                Err(e) => Err(e),
            },
        }
    }

    /// Per-node descriptors for nodes carrying dynamics in the given mode.
    pub fn node_descriptors(&self, mode: Mode, t: f64) -> Result<BTreeMap<NodeId, FlowDescriptor>> {
        let mut out = BTreeMap::new();
        for node in self.graph.nodes() {
            if let Some(h) = self.node_histogram(node.id, mode, t)? {
                if !h.is_empty() {
                    out.insert(node.id, h.descriptor(&self.params.descriptor));
                }
            }
        }
        Ok(out)
    }

    /// Every holder of dynamics at its representative position: nodes at their
    /// pose, unbound cells at their center.
    pub fn sources(&self, mode: Mode, t: f64) -> Result<Vec<FieldSource>> {
        let mut out = Vec::new();
        for node in self.graph.nodes() {
            if let Some(histogram) = self.node_histogram(node.id, mode, t)? {
                out.push(FieldSource {
                    position: node.position,
                    histogram,
                });
            }
        }
        for cell in self.map.cells_ordered() {
            let histogram = match mode {
                Mode::Historical => cell.histogram.clone(),
                Mode::Predicted => match self.location_prediction(&cell.key, t) {
                    Ok(v) => DirectionalHistogram::from_activity(&v, t)?,
                    Err(Error::NotFound(_)) => continue,
                    Err(e) => return Err(e),
                },
            };
            out.push(FieldSource {
                position: cell.key.center(self.params.delta),
                histogram,
            });
        }
        Ok(out)
    }
}

//! Sparse, graph-bound maps of human motion dynamics.
//!
//! Observations land in a sparse hash of directional histograms, are handed
//! to navigational nodes once the local graph has settled, and feed a global
//! frequency-domain model that predicts periodic activity per location.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
#[macro_use]
extern crate std;

pub mod error;
pub mod evaluation;
pub mod field;
pub mod geometry;
pub mod graph;
pub mod grid;
pub mod histogram;
pub mod mapper;
pub mod metrics;
pub mod ownership;
pub mod planner;
pub mod sparse;
pub mod temporal;

pub use error::{Error, Result};
pub use evaluation::{aggregate, evaluate_scene, AggregateReport, DataType, ModeReport, SceneReport, Stat};
pub use field::{rasterize, DescriptorField, FieldSource, GridIndex, GridSpec, Mode};
pub use geometry::{hash_key, orientation_bin, CellKey, Orientation, Position};
pub use graph::{NavGraph, NavNode, NodeId, TopologyChange, TopologyEvent};
pub use grid::GridModel;
pub use histogram::{DescriptorParams, DirectionalHistogram, FlowDescriptor};
pub use mapper::{FlowMapper, ModelParams};
pub use ownership::{Destination, OwnershipState, Release};
pub use planner::{plan, Plan, PlannerWeights};
pub use sparse::SparseHashMap;
pub use temporal::{FrequencyCandidate, GlobalTemporalModel, TemporalConfig};

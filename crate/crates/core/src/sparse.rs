//! Allocation-on-write store of directional histograms keyed by lattice cell.

use alloc::vec::Vec;
use core::hash::BuildHasherDefault;

use hashbrown::HashMap;
use rustc_hash::FxHasher;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{hash_key, orientation_bin, CellKey, Orientation, Position};
use crate::histogram::DirectionalHistogram;

pub(crate) type FxMap<K, V> = HashMap<K, V, BuildHasherDefault<FxHasher>>;

/// Resolution used when none is configured, meters.
pub const DEFAULT_RESOLUTION: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HashCell {
    pub key: CellKey,
    pub histogram: DirectionalHistogram,
    /// Time of the first observation stored in this cell.
    pub created_t: f64,
}

/// Sparse lattice of motion histograms. Cells exist only once data lands in them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "SparseRepr", try_from = "SparseRepr")]
pub struct SparseHashMap {
    delta: f64,
    bins: usize,
    cells: FxMap<CellKey, HashCell>,
}

impl SparseHashMap {
    pub fn new(delta: f64, bins: usize) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(invalid("resolution must be positive and finite"));
        }
        if bins < 2 {
            return Err(invalid("bin count must be at least 2"));
        }
        Ok(Self {
            delta,
            bins,
            cells: FxMap::default(),
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn key_of(&self, p: &Position) -> Result<CellKey> {
        hash_key(p, self.delta)
    }

    /// Accumulates one observation into the cell containing `p`.
    ///
    /// A zero-weight observation never allocates a new cell.
    pub fn upsert_observation(&mut self, p: &Position, theta: Orientation, t: f64, weight: f64) -> Result<CellKey> {
        let key = hash_key(p, self.delta)?;
        let bin = orientation_bin(theta, self.bins)?;
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(invalid("weight must be non-negative and finite"));
        }
        if let Some(cell) = self.cells.get_mut(&key) {
            cell.histogram.accumulate(bin, t, weight)?;
        } else if weight > 0.0 {
            let mut histogram = DirectionalHistogram::new(self.bins)?;
            histogram.accumulate(bin, t, weight)?;
            self.cells.insert(
                key,
                HashCell {
                    key,
                    histogram,
                    created_t: t,
                },
            );
        }
        Ok(key)
    }

    /// Writes a whole history into `key`, merging with any data already there.
    /// Empty histories are dropped. Returns whether a new cell was created.
    pub fn deposit(&mut self, key: CellKey, histogram: DirectionalHistogram, t: f64) -> Result<bool> {
        if histogram.bins() != self.bins {
            return Err(invalid("histogram bin count does not match the map"));
        }
        if let Some(cell) = self.cells.get_mut(&key) {
            cell.histogram.merge_from(&histogram)?;
            return Ok(false);
        }
        if histogram.is_empty() {
            return Ok(false);
        }
        self.cells.insert(
            key,
            HashCell {
                key,
                histogram,
                created_t: t,
            },
        );
        Ok(true)
    }

    pub fn lookup(&self, key: &CellKey) -> Option<&HashCell> {
        self.cells.get(key)
    }

    pub fn remove_cell(&mut self, key: &CellKey) -> Option<HashCell> {
        self.cells.remove(key)
    }

    /// Occupied keys in lexicographic `(ix, iy, iz)` order.
    pub fn keys_ordered(&self) -> Vec<CellKey> {
        let mut keys: Vec<CellKey> = self.cells.keys().copied().collect();
        keys.sort_unstable();
        keys
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.len()
    }

    /// Cells in key order.
    pub fn cells_ordered(&self) -> Vec<&HashCell> {
        let mut cells: Vec<&HashCell> = self.cells.values().collect();
        cells.sort_unstable_by_key(|c| c.key);
        cells
    }

    pub fn total_mass(&self) -> f64 {
        self.cells_ordered().iter().map(|c| c.histogram.total()).sum()
    }
}

#[derive(Serialize, Deserialize)]
struct SparseRepr {
    delta: f64,
    bins: usize,
    cells: Vec<HashCell>,
}

impl From<SparseHashMap> for SparseRepr {
    fn from(m: SparseHashMap) -> Self {
        let mut cells: Vec<HashCell> = m.cells.into_values().collect();
        cells.sort_unstable_by_key(|c| c.key);
        Self {
            delta: m.delta,
            bins: m.bins,
            cells,
        }
    }
}

impl TryFrom<SparseRepr> for SparseHashMap {
    type Error = crate::Error;

    fn try_from(r: SparseRepr) -> Result<Self> {
        let mut m = SparseHashMap::new(r.delta, r.bins)?;
        for cell in r.cells {
            if cell.histogram.bins() != r.bins {
                return Err(invalid("cell bin count does not match the map"));
            }
            if m.cells.insert(cell.key, cell).is_some() {
                return Err(invalid("duplicate cell key"));
            }
        }
        Ok(m)
    }
}

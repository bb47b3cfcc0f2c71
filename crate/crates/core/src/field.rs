//! Planar grids and the descriptor fields both map kinds are compared on.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::Position;
use crate::histogram::{DescriptorParams, DirectionalHistogram, FlowDescriptor};

/// Largest dense grid that will be allocated.
pub const DEFAULT_MAX_CELLS: u128 = 1 << 22;

/// Which descriptors to compare: raw accumulated counts or model predictions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Historical,
    Predicted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GridIndex {
    pub ix: usize,
    pub iy: usize,
}

/// Axis-aligned planar grid; `z` is ignored.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin_x: f64,
    pub origin_y: f64,
    pub resolution: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn new(origin_x: f64, origin_y: f64, resolution: f64, nx: usize, ny: usize) -> Result<Self> {
        Self::with_limit(origin_x, origin_y, resolution, nx, ny, DEFAULT_MAX_CELLS)
    }

    pub fn with_limit(
        origin_x: f64,
        origin_y: f64,
        resolution: f64,
        nx: usize,
        ny: usize,
        max_cells: u128,
    ) -> Result<Self> {
        if !(resolution > 0.0) || !resolution.is_finite() {
            return Err(invalid("grid resolution must be positive"));
        }
        if !origin_x.is_finite() || !origin_y.is_finite() {
            return Err(invalid("grid origin must be finite"));
        }
        if nx == 0 || ny == 0 {
            return Err(invalid("grid must have at least one cell per axis"));
        }
        let requested = nx as u128 * ny as u128;
        if requested > max_cells {
            return Err(Error::CapacityExceeded {
                requested,
                limit: max_cells,
            });
        }
        Ok(Self {
            origin_x,
            origin_y,
            resolution,
            nx,
            ny,
        })
    }

    /// Smallest grid anchored at `(min_x, min_y)` covering up to `(max_x, max_y)`.
    pub fn covering(min_x: f64, min_y: f64, max_x: f64, max_y: f64, resolution: f64, max_cells: u128) -> Result<Self> {
        if !(resolution > 0.0) || !(max_x >= min_x) || !(max_y >= min_y) {
            return Err(invalid("grid bounds are inverted or resolution is not positive"));
        }
        let nx = libm::ceil((max_x - min_x) / resolution).max(1.0);
        let ny = libm::ceil((max_y - min_y) / resolution).max(1.0);
        let requested = nx * ny;
        if !requested.is_finite() || requested > max_cells as f64 {
            return Err(Error::CapacityExceeded {
                requested: if requested.is_finite() {
                    requested as u128
                } else {
                    u128::MAX
                },
                limit: max_cells,
            });
        }
        Self::with_limit(min_x, min_y, resolution, nx as usize, ny as usize, max_cells)
    }

    pub fn cell_count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn index_of(&self, p: &Position) -> Option<GridIndex> {
        let fx = libm::floor((p.x - self.origin_x) / self.resolution);
        let fy = libm::floor((p.y - self.origin_y) / self.resolution);
        if !(fx >= 0.0 && fy >= 0.0 && fx < self.nx as f64 && fy < self.ny as f64) {
            return None;
        }
        Some(GridIndex {
            ix: fx as usize,
            iy: fy as usize,
        })
    }

    pub fn center(&self, idx: GridIndex) -> Position {
        Position::new(
            self.origin_x + (idx.ix as f64 + 0.5) * self.resolution,
            self.origin_y + (idx.iy as f64 + 0.5) * self.resolution,
            0.0,
        )
    }

    pub(crate) fn linear(&self, idx: GridIndex) -> usize {
        idx.iy * self.nx + idx.ix
    }

    pub(crate) fn unlinear(&self, i: usize) -> GridIndex {
        GridIndex {
            ix: i % self.nx,
            iy: i / self.nx,
        }
    }
}

/// A histogram placed at a representative world position.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldSource {
    pub position: Position,
    pub histogram: DirectionalHistogram,
}

/// Per-cell histograms on a grid. Only cells holding mass count as populated.
#[derive(Clone, Debug, PartialEq)]
pub struct DescriptorField {
    spec: GridSpec,
    bins: usize,
    cells: BTreeMap<GridIndex, DirectionalHistogram>,
    dropped: usize,
}

impl DescriptorField {
    pub fn new(spec: GridSpec, bins: usize) -> Self {
        Self {
            spec,
            bins,
            cells: BTreeMap::new(),
            dropped: 0,
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    /// Sources that fell outside the grid.
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    pub fn insert(&mut self, idx: GridIndex, histogram: DirectionalHistogram) -> Result<()> {
        match self.cells.get_mut(&idx) {
            Some(h) => h.merge_from(&histogram),
            None => {
                if histogram.bins() != self.bins {
                    return Err(invalid("histogram bin count does not match the field"));
                }
                self.cells.insert(idx, histogram);
                Ok(())
            }
        }
    }

    /// Deposits a source into the cell containing its position; merges on collision.
    pub fn deposit(&mut self, source: &FieldSource) -> Result<bool> {
        match self.spec.index_of(&source.position) {
            Some(idx) => {
                self.insert(idx, source.histogram.clone())?;
                Ok(true)
            }
            None => {
                self.dropped += 1;
                Ok(false)
            }
        }
    }

    pub fn get(&self, idx: &GridIndex) -> Option<&DirectionalHistogram> {
        self.cells.get(idx).filter(|h| !h.is_empty())
    }

    /// Populated cells in index order.
    pub fn populated(&self) -> impl Iterator<Item = (&GridIndex, &DirectionalHistogram)> {
        self.cells.iter().filter(|(_, h)| !h.is_empty())
    }

    pub fn populated_count(&self) -> usize {
        self.populated().count()
    }

    pub fn descriptors(&self, params: &DescriptorParams) -> Vec<(GridIndex, FlowDescriptor)> {
        self.populated().map(|(idx, h)| (*idx, h.descriptor(params))).collect()
    }
}

/// Discretizes point sources onto `spec`, merging sources sharing a cell.
pub fn rasterize(sources: &[FieldSource], spec: GridSpec, bins: usize) -> Result<DescriptorField> {
    let mut field = DescriptorField::new(spec, bins);
    for s in sources {
        field.deposit(s)?;
    }
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_hot(bin: usize, mass: f64) -> DirectionalHistogram {
        let mut h = DirectionalHistogram::new(8).unwrap();
        h.accumulate(bin, 0.0, mass).unwrap();
        h
    }

    #[test]
    fn spec_indexing() {
        let spec = GridSpec::new(-1.0, -1.0, 0.5, 4, 4).unwrap();
        assert_eq!(
            spec.index_of(&Position::new(-1.0, -1.0, 3.0)),
            Some(GridIndex { ix: 0, iy: 0 })
        );
        assert_eq!(
            spec.index_of(&Position::new(0.74, -0.5, 0.0)),
            Some(GridIndex { ix: 3, iy: 1 })
        );
        assert_eq!(spec.index_of(&Position::new(1.0, 0.0, 0.0)), None);
        assert_eq!(spec.index_of(&Position::new(-1.01, 0.0, 0.0)), None);
        assert_eq!(spec.center(GridIndex { ix: 1, iy: 2 }), Position::new(-0.25, 0.25, 0.0));
        let i = GridIndex { ix: 3, iy: 2 };
        assert_eq!(spec.unlinear(spec.linear(i)), i);
    }

    #[test]
    fn oversized_grids_are_refused() {
        let e = GridSpec::covering(-1e6, -1e6, 1e6, 1e6, 0.5, DEFAULT_MAX_CELLS).unwrap_err();
        assert!(matches!(e, Error::CapacityExceeded { .. }));
        assert!(GridSpec::new(0.0, 0.0, 0.5, 1 << 12, 1 << 12).is_err());
    }

    #[test]
    fn rasterize_examples() {
        let spec = GridSpec::new(0.0, 0.0, 1.0, 3, 3).unwrap();
        let at_center = FieldSource {
            position: Position::new(1.5, 1.5, 0.0),
            histogram: one_hot(2, 3.0),
        };
        let f = rasterize(core::slice::from_ref(&at_center), spec, 8).unwrap();
        assert_eq!(f.get(&GridIndex { ix: 1, iy: 1 }), Some(&one_hot(2, 3.0)));

        let other = FieldSource {
            position: Position::new(1.2, 1.9, 0.0),
            histogram: one_hot(5, 1.0),
        };
        let f = rasterize(&[at_center, other], spec, 8).unwrap();
        let merged = f.get(&GridIndex { ix: 1, iy: 1 }).unwrap();
        assert_eq!(
            (merged.counts()[2], merged.counts()[5], merged.total()),
            (3.0, 1.0, 4.0)
        );
        assert_eq!(f.populated_count(), 1);

        let empty = rasterize(&[], spec, 8).unwrap();
        assert_eq!(empty.populated_count(), 0);
    }
}

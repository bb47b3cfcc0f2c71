//! Dense fixed-bounds reference map: one histogram and one set of spectral
//! channels per grid cell, allocated up front whether visited or not.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{DescriptorField, GridIndex, GridSpec, Mode};
use crate::geometry::{orientation_bin, CellKey, Orientation, Position};
use crate::histogram::DirectionalHistogram;
use crate::temporal::{GlobalTemporalModel, TemporalConfig, WindowAccumulator, WindowSchedule};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridModel {
    spec: GridSpec,
    bins: usize,
    cells: Vec<DirectionalHistogram>,
    temporal: GlobalTemporalModel,
    window: WindowAccumulator,
    schedule: WindowSchedule,
}

impl GridModel {
    pub fn new(spec: GridSpec, bins: usize, temporal: TemporalConfig) -> Result<Self> {
        let schedule = WindowSchedule::new(temporal.update_interval)?;
        let empty = DirectionalHistogram::new(bins)?;
        Ok(Self {
            cells: alloc::vec![empty; spec.cell_count()],
            spec,
            bins,
            temporal: GlobalTemporalModel::new(temporal)?,
            window: WindowAccumulator::new(bins),
            schedule,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    /// Allocated cells, always `nx·ny`.
    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn temporal(&self) -> &GlobalTemporalModel {
        &self.temporal
    }

    pub fn histogram(&self, idx: GridIndex) -> Option<&DirectionalHistogram> {
        if idx.ix >= self.spec.nx || idx.iy >= self.spec.ny {
            return None;
        }
        self.cells.get(self.spec.linear(idx))
    }

    fn channel_cell(idx: GridIndex) -> CellKey {
        CellKey::new(idx.ix as i64, idx.iy as i64, 0)
    }

    /// Accumulates into the containing cell without touching the window schedule.
    pub fn grid_accumulate(&mut self, p: &Position, theta: Orientation, t: f64, weight: f64) -> Result<GridIndex> {
        let idx = self.spec.index_of(p).ok_or(Error::OutOfBounds { x: p.x, y: p.y })?;
        let bin = orientation_bin(theta, self.bins)?;
        let linear = self.spec.linear(idx);
        self.cells[linear].accumulate(bin, t, weight)?;
        Ok(idx)
    }

    /// Accumulates one observation and feeds the temporal windows.
    pub fn observe(&mut self, p: &Position, theta: Orientation, t: f64, weight: f64) -> Result<GridIndex> {
        self.advance_to(t)?;
        let idx = self.grid_accumulate(p, theta, t, weight)?;
        let bin = orientation_bin(theta, self.bins)?;
        self.window.record(Self::channel_cell(idx), bin, weight);
        Ok(idx)
    }

    pub fn advance_to(&mut self, t: f64) -> Result<()> {
        let mut closed = false;
        while let Some((mid, _)) = self.schedule.close_if_due(t) {
            self.window.flush(&mut self.temporal, mid)?;
            closed = true;
        }
        if closed {
            self.temporal.update_spectrum();
        }
        Ok(())
    }

    /// Closes every window up to `t_end`, flushes a trailing partial window and
    /// refreshes the spectrum.
    pub fn finalize(&mut self, t_end: f64) -> Result<()> {
        self.advance_to(t_end)?;
        if self.window.has_pending() {
            let mid = self.schedule.current_mid();
            self.window.flush(&mut self.temporal, mid)?;
            self.schedule.close_if_due(f64::INFINITY);
        }
        self.temporal.update_spectrum();
        Ok(())
    }

    pub fn grid_predict(&self, idx: GridIndex, t: f64) -> Result<Vec<f64>> {
        self.temporal.predict_location(&Self::channel_cell(idx), t, self.bins)
    }

    pub fn field(&self, mode: Mode, t: f64) -> Result<DescriptorField> {
        let mut field = DescriptorField::new(self.spec, self.bins);
        for (i, h) in self.cells.iter().enumerate() {
            if h.is_empty() {
                continue;
            }
            let idx = self.spec.unlinear(i);
            match mode {
                Mode::Historical => field.insert(idx, h.clone())?,
                Mode::Predicted => match self.grid_predict(idx, t) {
                    Ok(v) => field.insert(idx, DirectionalHistogram::from_activity(&v, t)?)?,
                    Err(Error::NotFound(_)) => {}
                    Err(e) => return Err(e),
                },
            }
        }
        Ok(field)
    }

    pub fn total_mass(&self) -> f64 {
        self.cells.iter().map(DirectionalHistogram::total).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::temporal::FrequencyCandidate;

    fn temporal() -> TemporalConfig {
        TemporalConfig {
            candidates: alloc::vec![FrequencyCandidate { period: 100.0 }],
            order: 1,
            update_interval: 10.0,
        }
    }

    fn grid() -> GridModel {
        GridModel::new(GridSpec::new(0.0, 0.0, 0.5, 10, 10).unwrap(), 8, temporal()).unwrap()
    }

    #[test]
    fn dense_allocation_regardless_of_data() {
        let g = grid();
        assert_eq!(g.cell_count(), 100);
        assert_eq!(g.total_mass(), 0.0);
    }

    #[test]
    fn accumulate_examples() {
        let mut g = grid();
        let o = Orientation::new(0.0).unwrap();
        let idx = g.grid_accumulate(&Position::new(1.1, 2.3, 0.0), o, 0.0, 1.0).unwrap();
        assert_eq!(idx, GridIndex { ix: 2, iy: 4 });
        assert_eq!(g.histogram(idx).unwrap().total(), 1.0);
        assert_eq!(g.total_mass(), 1.0);
        let e = g
            .grid_accumulate(&Position::new(7.0, 0.0, 0.0), o, 0.0, 1.0)
            .unwrap_err();
        assert!(matches!(e, Error::OutOfBounds { .. }));
    }

    #[test]
    fn predictions_follow_windows() {
        let mut g = grid();
        let o = Orientation::new(0.0).unwrap();
        for i in 0..100 {
            g.observe(&Position::new(1.1, 1.1, 0.0), o, i as f64, 1.0).unwrap();
        }
        g.finalize(100.0).unwrap();
        let idx = GridIndex { ix: 2, iy: 2 };
        let v = g.grid_predict(idx, 50.0).unwrap();
        assert!((v[4] - 1.0).abs() < 1e-9);
        assert_eq!(v.iter().filter(|&&x| x > 1e-9).count(), 1);
        assert!(g.grid_predict(GridIndex { ix: 0, iy: 0 }, 50.0).is_err());
        assert_eq!(g.field(Mode::Predicted, 50.0).unwrap().populated_count(), 1);
    }
}

//! Two-stage comparison of the graph-bound map against the grid baseline:
//! rasterize the graph model onto the baseline grid, then compare the
//! descriptor fields cell by cell where both are populated.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::{rasterize, DescriptorField, Mode};
use crate::grid::GridModel;
use crate::histogram::DescriptorParams;
use crate::mapper::FlowMapper;
use crate::metrics::{
    bhattacharyya, circular_correlation, circular_wasserstein, js_divergence, shared_range_histograms,
    wasserstein_samples,
};

/// Bins used to turn per-cell scalar values into distributions.
pub const SCALAR_BINS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataType {
    Entropy,
    Flow,
    Direction,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarComparison {
    pub js: f64,
    /// `+∞` when the value histograms do not overlap.
    #[serde(with = "sentinel")]
    pub bhattacharyya: f64,
    pub wasserstein: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionComparison {
    /// Mean per-cell circular W1, degrees.
    pub wasserstein_deg: f64,
    /// `None` when fewer than two cells carry a direction in both fields or
    /// the directions do not vary.
    pub circular_correlation: Option<f64>,
    pub correlated_cells: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeReport {
    pub mode: Mode,
    pub overlap_cells: usize,
    pub entropy: ScalarComparison,
    pub flow: ScalarComparison,
    pub direction: DirectionComparison,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneReport {
    pub scene: String,
    pub historical: ModeReport,
    pub predicted: ModeReport,
}

fn scalar_comparison(a: &[f64], b: &[f64]) -> Result<ScalarComparison> {
    let (ha, hb) = shared_range_histograms(a, b, SCALAR_BINS)?;
    Ok(ScalarComparison {
        js: js_divergence(&ha, &hb)?,
        bhattacharyya: bhattacharyya(&ha, &hb)?,
        wasserstein: wasserstein_samples(a, b)?,
    })
}

/// Compares two fields over the cells populated in both.
pub fn compare_fields(
    mode: Mode,
    graph: &DescriptorField,
    grid: &DescriptorField,
    params: &DescriptorParams,
) -> Result<ModeReport> {
    if graph.bins() != grid.bins() {
        return Err(invalid("fields use different bin counts"));
    }
    let (mut ent_a, mut ent_b) = (Vec::new(), Vec::new());
    let (mut flow_a, mut flow_b) = (Vec::new(), Vec::new());
    let (mut dir_a, mut dir_b) = (Vec::new(), Vec::new());
    let mut circ_sum = 0.0;
    for (idx, ha) in graph.populated() {
        let Some(hb) = grid.get(idx) else { continue };
        let (da, db) = (ha.descriptor(params), hb.descriptor(params));
        ent_a.push(da.entropy);
        ent_b.push(db.entropy);
        flow_a.push(da.magnitude);
        flow_b.push(db.magnitude);
        circ_sum += circular_wasserstein(&ha.normalize()?, &hb.normalize()?)?;
        if let (Some(x), Some(y)) = (da.dominant_direction, db.dominant_direction) {
            dir_a.push(x.radians());
            dir_b.push(y.radians());
        }
    }
    let overlap = ent_a.len();
    if overlap == 0 {
        return Err(Error::EmptyOverlap);
    }
    let circular_correlation = match circular_correlation(&dir_a, &dir_b) {
        Ok(r) => Some(r),
        Err(Error::UndefinedResult(_)) | Err(Error::InvalidArgument(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(ModeReport {
        mode,
        overlap_cells: overlap,
        entropy: scalar_comparison(&ent_a, &ent_b)?,
        flow: scalar_comparison(&flow_a, &flow_b)?,
        direction: DirectionComparison {
            wasserstein_deg: circ_sum / overlap as f64,
            circular_correlation,
            correlated_cells: dir_a.len(),
        },
    })
}

/// Rasterizes the graph-bound model onto the baseline grid and compares.
pub fn evaluate_scene(graph: &FlowMapper, grid: &GridModel, mode: Mode, t_eval: f64) -> Result<ModeReport> {
    let sources = graph.sources(mode, t_eval)?;
    let graph_field = rasterize(&sources, *grid.spec(), grid.bins())?;
    let grid_field = grid.field(mode, t_eval)?;
    compare_fields(mode, &graph_field, &grid_field, &graph.params().descriptor)
}

pub fn evaluate_scene_both(
    scene: impl Into<String>,
    graph: &FlowMapper,
    grid: &GridModel,
    t_eval: f64,
) -> Result<SceneReport> {
    Ok(SceneReport {
        scene: scene.into(),
        historical: evaluate_scene(graph, grid, Mode::Historical, t_eval)?,
        predicted: evaluate_scene(graph, grid, Mode::Predicted, t_eval)?,
    })
}

/// Mean and sample standard deviation of the finite values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
    /// Values dropped for being infinite or missing.
    pub excluded: usize,
}

impl Stat {
    pub fn of(values: impl IntoIterator<Item = Option<f64>>) -> Self {
        let mut kept = Vec::new();
        let mut excluded = 0;
        for v in values {
            match v {
                Some(x) if x.is_finite() => kept.push(x),
                _ => excluded += 1,
            }
        }
        let n = kept.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
                n,
                excluded,
            };
        }
        let mean = kept.iter().sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            libm::sqrt(kept.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64)
        };
        Self { mean, std, n, excluded }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub data_type: DataType,
    pub mode: Mode,
    pub js: Option<Stat>,
    pub bhattacharyya: Option<Stat>,
    pub wasserstein: Option<Stat>,
    pub circular_correlation: Option<Stat>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub scenes: usize,
    pub rows: Vec<AggregateRow>,
}

impl AggregateReport {
    pub fn row(&self, data_type: DataType, mode: Mode) -> Option<&AggregateRow> {
        self.rows.iter().find(|r| r.data_type == data_type && r.mode == mode)
    }
}

/// Per-metric mean ± std across scenes: entropy, flow and direction rows for
/// the historical and predicted sources.
pub fn aggregate(reports: &[SceneReport]) -> Result<AggregateReport> {
    if reports.is_empty() {
        return Err(invalid("cannot aggregate an empty report list"));
    }
    let mut rows = Vec::new();
    for data_type in [DataType::Entropy, DataType::Flow, DataType::Direction] {
        for mode in [Mode::Historical, Mode::Predicted] {
            let pick = |r: &SceneReport| -> ModeReport {
                match mode {
                    Mode::Historical => r.historical,
                    Mode::Predicted => r.predicted,
                }
            };
            let row = match data_type {
                DataType::Entropy | DataType::Flow => {
                    let scalar = |r: &SceneReport| {
                        let m = pick(r);
                        if data_type == DataType::Entropy {
                            m.entropy
                        } else {
                            m.flow
                        }
                    };
                    AggregateRow {
                        data_type,
                        mode,
                        js: Some(Stat::of(reports.iter().map(|r| Some(scalar(r).js)))),
                        bhattacharyya: Some(Stat::of(reports.iter().map(|r| Some(scalar(r).bhattacharyya)))),
                        wasserstein: Some(Stat::of(reports.iter().map(|r| Some(scalar(r).wasserstein)))),
                        circular_correlation: None,
                    }
                }
                DataType::Direction => AggregateRow {
                    data_type,
                    mode,
                    js: None,
                    bhattacharyya: None,
                    wasserstein: Some(Stat::of(
                        reports.iter().map(|r| Some(pick(r).direction.wasserstein_deg)),
                    )),
                    circular_correlation: Some(Stat::of(
                        reports.iter().map(|r| pick(r).direction.circular_correlation),
                    )),
                },
            };
            rows.push(row);
        }
    }
    Ok(AggregateReport {
        scenes: reports.len(),
        rows,
    })
}

/// JSON has no infinity; the distance is written as `null` when unbounded.
mod sentinel {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

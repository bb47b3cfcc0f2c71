//! Run configuration, loaded from TOML. Every field has a default so an empty
//! file is a valid configuration.

use std::path::{Path, PathBuf};

use flowmap_core::temporal::geometric_candidates;
use flowmap_core::{DescriptorParams, FrequencyCandidate, ModelParams, PlannerWeights, TemporalConfig};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub paths: PathsConfig,
    pub dataset: DatasetConfig,
    pub placement: PlacementConfig,
    pub model: ModelConfig,
    pub grid: GridConfig,
    pub planner: PlannerWeights,
    pub evaluation: EvaluationConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            paths: PathsConfig::default(),
            dataset: DatasetConfig::default(),
            placement: PlacementConfig::default(),
            model: ModelConfig::default(),
            grid: GridConfig::default(),
            planner: PlannerWeights::default(),
            evaluation: EvaluationConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub data: PathBuf,
    pub models: PathBuf,
    pub reports: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            data: "data".into(),
            models: "models".into(),
            reports: "reports".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub scenes: usize,
    /// Scene template; the built-in two-region layout when absent.
    pub template: Option<PathBuf>,
    /// Per-node probability of a reposition or removal event.
    pub event_density: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            scenes: 20,
            template: None,
            event_density: 0.02,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlacementConfig {
    /// Minimum node spacing, meters.
    pub spacing: f64,
    pub neighbors: usize,
}

impl Default for PlacementConfig {
    fn default() -> Self {
        Self {
            spacing: 1.0,
            neighbors: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub delta: f64,
    pub bins: usize,
    pub d_max: f64,
    pub tau: f64,
    /// Defaults to `d_max`.
    pub bind_radius: Option<f64>,
    /// Candidate periods in seconds; a halving ladder from the scene duration
    /// when absent.
    pub candidates: Option<Vec<f64>>,
    pub candidate_count: usize,
    pub order: usize,
    pub update_interval: f64,
    pub t_floor: f64,
    pub eps_dir: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            delta: 0.5,
            bins: 8,
            d_max: 1.0,
            tau: 60.0,
            bind_radius: None,
            candidates: None,
            candidate_count: 7,
            order: 2,
            update_interval: 10.0,
            t_floor: 1.0,
            eps_dir: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub resolution: f64,
    /// Padding around the scene bounds, meters.
    pub margin: f64,
    pub max_cells: u128,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            resolution: 0.5,
            margin: 1.0,
            max_cells: flowmap_core::field::DEFAULT_MAX_CELLS,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    /// Prediction time; half the scene duration when absent.
    pub t_eval: Option<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = toml::from_str(&text).map_err(|e| Error::format(path, e))?;
        cfg.validate().map_err(|e| Error::format(path, e))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dataset.scenes == 0 {
            return Err(Error::Usage("dataset.scenes must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.dataset.event_density) {
            return Err(Error::Usage("dataset.event_density must lie in [0, 1]".into()));
        }
        if !(self.placement.spacing > 0.0) {
            return Err(Error::Usage("placement.spacing must be positive".into()));
        }
        if !(self.grid.resolution > 0.0 && self.grid.resolution.is_finite()) || !(self.grid.margin >= 0.0) {
            return Err(Error::Usage(
                "grid resolution must be positive and margin non-negative".into(),
            ));
        }
        if let Some(t) = self.evaluation.t_eval {
            if !t.is_finite() {
                return Err(Error::Usage("evaluation.t_eval must be finite".into()));
            }
        }
        self.planner.validate()?;
        self.model_params(1.0).map(|_| ())
    }

    /// Model parameters for a scene of the given duration.
    pub fn model_params(&self, duration: f64) -> Result<ModelParams> {
        let m = &self.model;
        let candidates = match &m.candidates {
            Some(periods) => periods.iter().map(|&period| FrequencyCandidate { period }).collect(),
            None => geometric_candidates(duration, m.candidate_count)?,
        };
        let params = ModelParams {
            delta: m.delta,
            bins: m.bins,
            d_max: m.d_max,
            tau: m.tau,
            bind_radius: m.bind_radius.unwrap_or(m.d_max),
            temporal: TemporalConfig {
                candidates,
                order: m.order,
                update_interval: m.update_interval,
            },
            descriptor: DescriptorParams {
                t_floor: m.t_floor,
                eps_dir: m.eps_dir,
            },
        };
        params.validate()?;
        Ok(params)
    }

    pub fn t_eval(&self, duration: f64) -> f64 {
        self.evaluation.t_eval.unwrap_or(duration / 2.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg: RunConfig = toml::from_str("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        cfg.validate().unwrap();
        let p = cfg.model_params(1200.0).unwrap();
        assert_eq!(p.temporal.candidates.len(), 7);
        assert_eq!(p.temporal.candidates[0].period, 1200.0);
        assert_eq!(p.bind_radius, 1.0);
    }

    #[test]
    fn overrides_and_rejections() {
        let cfg: RunConfig = toml::from_str(
            "seed = 3\n[model]\ncandidates = [50.0, 100.0]\n[planner]\nentropy = 2.0\nflow = 0.0\ndirection = 1.0\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.model_params(10.0).unwrap().temporal.candidates.len(), 2);
        assert_eq!(cfg.planner.entropy, 2.0);
        assert!(toml::from_str::<RunConfig>("bogus = 1").is_err());
        let bad: RunConfig = toml::from_str("[model]\ndelta = -1.0\n").unwrap();
        assert!(bad.validate().is_err());
    }
}

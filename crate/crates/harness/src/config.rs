//! Model files and experiment configurations.

use std::path::Path;

use drkf_core::sslib::StateSpaceModel;
use drkf_core::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::filters::FilterKind;

/// Dense row-major matrices keyed as in the model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMatrices {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "C_y")]
    pub c_y: Vec<Vec<f64>>,
    #[serde(rename = "C_s")]
    pub c_s: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingSpec {
    pub dt: f64,
}

/// Either explicit matrices or the position/velocity tracking preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSpec {
    Matrices(ModelMatrices),
    Tracking { tracking: TrackingSpec },
}

impl ModelSpec {
    pub fn build(&self) -> Result<StateSpaceModel> {
        match self {
            Self::Matrices(m) => Ok(StateSpaceModel::new(
                matrix("A", &m.a)?,
                matrix("B", &m.b)?,
                matrix("C_y", &m.c_y)?,
                matrix("C_s", &m.c_s)?,
            )?),
            Self::Tracking { tracking } => {
                if !(tracking.dt > 0.0) {
                    return Err(HarnessError::config("tracking dt must be positive"));
                }
                Ok(StateSpaceModel::tracking(tracking.dt))
            }
        }
    }

    pub fn from_model(model: &StateSpaceModel) -> Self {
        Self::Matrices(ModelMatrices {
            a: rows(model.a()),
            b: rows(model.b()),
            c_y: rows(model.c_y()),
            c_s: rows(model.c_s()),
        })
    }
}

pub fn load_model(path: &Path) -> Result<StateSpaceModel> {
    let text = std::fs::read_to_string(path)?;
    let spec: ModelSpec = serde_json::from_str(&text)?;
    spec.build()
}

fn matrix(name: &str, rows: &[Vec<f64>]) -> Result<Mat> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 || m == 0 {
        return Err(HarnessError::config(format!("matrix {name} is empty")));
    }
    if rows.iter().any(|r| r.len() != m) {
        return Err(HarnessError::config(format!("matrix {name} has ragged rows")));
    }
    Ok(Mat::from_fn(n, m, |i, j| rows[i][j]))
}

/// Row-major nested vectors, the layout used in every JSON export.
pub fn rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    White,
    ArCorrelated { phi: f64 },
    WorstCase,
    /// Every disturbance is zero; useful as a sanity check.
    Zero,
}

impl NoiseKind {
    pub const DEFAULT_PHI: f64 = 0.8;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RhoSpec {
    Single(f64),
    Sweep(Vec<f64>),
}

impl RhoSpec {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Self::Single(r) => vec![*r],
            Self::Sweep(v) => v.clone(),
        }
    }
}

/// One simulation or report run. `rho` is the per-step radius; finite
/// horizon filters use `rho * sqrt(horizon)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub rho: RhoSpec,
    pub horizon: usize,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_noise")]
    pub noise: NoiseKind,
    pub filters: Vec<FilterKind>,
}

fn default_grid() -> usize {
    1024
}

fn default_trials() -> usize {
    1000
}

fn default_noise() -> NoiseKind {
    NoiseKind::White
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let rhos = self.rho.values();
        if rhos.is_empty() || rhos.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
            return Err(HarnessError::config("rho values must be positive and finite"));
        }
        if self.horizon == 0 || self.trials == 0 {
            return Err(HarnessError::config("horizon and trials must be positive"));
        }
        if self.grid < 64 || !self.grid.is_power_of_two() {
            return Err(HarnessError::config("grid must be a power of two of at least 64"));
        }
        if let NoiseKind::ArCorrelated { phi } = self.noise {
            if !(phi.abs() < 1.0) {
                return Err(HarnessError::config("AR parameter must lie in (-1, 1)"));
            }
        }
        if self.filters.is_empty() {
            return Err(HarnessError::config("no filters requested"));
        }
        self.model.build()?;
        Ok(())
    }
}

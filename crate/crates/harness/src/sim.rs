//! Monte Carlo time-domain simulation of filters over a finite horizon.
//!
//! Every filter is applied through its block lower-triangular gain, so the
//! estimation error of one trial is `T_K xi` with the disturbance stacked
//! as `[x0; w_1 .. w_{T-1}; v_0 .. v_{T-1}]`.

use std::time::Instant;

use drkf_core::finite::{worst_case_mse_finite, worst_case_transform, ErrorOperator};
use drkf_core::sslib::{build_block_toeplitz, BlockToeplitzPair};
use drkf_core::Mat;
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, NoiseKind};
use crate::error::Result;
use crate::filters::{BuiltFilter, FilterBank, FilterKind, SynthesisSetup};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterCurve {
    pub name: String,
    /// Per-step mean squared error across trials.
    pub mse: Vec<f64>,
    /// Mean of `mse` over the horizon.
    pub average: f64,
    pub average_stderr: f64,
    pub final_step: f64,
    /// Diagonal blocks of `T_K Sigma T_K^T` for the disturbance covariance `Sigma`.
    pub analytic_mse: Vec<f64>,
    pub analytic_average: f64,
    /// Worst-case expected squared error per step over the ball of radius `rho_T`.
    pub worst_case_per_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub rho: f64,
    pub rho_t: f64,
    pub horizon: usize,
    pub trials: usize,
    pub seed: u64,
    pub noise: NoiseKind,
    pub curves: Vec<FilterCurve>,
    /// Empirical `E ||xi||^2 / T`.
    pub energy: f64,
    /// `Tr(Sigma) / T`.
    pub expected_energy: f64,
    /// Wall-clock timings stay out of the serialised output so that
    /// reruns with the same seed are byte-identical.
    #[serde(skip)]
    pub synthesis_secs: Vec<(String, f64)>,
    #[serde(skip)]
    pub simulation_secs: f64,
}

impl SimResult {
    pub fn curve(&self, kind: FilterKind) -> Option<&FilterCurve> {
        let name = kind.to_string();
        self.curves.iter().find(|c| c.name == name)
    }

    /// `step,<filter>...` with one row per time step.
    pub fn curves_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["step".to_string()];
        header.extend(self.curves.iter().map(|c| c.name.clone()));
        w.write_record(&header)?;
        for t in 0..self.horizon {
            let mut row = vec![t.to_string()];
            row.extend(self.curves.iter().map(|c| c.mse[t].to_string()));
            w.write_record(&row)?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8"))
    }
}

/// Disturbance model over one horizon.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    kind: NoiseKind,
    pair: BlockToeplitzPair,
    // xi = transform * xi_white for the worst case
    transform: Option<Mat>,
}

impl NoiseModel {
    /// `worst_case` needs the finite robust filter, synthesised through `bank`.
    pub fn new(kind: NoiseKind, bank: &mut FilterBank) -> Result<Self> {
        let pair = build_block_toeplitz(bank.model(), bank.setup().horizon)?;
        let transform = match kind {
            NoiseKind::WorstCase => {
                let res = bank.finite()?;
                Some(worst_case_transform(&res.error_operator(), res.gamma_star)?)
            }
            _ => None,
        };
        Ok(Self { kind, pair, transform })
    }

    pub fn dim(&self) -> usize {
        self.pair.xi_dim()
    }

    /// Covariance of the stacked disturbance.
    pub fn covariance(&self) -> Mat {
        let n = self.dim();
        match self.kind {
            NoiseKind::White => Mat::identity(n, n),
            NoiseKind::Zero => Mat::zeros(n, n),
            NoiseKind::WorstCase => {
                let d = self.transform.as_ref().expect("worst-case transform");
                d * d.transpose()
            }
            NoiseKind::ArCorrelated { phi } => {
                let mut cov = Mat::zeros(n, n);
                for block in self.channels() {
                    for (a, &i) in block.iter().enumerate() {
                        for (b, &j) in block.iter().enumerate() {
                            cov[(i, j)] = phi.powi((a as i32 - b as i32).abs());
                        }
                    }
                }
                cov
            }
        }
    }

    // index sets of the scalar sequences that are correlated in time
    fn channels(&self) -> Vec<Vec<usize>> {
        let p = &self.pair;
        let t = p.horizon;
        let mut out: Vec<Vec<usize>> = (0..p.d_x).map(|i| vec![i]).collect();
        for c in 0..p.d_w {
            out.push((0..t - 1).map(|i| p.d_x + i * p.d_w + c).collect());
        }
        let base = p.state_noise_dim();
        for c in 0..p.d_y {
            out.push((0..t).map(|i| base + i * p.d_y + c).collect());
        }
        out
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> DVector<f64> {
        let n = self.dim();
        match self.kind {
            NoiseKind::Zero => DVector::zeros(n),
            NoiseKind::White => DVector::from_fn(n, |_, _| StandardNormal.sample(rng)),
            NoiseKind::WorstCase => {
                let white = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
                self.transform.as_ref().expect("worst-case transform") * white
            }
            NoiseKind::ArCorrelated { phi } => {
                let mut xi = DVector::zeros(n);
                let innovation = (1.0 - phi * phi).sqrt();
                for block in self.channels() {
                    let mut prev: f64 = StandardNormal.sample(rng);
                    xi[block[0]] = prev;
                    for &i in &block[1..] {
                        let draw: f64 = StandardNormal.sample(rng);
                        prev = phi * prev + innovation * draw;
                        xi[i] = prev;
                    }
                }
                xi
            }
        }
    }
}

/// Runs the configured experiment once per requested radius.
pub fn simulate(config: &ExperimentConfig) -> Result<Vec<SimResult>> {
    config.validate()?;
    let model = config.model.build()?;
    config
        .rho
        .values()
        .into_iter()
        .map(|rho| {
            let mut bank = FilterBank::new(&model, SynthesisSetup::new(rho, config.horizon, config.grid))?;
            let filters = bank.build_all(&config.filters)?;
            let noise = NoiseModel::new(config.noise, &mut bank)?;
            Ok(simulate_filters(&filters, &noise, rho, config.trials, config.seed))
        })
        .collect()
}

/// Monte Carlo over `trials` independent draws; trial `i` uses the
/// generator seeded with `seed ^ i`.
pub fn simulate_filters(filters: &[BuiltFilter], noise: &NoiseModel, rho: f64, trials: usize, seed: u64) -> SimResult {
    let start = Instant::now();
    let pair = &noise.pair;
    let horizon = pair.horizon;
    let d_s = pair.d_s;
    let ops: Vec<ErrorOperator> = filters.iter().map(|f| ErrorOperator::new(&f.k_t, pair)).collect();
    // ordered collection keeps the floating point sums independent of scheduling
    let per_trial: Vec<(Vec<f64>, f64)> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ i as u64);
            let xi = noise.sample(&mut rng);
            let mut sq = Vec::with_capacity(ops.len() * horizon);
            for op in &ops {
                let e = &op.t * &xi;
                for t in 0..horizon {
                    sq.push(e.rows(t * d_s, d_s).norm_squared());
                }
            }
            (sq, xi.norm_squared())
        })
        .collect();

    let n = trials as f64;
    let rho_t = rho * (horizon as f64).sqrt();
    let cov = noise.covariance();
    let curves = filters
        .iter()
        .zip(&ops)
        .enumerate()
        .map(|(f, (filter, op))| {
            let mut mse = vec![0.0; horizon];
            let mut averages = Vec::with_capacity(trials);
            for (sq, _) in &per_trial {
                let row = &sq[f * horizon..(f + 1) * horizon];
                for (acc, v) in mse.iter_mut().zip(row) {
                    *acc += v;
                }
                averages.push(row.iter().sum::<f64>() / horizon as f64);
            }
            mse.iter_mut().for_each(|v| *v /= n);
            let average = mse.iter().sum::<f64>() / horizon as f64;
            let var = if trials > 1 {
                averages.iter().map(|a| (a - average).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            let err_cov = &op.t * &cov * op.t.transpose();
            let analytic_mse: Vec<f64> =
                (0..horizon).map(|t| err_cov.view((t * d_s, t * d_s), (d_s, d_s)).trace()).collect();
            let analytic = analytic_mse.iter().sum::<f64>() / horizon as f64;
            FilterCurve {
                name: filter.kind.to_string(),
                final_step: mse[horizon - 1],
                mse,
                average,
                average_stderr: (var / n).sqrt(),
                analytic_mse,
                analytic_average: analytic,
                worst_case_per_step: worst_case_mse_finite(op, rho_t).0 / horizon as f64,
            }
        })
        .collect();
    SimResult {
        rho,
        rho_t,
        horizon,
        trials,
        seed,
        noise: noise.kind,
        curves,
        energy: per_trial.iter().map(|p| p.1).sum::<f64>() / n / horizon as f64,
        expected_energy: cov.trace() / horizon as f64,
        synthesis_secs: filters.iter().map(|f| (f.kind.to_string(), f.synthesis_secs)).collect(),
        simulation_secs: start.elapsed().as_secs_f64(),
    }
}

//! Runtime scaling of the finite and infinite horizon syntheses.

use std::time::Instant;

use drkf_core::finite::{fw_solve_finite, FwConfig};
use drkf_core::freq::solve_infinite;
use drkf_core::sslib::StateSpaceModel;
use serde::Serialize;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub horizon: usize,
    /// Fastest of the repeats, the estimate least affected by background load.
    pub finite_secs: f64,
    pub infinite_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub rho: f64,
    pub grid: usize,
    pub rows: Vec<BenchRow>,
    /// Least-squares slope of log runtime against log horizon.
    pub finite_exponent: f64,
    /// Standard deviation over mean of the infinite-horizon runtimes.
    pub infinite_variation: f64,
}

impl BenchReport {
    pub fn finite_strictly_increasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].finite_secs > w[0].finite_secs)
    }
}

fn fastest(v: Vec<f64>) -> f64 {
    v.into_iter().fold(f64::INFINITY, f64::min)
}

fn timed<T>(f: impl FnOnce() -> drkf_core::Result<T>) -> Result<f64> {
    let start = Instant::now();
    f()?;
    Ok(start.elapsed().as_secs_f64())
}

/// Slope of the least-squares line through `(ln x, ln y)`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    cov / var
}

/// Times finite synthesis at every horizon (radius `rho * sqrt(T)`) and the
/// horizon-independent infinite synthesis alongside it.
pub fn bench_scaling(
    model: &StateSpaceModel,
    horizons: &[usize],
    rho: f64,
    grid: usize,
    repeats: usize,
    fw: &FwConfig,
) -> Result<BenchReport> {
    if horizons.len() < 2 || repeats == 0 {
        return Err(HarnessError::config("need at least two horizons and one repeat"));
    }
    // untimed warm-up so the first horizon does not pay for cold caches
    fw_solve_finite(model, horizons[0], rho * (horizons[0] as f64).sqrt(), fw)?;
    solve_infinite(model, rho, grid, fw)?;
    // repeats cycle through the horizons so slow spells are spread across them
    let mut fin = vec![Vec::with_capacity(repeats); horizons.len()];
    let mut inf = vec![Vec::with_capacity(repeats); horizons.len()];
    for _ in 0..repeats {
        for (i, &t) in horizons.iter().enumerate() {
            let rho_t = rho * (t as f64).sqrt();
            fin[i].push(timed(|| fw_solve_finite(model, t, rho_t, fw))?);
            inf[i].push(timed(|| solve_infinite(model, rho, grid, fw))?);
        }
    }
    let rows: Vec<BenchRow> = horizons
        .iter()
        .zip(fin.into_iter().zip(inf))
        .map(|(&horizon, (f, i))| BenchRow { horizon, finite_secs: fastest(f), infinite_secs: fastest(i) })
        .collect();
    let ts: Vec<f64> = rows.iter().map(|r| r.horizon as f64).collect();
    let fs: Vec<f64> = rows.iter().map(|r| r.finite_secs).collect();
    let is: Vec<f64> = rows.iter().map(|r| r.infinite_secs).collect();
    let mean = is.iter().sum::<f64>() / is.len() as f64;
    let sd = (is.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / is.len() as f64).sqrt();
    Ok(BenchReport { rho, grid, finite_exponent: loglog_slope(&ts, &fs), infinite_variation: sd / mean, rows })
}

//! Frequency-response reports and worst-case evaluation.

use drkf_core::finite::{worst_case_mse_finite, ErrorOperator};
use drkf_core::freq::{worst_case_mse_freq, FreqContext};
use drkf_core::sslib::{build_block_toeplitz, eval_error_psd, StateSpaceModel};
use drkf_core::Mat;
use serde::Serialize;

use crate::error::{HarnessError, Result};
use crate::filters::FilterResponse;

/// Error spectrum `|T_K(e^{jw})|^2` of each filter at every grid node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FreqReport {
    pub omega: Vec<f64>,
    pub columns: Vec<(String, Vec<f64>)>,
}

impl FreqReport {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().find(|c| c.0 == name).map(|c| c.1.as_slice())
    }

    /// `k,omega,<filter>...`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["k".to_string(), "omega".to_string()];
        header.extend(self.columns.iter().map(|c| c.0.clone()));
        w.write_record(&header)?;
        for (k, om) in self.omega.iter().enumerate() {
            let mut row = vec![k.to_string(), om.to_string()];
            row.extend(self.columns.iter().map(|c| c.1[k].to_string()));
            w.write_record(&row)?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8"))
    }
}

/// Error spectrum of one filter on the context grid.
pub fn error_spectrum(ctx: &FreqContext, response: &FilterResponse) -> Result<Vec<f64>> {
    match response {
        FilterResponse::Factor(u) => {
            check_len(ctx, u.len())?;
            Ok(ctx.factor_error_psd(u)?)
        }
        FilterResponse::Samples(k) => {
            check_len(ctx, k.len())?;
            ctx.grid()
                .nodes()
                .iter()
                .zip(k)
                .map(|(&z, kz)| Ok(eval_error_psd(ctx.model(), kz, z)?.trace().re))
                .collect()
        }
    }
}

fn check_len(ctx: &FreqContext, len: usize) -> Result<()> {
    if len != ctx.grid().len() {
        return Err(HarnessError::config(format!("response has {len} samples for a grid of {}", ctx.grid().len())));
    }
    Ok(())
}

pub fn freq_response_report(ctx: &FreqContext, filters: &[(String, FilterResponse)]) -> Result<FreqReport> {
    let grid = ctx.grid();
    let omega = (0..grid.len()).map(|k| grid.omega(k)).collect();
    let columns = filters
        .iter()
        .map(|(name, resp)| Ok((name.clone(), error_spectrum(ctx, resp)?)))
        .collect::<Result<_>>()?;
    Ok(FreqReport { omega, columns })
}

/// Where a worst-case expectation is evaluated.
#[derive(Clone, Copy)]
pub enum Horizon<'a> {
    /// Summed squared error over `T` steps for a block lower-triangular gain,
    /// against a ball of total radius `rho_t`.
    Finite { k_t: &'a Mat, horizon: usize },
    /// Per-step error of a stationary filter on the context grid.
    Infinite { ctx: &'a FreqContext, response: &'a FilterResponse },
}

/// Worst-case expected squared error and the optimal transport multiplier.
pub fn evaluate_worst_case(model: &StateSpaceModel, rho: f64, target: Horizon<'_>) -> Result<(f64, f64)> {
    if !(rho >= 0.0) {
        return Err(HarnessError::config("rho must be nonnegative"));
    }
    match target {
        Horizon::Finite { k_t, horizon } => {
            let pair = build_block_toeplitz(model, horizon)?;
            if k_t.nrows() != pair.l.nrows() || k_t.ncols() != pair.h.nrows() {
                return Err(HarnessError::config("gain does not match the model and horizon"));
            }
            Ok(worst_case_mse_finite(&ErrorOperator::new(k_t, &pair), rho))
        }
        Horizon::Infinite { ctx, response } => Ok(worst_case_mse_freq(&error_spectrum(ctx, response)?, rho)),
    }
}

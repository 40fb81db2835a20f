//! CSV and JSON file formats.

use drkf_core::finite::FiniteSynthesisResult;
use drkf_core::freq::InfiniteSynthesisResult;
use drkf_core::ratapprox::RationalPsd;
use drkf_core::realize::StateSpaceFilter;
use drkf_core::Mat;
use serde::{Deserialize, Serialize};

use crate::config::rows;
use crate::error::{HarnessError, Result};

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8"))
}

/// `T,d_s,d_y` header line, its values, then `K_T` row-major.
pub fn k_to_csv(k: &Mat, horizon: usize, d_s: usize, d_y: usize) -> Result<String> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    w.write_record(["T", "d_s", "d_y"])?;
    w.write_record([horizon.to_string(), d_s.to_string(), d_y.to_string()])?;
    for i in 0..k.nrows() {
        w.write_record(k.row(i).iter().map(|v| v.to_string()))?;
    }
    finish(w)
}

pub fn k_from_csv(text: &str) -> Result<(Mat, usize, usize, usize)> {
    let mut r = csv::ReaderBuilder::new().flexible(true).has_headers(true).from_reader(text.as_bytes());
    let mut records = r.records();
    let dims = records.next().ok_or_else(|| HarnessError::config("missing dimension row"))??;
    let parse = |s: &str| s.trim().parse::<usize>().map_err(|_| HarnessError::config(format!("bad dimension '{s}'")));
    if dims.len() != 3 {
        return Err(HarnessError::config("dimension row needs T, d_s and d_y"));
    }
    let (horizon, d_s, d_y) = (parse(&dims[0])?, parse(&dims[1])?, parse(&dims[2])?);
    let (nr, nc) = (horizon * d_s, horizon * d_y);
    let mut data = Vec::with_capacity(nr * nc);
    for rec in records {
        let rec = rec?;
        if rec.len() != nc {
            return Err(HarnessError::config(format!("gain row has {} entries, expected {nc}", rec.len())));
        }
        for v in rec.iter() {
            data.push(v.trim().parse::<f64>().map_err(|_| HarnessError::config(format!("bad entry '{v}'")))?);
        }
    }
    if data.len() != nr * nc {
        return Err(HarnessError::config(format!("gain has {} rows, expected {nr}", data.len() / nc.max(1))));
    }
    Ok((Mat::from_row_slice(nr, nc, &data), horizon, d_s, d_y))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteSummary {
    pub horizon: usize,
    pub rho_t: f64,
    pub gamma_star: f64,
    pub value: f64,
    pub value_per_step: f64,
    pub iterations: usize,
    pub converged: bool,
    pub radius_residual: f64,
    pub kkt_residual: f64,
}

impl From<&FiniteSynthesisResult> for FiniteSummary {
    fn from(r: &FiniteSynthesisResult) -> Self {
        Self {
            horizon: r.horizon,
            rho_t: r.rho_t,
            gamma_star: r.gamma_star,
            value: r.value,
            value_per_step: r.value / r.horizon as f64,
            iterations: r.iterations,
            converged: r.converged,
            radius_residual: r.radius_residual,
            kkt_residual: r.kkt_residual,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfiniteSummary {
    pub rho: f64,
    pub grid: usize,
    pub gamma_star: f64,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub fixed_point_residual: f64,
    pub radius_residual: f64,
    pub anticausal_tail: f64,
}

impl From<&InfiniteSynthesisResult> for InfiniteSummary {
    fn from(r: &InfiniteSynthesisResult) -> Self {
        Self {
            rho: r.rho,
            grid: r.m_star.grid.len(),
            gamma_star: r.gamma_star,
            value: r.value,
            iterations: r.iterations,
            converged: r.converged,
            fixed_point_residual: r.fixed_point_residual,
            radius_residual: r.radius_residual,
            anticausal_tail: r.u_star.anticausal_tail,
        }
    }
}

/// `k,omega,m_star,u_re,u_im,error_psd,k<j>_re,k<j>_im...` for a scalar target.
pub fn infinite_to_csv(r: &InfiniteSynthesisResult) -> Result<String> {
    let grid = &r.m_star.grid;
    let d_y = r.k_samples.first().map_or(0, |k| k.ncols());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = ["k", "omega", "m_star", "u_re", "u_im", "error_psd"].iter().map(|s| s.to_string()).collect();
    for j in 0..d_y {
        header.push(format!("k{j}_re"));
        header.push(format!("k{j}_im"));
    }
    w.write_record(&header)?;
    for k in 0..grid.len() {
        let u = r.u_star.samples[k];
        let mut row = vec![
            k.to_string(),
            grid.omega(k).to_string(),
            r.m_star.samples[k].to_string(),
            u.re.to_string(),
            u.im.to_string(),
            r.error_psd[k].to_string(),
        ];
        for j in 0..d_y {
            let v = r.k_samples[k][(0, j)];
            row.push(v.re.to_string());
            row.push(v.im.to_string());
        }
        w.write_record(&row)?;
    }
    finish(w)
}

/// Laurent coefficients `p_0..p_m`, `q_0..q_m` of `P/Q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalSummary {
    pub m: usize,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub eps: f64,
}

impl From<&RationalPsd> for RationalSummary {
    fn from(r: &RationalPsd) -> Self {
        Self { m: r.order(), p: r.p.coeffs.clone(), q: r.q.coeffs.clone(), eps: r.eps }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterMatrices {
    #[serde(rename = "F")]
    pub f: Vec<Vec<f64>>,
    #[serde(rename = "G")]
    pub g: Vec<Vec<f64>>,
    #[serde(rename = "H")]
    pub h: Vec<Vec<f64>>,
    #[serde(rename = "L")]
    pub l: Vec<Vec<f64>>,
}

impl From<&StateSpaceFilter> for FilterMatrices {
    fn from(f: &StateSpaceFilter) -> Self {
        Self { f: rows(&f.f), g: rows(&f.g), h: rows(&f.h), l: rows(&f.l) }
    }
}

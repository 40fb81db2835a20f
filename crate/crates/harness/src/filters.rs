//! Filter construction shared by the simulator, reports and CLI.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use drkf_core::finite::{fw_solve_finite, FiniteSynthesisResult, FwConfig};
use drkf_core::freq::{impulse_response, solve_infinite_with, FreqContext, InfiniteSynthesisResult};
use drkf_core::ratapprox::{best_precision, rational_factor, LaurentPolynomial, RationalPsd};
use drkf_core::realize::{assemble_filter, StateSpaceFilter};
use drkf_core::sslib::{solve_dare, FrequencyGrid, RiccatiData, StateSpaceModel};
use drkf_core::{CMat, Mat, C64};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Radius at which the robust filter stands in for the H-infinity filter.
pub const HINF_PROXY_RHO: f64 = 1e3;

const DARE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    Kalman,
    DrkfFinite,
    DrkfInfinite,
    /// Rational approximation of the infinite-horizon filter of the given order.
    Ra(usize),
    HinfProxy,
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Kalman => f.write_str("kalman"),
            Self::DrkfFinite => f.write_str("drkf_finite"),
            Self::DrkfInfinite => f.write_str("drkf_infinite"),
            Self::Ra(m) => write!(f, "ra{m}"),
            Self::HinfProxy => f.write_str("hinf_proxy"),
        }
    }
}

impl FromStr for FilterKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "kalman" | "kf" => Ok(Self::Kalman),
            "drkf_finite" => Ok(Self::DrkfFinite),
            "drkf_infinite" | "drkf" => Ok(Self::DrkfInfinite),
            "hinf_proxy" | "hinf" => Ok(Self::HinfProxy),
            _ => {
                let order = s
                    .strip_prefix("ra")
                    .map(|r| r.trim_matches(|c| c == '(' || c == ')' || c == ':'))
                    .and_then(|r| r.parse().ok());
                order.map(Self::Ra).ok_or_else(|| HarnessError::config(format!("unknown filter '{s}'")))
            }
        }
    }
}

/// Frequency-domain description of a causal filter on the grid.
#[derive(Debug, Clone)]
pub enum FilterResponse {
    /// Member of the factor-parametrised family; the Kalman filter is `U = 1`.
    Factor(Vec<C64>),
    /// Raw samples `K(z_n)`.
    Samples(Vec<CMat>),
}

#[derive(Debug, Clone)]
pub struct BuiltFilter {
    pub kind: FilterKind,
    /// Block lower-triangular gain over the simulated horizon.
    pub k_t: Mat,
    /// Absent for the finite-horizon filter.
    pub response: Option<FilterResponse>,
    pub realization: Option<StateSpaceFilter>,
    pub rational: Option<RationalPsd>,
    pub synthesis_secs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisSetup {
    /// Per-step radius; the finite filter uses `rho * sqrt(horizon)`.
    pub rho: f64,
    pub horizon: usize,
    pub grid: usize,
    pub fw: FwConfig,
    /// Bisection tolerance on the rational approximation error.
    pub ra_tol: f64,
}

impl SynthesisSetup {
    pub fn new(rho: f64, horizon: usize, grid: usize) -> Self {
        Self { rho, horizon, grid, fw: FwConfig::default(), ra_tol: 1e-10 }
    }

    pub fn rho_t(&self) -> f64 {
        self.rho * (self.horizon as f64).sqrt()
    }
}

/// Lazily synthesises filters for one model and setup, caching the
/// expensive solves.
pub struct FilterBank {
    model: StateSpaceModel,
    setup: SynthesisSetup,
    ric: RiccatiData,
    ctx: Option<FreqContext>,
    finite: Option<(FiniteSynthesisResult, f64)>,
    infinite: Option<(InfiniteSynthesisResult, f64)>,
    proxy: Option<(InfiniteSynthesisResult, f64)>,
}

impl FilterBank {
    pub fn new(model: &StateSpaceModel, setup: SynthesisSetup) -> Result<Self> {
        let ric = solve_dare(model, DARE_TOL)?;
        Ok(Self { model: model.clone(), setup, ric, ctx: None, finite: None, infinite: None, proxy: None })
    }

    pub fn model(&self) -> &StateSpaceModel {
        &self.model
    }

    pub fn setup(&self) -> &SynthesisSetup {
        &self.setup
    }

    pub fn riccati(&self) -> &RiccatiData {
        &self.ric
    }

    pub fn context(&mut self) -> Result<&FreqContext> {
        if self.ctx.is_none() {
            let grid = FrequencyGrid::new(self.setup.grid)?;
            self.ctx = Some(FreqContext::new(&self.model, &self.ric, &grid)?);
        }
        Ok(self.ctx.as_ref().unwrap())
    }

    pub fn finite(&mut self) -> Result<&FiniteSynthesisResult> {
        if self.finite.is_none() {
            let start = Instant::now();
            let res = fw_solve_finite(&self.model, self.setup.horizon, self.setup.rho_t(), &self.setup.fw)?;
            self.finite = Some((res, start.elapsed().as_secs_f64()));
        }
        Ok(&self.finite.as_ref().unwrap().0)
    }

    pub fn infinite(&mut self) -> Result<&InfiniteSynthesisResult> {
        if self.infinite.is_none() {
            let (rho, fw) = (self.setup.rho, self.setup.fw);
            let start = Instant::now();
            let res = solve_infinite_with(self.context()?, rho, &fw)?;
            self.infinite = Some((res, start.elapsed().as_secs_f64()));
        }
        Ok(&self.infinite.as_ref().unwrap().0)
    }

    pub fn hinf_proxy(&mut self) -> Result<&InfiniteSynthesisResult> {
        if self.proxy.is_none() {
            // a baseline only, so the last iterate is acceptable at the cap
            let fw = FwConfig { error_on_cap: false, ..self.setup.fw };
            let start = Instant::now();
            let res = solve_infinite_with(self.context()?, HINF_PROXY_RHO, &fw)?;
            self.proxy = Some((res, start.elapsed().as_secs_f64()));
        }
        Ok(&self.proxy.as_ref().unwrap().0)
    }

    pub fn build(&mut self, kind: FilterKind) -> Result<BuiltFilter> {
        let horizon = self.setup.horizon;
        let (d_s, d_y) = (self.model.d_s(), self.model.d_y());
        match kind {
            FilterKind::Kalman => {
                let start = Instant::now();
                let unit = rational_factor(&RationalPsd {
                    p: LaurentPolynomial::new(vec![1.0]),
                    q: LaurentPolynomial::new(vec![1.0]),
                    eps: 0.0,
                })?;
                let ss = assemble_filter(&unit, &self.model, &self.ric)?;
                let response = if d_s == 1 { Some(FilterResponse::Factor(vec![C64::new(1.0, 0.0); self.setup.grid])) } else { None };
                Ok(BuiltFilter {
                    kind,
                    k_t: toeplitz(&state_space_taps(&ss, horizon), d_s, d_y),
                    response,
                    realization: Some(ss),
                    rational: None,
                    synthesis_secs: start.elapsed().as_secs_f64(),
                })
            }
            FilterKind::DrkfFinite => {
                self.finite()?;
                let (res, secs) = self.finite.as_ref().unwrap();
                Ok(BuiltFilter { kind, k_t: res.k.clone(), response: None, realization: None, rational: None, synthesis_secs: *secs })
            }
            FilterKind::DrkfInfinite | FilterKind::HinfProxy => {
                let res = if kind == FilterKind::HinfProxy { self.hinf_proxy()? } else { self.infinite()? }.clone();
                let secs = if kind == FilterKind::HinfProxy { self.proxy.as_ref() } else { self.infinite.as_ref() }
                    .map_or(0.0, |p| p.1);
                let taps = impulse_response(&res.k_samples);
                if taps.len() < horizon {
                    return Err(HarnessError::config("grid must have at least as many nodes as the horizon"));
                }
                Ok(BuiltFilter {
                    kind,
                    k_t: toeplitz(&taps[..horizon], d_s, d_y),
                    response: Some(FilterResponse::Factor(res.u_star.samples.clone())),
                    realization: None,
                    rational: None,
                    synthesis_secs: secs,
                })
            }
            FilterKind::Ra(order) => {
                let samples = self.infinite()?.m_star.samples.clone();
                let start = Instant::now();
                let rational = best_precision(&samples, order, self.setup.ra_tol)?;
                let factor = rational_factor(&rational)?;
                let ss = assemble_filter(&factor, &self.model, &self.ric)?;
                let nodes = self.context()?.grid().nodes().to_vec();
                let base = self.infinite.as_ref().map_or(0.0, |p| p.1);
                Ok(BuiltFilter {
                    kind,
                    k_t: toeplitz(&state_space_taps(&ss, horizon), d_s, d_y),
                    response: Some(FilterResponse::Factor(factor.samples(&nodes))),
                    realization: Some(ss),
                    rational: Some(rational),
                    synthesis_secs: base + start.elapsed().as_secs_f64(),
                })
            }
        }
    }

    pub fn build_all(&mut self, kinds: &[FilterKind]) -> Result<Vec<BuiltFilter>> {
        kinds.iter().map(|&k| self.build(k)).collect()
    }
}

/// Markov parameters `L, H G, H F G, ...` of a realised filter.
pub fn state_space_taps(f: &StateSpaceFilter, count: usize) -> Vec<Mat> {
    let mut taps = Vec::with_capacity(count);
    if count == 0 {
        return taps;
    }
    taps.push(f.l.clone());
    let mut prop = f.g.clone();
    for _ in 1..count {
        taps.push(&f.h * &prop);
        prop = &f.f * prop;
    }
    taps
}

/// Block lower-triangular Toeplitz matrix with `taps[0]` on the diagonal.
pub fn toeplitz(taps: &[Mat], d_s: usize, d_y: usize) -> Mat {
    let t = taps.len();
    let mut k = Mat::zeros(t * d_s, t * d_y);
    for i in 0..t {
        for j in 0..=i {
            k.view_mut((i * d_s, j * d_y), (d_s, d_y)).copy_from(&taps[i - j]);
        }
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use drkf_core::finite::causal_project;
    use drkf_core::sslib::build_block_toeplitz;

    #[test]
    fn filter_names_round_trip() {
        for kind in [FilterKind::Kalman, FilterKind::DrkfFinite, FilterKind::DrkfInfinite, FilterKind::Ra(3), FilterKind::HinfProxy] {
            assert_eq!(kind.to_string().parse::<FilterKind>().unwrap(), kind);
        }
        assert_eq!("RA(2)".parse::<FilterKind>().unwrap(), FilterKind::Ra(2));
        assert!("wiener".parse::<FilterKind>().is_err());
    }

    #[test]
    fn toeplitz_layout() {
        let taps = vec![Mat::from_element(1, 1, 1.0), Mat::from_element(1, 1, 2.0), Mat::from_element(1, 1, 3.0)];
        let k = toeplitz(&taps, 1, 1);
        assert_eq!(k, Mat::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 2.0, 1.0, 0.0, 3.0, 2.0, 1.0]));
    }

    #[test]
    fn steady_state_kalman_taps_approach_the_time_varying_filter() {
        // after the transient the time-varying optimal filter at M = I uses
        // the steady-state gain on recent measurements
        let model = StateSpaceModel::scalar(0.8, 1.0, 1.0, 1.0).unwrap();
        let mut bank = FilterBank::new(&model, SynthesisSetup::new(0.5, 40, 256)).unwrap();
        let kalman = bank.build(FilterKind::Kalman).unwrap();
        let pair = build_block_toeplitz(&model, 40).unwrap();
        let (k_tv, _) = causal_project(&Mat::identity(40, 40), &pair).unwrap();
        for lag in 0..5 {
            assert_relative_eq!(kalman.k_t[(39, 39 - lag)], k_tv[(39, 39 - lag)], epsilon = 1e-8);
        }
    }

    #[test]
    fn infinite_filters_share_the_toeplitz_structure() {
        let model = StateSpaceModel::tracking(1.0);
        let mut bank = FilterBank::new(&model, SynthesisSetup::new(1.0, 12, 256)).unwrap();
        let drkf = bank.build(FilterKind::DrkfInfinite).unwrap();
        let ra = bank.build(FilterKind::Ra(2)).unwrap();
        for f in [&drkf, &ra] {
            for i in 1..12 {
                assert_relative_eq!(f.k_t[(i, 1)], f.k_t[(i - 1, 0)], epsilon = 1e-12);
            }
            assert_eq!(f.k_t[(0, 1)], 0.0);
        }
        for i in 0..12 {
            assert!((drkf.k_t[(i, 0)] - ra.k_t[(i, 0)]).abs() < 1e-2);
        }
        assert!(ra.rational.as_ref().unwrap().eps < 1e-2);
    }
}

//! Infinite-horizon filter synthesis on a uniform frequency grid.
//!
//! Only scalar target signals are handled: the spectral densities are
//! positive functions and the cepstrum factorisation is the scalar one.

use alloc::vec;
use alloc::vec::Vec;

use crate::dual;
use crate::error::{Error, Result};
use crate::fft;
use crate::finite::FwConfig;
use crate::linalg::{self, to_complex};
use crate::sslib::{
    eval_delta_inv, eval_h2_and_s, eval_noncausal_error_psd, solve_dare, FrequencyGrid, RiccatiData,
    StateSpaceModel,
};
use crate::{math, CMat, Mat, C64};

const DARE_TOL: f64 = 1e-12;

/// Samples of a positive scalar density on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDensity {
    pub grid: FrequencyGrid,
    pub samples: Vec<f64>,
}

impl SpectralDensity {
    pub fn new(grid: FrequencyGrid, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::InvalidArgument("sample count differs from the grid size"));
        }
        Ok(Self { grid, samples })
    }

    pub fn constant(grid: FrequencyGrid, value: f64) -> Self {
        let samples = vec![value; grid.len()];
        Self { grid, samples }
    }
}

/// Causal, causally invertible factor `U` with `|U|^2 = M` on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFactor {
    pub grid: FrequencyGrid,
    pub samples: Vec<C64>,
    /// Largest anticausal inverse-DFT coefficient relative to the largest one.
    pub anticausal_tail: f64,
}

/// Cepstral (Kolmogorov) factorisation:
/// `U(z_n) = exp(l_0/2 + sum_{k=1}^{N/2-1} l_k z_n^{-k} + (-1)^n l_{N/2}/2)`
/// with `l` the inverse DFT of `log M`.
pub fn spectral_factor_dft(m: &SpectralDensity) -> Result<SpectralFactor> {
    let samples = factor_samples(&m.samples)?;
    let anticausal_tail = anticausal_tail(&samples);
    Ok(SpectralFactor { grid: m.grid.clone(), samples, anticausal_tail })
}

fn factor_samples(m: &[f64]) -> Result<Vec<C64>> {
    let n = m.len();
    let mut cep = Vec::with_capacity(n);
    for (index, &x) in m.iter().enumerate() {
        if !(x > 0.0) || !x.is_finite() {
            return Err(Error::NonPositiveSample { index });
        }
        cep.push(C64::new(math::ln(x), 0.0));
    }
    fft::inverse(&mut cep);
    let half = n / 2;
    let mut c = vec![C64::new(0.0, 0.0); n];
    c[0] = cep[0] * 0.5;
    c[1..half].copy_from_slice(&cep[1..half]);
    c[half] = cep[half] * 0.5;
    fft::forward(&mut c);
    Ok(c.into_iter().map(|e| e.exp()).collect())
}

/// `max_{N/2 < k < N} |c_k| / max_k |c_k|` for the inverse DFT `c` of the samples.
pub fn anticausal_tail(samples: &[C64]) -> f64 {
    let mut c = samples.to_vec();
    fft::inverse(&mut c);
    let n = c.len();
    let top = c.iter().fold(0.0f64, |a, x| a.max(x.norm()));
    let tail = c[n / 2 + 1..].iter().fold(0.0f64, |a, x| a.max(x.norm()));
    if top > 0.0 {
        tail / top
    } else {
        0.0
    }
}

/// Impulse response `k_0, k_1, ...` of sampled transfer matrices, by
/// inverse DFT entry by entry (real parts).
pub fn impulse_response(samples: &[CMat]) -> Vec<Mat> {
    let n = samples.len();
    if n == 0 {
        return Vec::new();
    }
    let (r, c) = samples[0].shape();
    let mut taps = vec![Mat::zeros(r, c); n];
    let mut buf = vec![C64::new(0.0, 0.0); n];
    for i in 0..r {
        for j in 0..c {
            for (b, s) in buf.iter_mut().zip(samples) {
                *b = s[(i, j)];
            }
            fft::inverse(&mut buf);
            for (t, b) in taps.iter_mut().zip(&buf) {
                t[(i, j)] = b.re;
            }
        }
    }
    taps
}

/// Per-node quantities that stay fixed during the Frank-Wolfe iterations.
#[derive(Debug, Clone)]
pub struct FreqContext {
    model: StateSpaceModel,
    ric: RiccatiData,
    grid: FrequencyGrid,
    // C_bar (I - z A_bar)^{-1}, N x d_x
    cbar_res: Vec<C64>,
    // (I - z A_bar)^{-1} B_bar, N x d_x x d_y
    res_bbar: Vec<C64>,
    t_nc: Vec<f64>,
    k_h2: Vec<CMat>,
    s: Vec<CMat>,
    delta_inv: Vec<CMat>,
}

impl FreqContext {
    pub fn new(model: &StateSpaceModel, ric: &RiccatiData, grid: &FrequencyGrid) -> Result<Self> {
        if model.d_s() != 1 {
            return Err(Error::UnsupportedDimension(model.d_s()));
        }
        let (d_x, d_y) = (model.d_x(), model.d_y());
        let n = grid.len();
        let mut cbar_res = Vec::with_capacity(n * d_x);
        let mut res_bbar = Vec::with_capacity(n * d_x * d_y);
        let mut t_nc = Vec::with_capacity(n);
        let mut k_h2 = Vec::with_capacity(n);
        let mut s = Vec::with_capacity(n);
        let mut delta_inv = Vec::with_capacity(n);
        let eye = CMat::identity(d_x, d_x);
        for &z in grid.nodes() {
            let res = linalg::resolvent_reflected(&ric.a_bar, &eye, z)?;
            let row = to_complex(&ric.c_bar) * &res;
            cbar_res.extend(row.iter().copied());
            let rb = &res * to_complex(&ric.b_bar);
            for i in 0..d_x {
                for j in 0..d_y {
                    res_bbar.push(rb[(i, j)]);
                }
            }
            t_nc.push(eval_noncausal_error_psd(model, ric, z)?[(0, 0)].re.max(0.0));
            let (kh, sz) = eval_h2_and_s(model, ric, z)?;
            k_h2.push(kh);
            s.push(sz);
            delta_inv.push(eval_delta_inv(model, ric, z)?);
        }
        Ok(Self { model: model.clone(), ric: ric.clone(), grid: grid.clone(), cbar_res, res_bbar, t_nc, k_h2, s, delta_inv })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn riccati(&self) -> &RiccatiData {
        &self.ric
    }

    pub fn model(&self) -> &StateSpaceModel {
        &self.model
    }

    /// `T_Ko T_Ko^*` at every node.
    pub fn noncausal_psd(&self) -> &[f64] {
        &self.t_nc
    }

    /// Steady-state Kalman filter samples.
    pub fn kalman_samples(&self) -> &[CMat] {
        &self.k_h2
    }

    /// Trapezoid-rule `Gamma = (1/N) sum_z U(z) C_bar (I - z A_bar)^{-1}`.
    pub fn gamma_param(&self, u: &[C64]) -> Result<Mat> {
        let d_x = self.model.d_x();
        let n = self.grid.len();
        let mut acc = vec![C64::new(0.0, 0.0); d_x];
        // sum of magnitudes, the scale of the rounding error in acc
        let mut mass = vec![0.0f64; d_x];
        for (k, &uk) in u.iter().enumerate() {
            for i in 0..d_x {
                let term = uk * self.cbar_res[k * d_x + i];
                acc[i] += term;
                mass[i] += term.norm();
            }
        }
        let scale = 1.0 / n as f64;
        let mut gamma = Mat::zeros(1, d_x);
        for i in 0..d_x {
            let v = acc[i] * scale;
            if v.im.abs() > 1e-9 * (1.0 + v.re.abs()).max(mass[i] * scale) {
                return Err(Error::NumericalFailure("Gamma has a non-negligible imaginary part"));
            }
            gamma[(0, i)] = v.re;
        }
        Ok(gamma)
    }

    // Gamma (I - z A_bar)^{-1} B_bar at node k.
    fn correction_row(&self, k: usize, gamma: &Mat) -> Vec<C64> {
        let (d_x, d_y) = (self.model.d_x(), self.model.d_y());
        let base = k * d_x * d_y;
        (0..d_y)
            .map(|j| {
                (0..d_x).fold(C64::new(0.0, 0.0), |acc, i| acc + self.res_bbar[base + i * d_y + j] * gamma[(0, i)])
            })
            .collect()
    }

    /// Error spectrum of the filter parametrised by `(U, Gamma)`, which is
    /// also the gradient of the dual objective.
    pub fn gradient(&self, u: &[C64], gamma: &Mat) -> Vec<f64> {
        (0..self.grid.len())
            .map(|k| {
                let row = self.correction_row(k, gamma);
                let energy: f64 = row.iter().map(|x| x.norm_sqr()).sum();
                energy / u[k].norm_sqr() + self.t_nc[k]
            })
            .collect()
    }

    /// `K(z) = K_H2 + U^{-1} [U S - Gamma (z^{-1} I - A_bar)^{-1} B_bar] Delta^{-1}`.
    pub fn filter_samples(&self, u: &[C64], gamma: &Mat) -> Vec<CMat> {
        let nodes = self.grid.nodes();
        (0..self.grid.len())
            .map(|k| {
                let row = self.correction_row(k, gamma);
                let z = nodes[k];
                let minus = CMat::from_row_iterator(1, row.len(), row.iter().map(|x| x * z));
                let bracket = &self.s[k] * u[k] - minus;
                &self.k_h2[k] + bracket * &self.delta_inv[k] / u[k]
            })
            .collect()
    }

    /// Error spectrum of the filter built from the factor samples `u`.
    pub fn factor_error_psd(&self, u: &[C64]) -> Result<Vec<f64>> {
        let gamma = self.gamma_param(u)?;
        Ok(self.gradient(u, &gamma))
    }
}

/// `Gamma` for a sampled factor, without a precomputed context.
pub fn compute_gamma_param(u: &SpectralFactor, ric: &RiccatiData) -> Result<Mat> {
    let d_x = ric.a_bar.nrows();
    let eye = CMat::identity(d_x, d_x);
    let mut acc = CMat::zeros(1, d_x);
    for (&z, &uz) in u.grid.nodes().iter().zip(&u.samples) {
        let res = linalg::resolvent_reflected(&ric.a_bar, &eye, z)?;
        acc += to_complex(&ric.c_bar) * res * uz;
    }
    acc /= C64::new(u.grid.len() as f64, 0.0);
    let top = linalg::max_abs_c(&acc);
    if acc.iter().any(|x| x.im.abs() > 1e-9 * (1.0 + top)) {
        return Err(Error::NumericalFailure("Gamma has a non-negligible imaginary part"));
    }
    Ok(acc.map(|x| x.re))
}

/// Gradient spectrum `|U^{-1} Gamma (I - z A_bar)^{-1} B_bar|^2 + T_Ko T_Ko^*` at `z`.
pub fn gradient_psd(u: C64, gamma: &Mat, ric: &RiccatiData, model: &StateSpaceModel, z: C64) -> Result<f64> {
    let res = linalg::resolvent_reflected(&ric.a_bar, &to_complex(&ric.b_bar), z)?;
    let row = to_complex(gamma) * res;
    let energy: f64 = row.iter().map(|x| x.norm_sqr()).sum();
    let t_nc = eval_noncausal_error_psd(model, ric, z)?[(0, 0)].re;
    Ok(energy / u.norm_sqr() + t_nc)
}

/// Optimal filter sample at `z` for factor value `u` and parameter `Gamma`.
pub fn optimal_filter_samples(
    u: C64,
    gamma: &Mat,
    ric: &RiccatiData,
    model: &StateSpaceModel,
    z: C64,
) -> Result<CMat> {
    let (k_h2, s) = eval_h2_and_s(model, ric, z)?;
    let zi = C64::new(1.0, 0.0) / z;
    let anti = to_complex(gamma) * linalg::resolvent(&ric.a_bar, &to_complex(&ric.b_bar), zi)?;
    let bracket = s * u - anti;
    Ok(k_h2 + bracket * eval_delta_inv(model, ric, z)? / u)
}

/// Solves `(1/N) sum ((1 - G/gamma)^{-1} - 1)^2 = rho^2` and returns
/// `gamma` with `M~ = (1 - G/gamma)^{-2}`.
pub fn bisection_gamma_freq(g: &[f64], rho: f64, tol: f64) -> (f64, Vec<f64>) {
    let eigs: Vec<f64> = g.iter().map(|w| w.max(0.0)).collect();
    let gamma = dual::solve_gamma(&eigs, 1.0 / g.len() as f64, rho, tol);
    if !gamma.is_finite() {
        return (gamma, vec![1.0; g.len()]);
    }
    let m = eigs
        .iter()
        .map(|&w| {
            let r = 1.0 / (1.0 - w / gamma);
            r * r
        })
        .collect();
    (gamma, m)
}

/// Per-step worst-case MSE of a filter with error spectrum `psd`.
pub fn worst_case_mse_freq(psd: &[f64], rho: f64) -> (f64, f64) {
    let eigs: Vec<f64> = psd.iter().map(|w| w.max(0.0)).collect();
    let weight = 1.0 / psd.len() as f64;
    if rho <= 0.0 {
        return (weight * eigs.iter().sum::<f64>(), f64::INFINITY);
    }
    let gamma = dual::solve_gamma(&eigs, weight, rho, BISECTION_TOL);
    (dual::dual_value(&eigs, weight, gamma, rho), gamma)
}

const BISECTION_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct InfiniteSynthesisResult {
    pub m_star: SpectralDensity,
    pub u_star: SpectralFactor,
    /// Finite-dimensional parameter of the anticausal correction.
    pub gamma_param: Mat,
    pub gamma_star: f64,
    pub k_samples: Vec<CMat>,
    /// Error spectrum `T_K T_K^*` of the returned filter.
    pub error_psd: Vec<f64>,
    /// Per-step worst-case MSE.
    pub value: f64,
    pub fixed_point_residual: f64,
    pub radius_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Normalised linearisation gaps `(1/N) sum G_k (M~_k - M_k)`.
    pub gap_history: Vec<f64>,
    pub rho: f64,
}

pub fn solve_infinite(model: &StateSpaceModel, rho: f64, n: usize, config: &FwConfig) -> Result<InfiniteSynthesisResult> {
    if !(rho > 0.0) {
        return Err(Error::InvalidArgument("rho must be positive"));
    }
    if n < 64 {
        return Err(Error::InvalidArgument("grid size must be at least 64"));
    }
    let grid = FrequencyGrid::new(n)?;
    let ric = solve_dare(model, DARE_TOL)?;
    let ctx = FreqContext::new(model, &ric, &grid)?;
    solve_infinite_with(&ctx, rho, config)
}

/// Frank-Wolfe iterations on a prepared context.
pub fn solve_infinite_with(ctx: &FreqContext, rho: f64, config: &FwConfig) -> Result<InfiniteSynthesisResult> {
    let n = ctx.grid.len();
    let mut m = vec![1.0; n];
    let mut gaps = Vec::new();
    let mut converged = false;
    let mut change = f64::INFINITY;
    let mut iterations = 0;
    for k in 0..config.max_iter {
        let u = factor_samples(&m)?;
        let gamma = ctx.gamma_param(&u)?;
        let mut g = ctx.gradient(&u, &gamma);
        mirror_average(&mut g);
        let (_, m_tilde) = bisection_gamma_freq(&g, rho, config.bisection_tol);
        let gap = g.iter().zip(&m_tilde).zip(&m).map(|((g, mt), m)| g * (mt - m)).sum::<f64>() / n as f64;
        gaps.push(gap);
        let eta = 2.0 / (k as f64 + 2.0);
        let mut diff: f64 = 0.0;
        let mut top: f64 = 0.0;
        for (mi, mt) in m.iter_mut().zip(&m_tilde) {
            let next = (1.0 - eta) * *mi + eta * mt;
            diff = diff.max((next - *mi).abs());
            top = top.max(mi.abs());
            *mi = next;
        }
        change = diff / top;
        iterations = k + 1;
        if change <= config.tol {
            converged = true;
            break;
        }
    }
    if !converged && config.error_on_cap {
        return Err(Error::IterationCap { iterations, change });
    }
    let u = factor_samples(&m)?;
    let gamma_param = ctx.gamma_param(&u)?;
    let error_psd = ctx.gradient(&u, &gamma_param);
    let (value, gamma_star) = worst_case_mse_freq(&error_psd, rho);
    let k_samples = ctx.filter_samples(&u, &gamma_param);
    let m_star = SpectralDensity { grid: ctx.grid.clone(), samples: m };
    let residuals = residual_parts(ctx, &m_star, &gamma_param, gamma_star, rho)?;
    let tail = anticausal_tail(&u);
    Ok(InfiniteSynthesisResult {
        m_star,
        u_star: SpectralFactor { grid: ctx.grid.clone(), samples: u, anticausal_tail: tail },
        gamma_param,
        gamma_star,
        k_samples,
        error_psd,
        value,
        fixed_point_residual: residuals.max(),
        radius_residual: residuals.radius,
        iterations,
        converged,
        gap_history: gaps,
        rho,
    })
}

// Densities of real systems are even; near gamma = max G the update
// (1 - G/gamma)^{-2} would otherwise amplify rounding asymmetries.
fn mirror_average(g: &mut [f64]) {
    let n = g.len();
    for k in 1..n / 2 {
        let mean = 0.5 * (g[k] + g[n - k]);
        g[k] = mean;
        g[n - k] = mean;
    }
}

/// `(1 - G/gamma)^{-2}` at every node, the worst-case disturbance spectrum.
pub fn worst_case_psd(result: &InfiniteSynthesisResult) -> SpectralDensity {
    let samples = result
        .error_psd
        .iter()
        .map(|&g| {
            if result.gamma_star.is_finite() {
                let r = 1.0 / (1.0 - g.max(0.0) / result.gamma_star);
                r * r
            } else {
                1.0
            }
        })
        .collect();
    SpectralDensity { grid: result.m_star.grid.clone(), samples }
}

/// The three normalised parts of the fixed-point residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualParts {
    /// `max |M - (1 - G/gamma)^{-2}| / max M`.
    pub density: f64,
    /// `max |Gamma - Gamma(U)| / max |Gamma(U)|`.
    pub gamma_param: f64,
    /// `|(1/N) sum (G/(gamma - G))^2 - rho^2| / rho^2`.
    pub radius: f64,
}

impl ResidualParts {
    pub fn max(&self) -> f64 {
        self.density.max(self.gamma_param).max(self.radius)
    }
}

/// Residual parts of a candidate `(M, Gamma, gamma)` for radius `rho`.
pub fn residual_parts(
    ctx: &FreqContext,
    m: &SpectralDensity,
    gamma_param: &Mat,
    gamma: f64,
    rho: f64,
) -> Result<ResidualParts> {
    let u = factor_samples(&m.samples)?;
    let g = ctx.gradient(&u, gamma_param);
    let top = m.samples.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let density = m
        .samples
        .iter()
        .zip(&g)
        .map(|(&mi, &gi)| {
            let target = if gamma.is_finite() {
                let r = 1.0 / (1.0 - gi.max(0.0) / gamma);
                r * r
            } else {
                1.0
            };
            (mi - target).abs()
        })
        .fold(0.0f64, f64::max)
        / top;
    let recomputed = ctx.gamma_param(&u)?;
    let scale = linalg::max_abs(&recomputed).max(f64::MIN_POSITIVE);
    let gamma_part = linalg::max_abs(&(gamma_param - &recomputed)) / scale;
    let radius = if rho > 0.0 {
        let eigs: Vec<f64> = g.iter().map(|w| w.max(0.0)).collect();
        let term = if gamma.is_finite() { dual::radius_term(&eigs, 1.0 / eigs.len() as f64, gamma) } else { 0.0 };
        (term - rho * rho).abs() / (rho * rho)
    } else {
        0.0
    };
    Ok(ResidualParts { density, gamma_param: gamma_part, radius })
}

/// Largest normalised residual of the optimality conditions at `result`.
pub fn fixed_point_residual(result: &InfiniteSynthesisResult, model: &StateSpaceModel, ric: &RiccatiData) -> Result<f64> {
    let ctx = FreqContext::new(model, ric, &result.m_star.grid)?;
    Ok(residual_parts(&ctx, &result.m_star, &result.gamma_param, result.gamma_star, result.rho)?.max())
}

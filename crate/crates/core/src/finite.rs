//! Finite-horizon distributionally robust filter.
//!
//! The optimal causal filter is found by Frank-Wolfe on the concave dual
//! in the disturbance second-moment matrix `M`; each linearised step is a
//! causal Wiener-Hopf projection followed by a scalar bisection for the
//! transport multiplier `gamma`. The semidefinite program is only assembled
//! afterwards, as a certificate.

use alloc::vec::Vec;

use crate::dual;
use crate::error::{Error, Result};
use crate::linalg;
use crate::sslib::{build_block_toeplitz, BlockToeplitzPair, StateSpaceModel};
use crate::Mat;

/// Error operator `T_K = [K H - L, K]` mapping `[x0; w; v]` to the
/// estimation error.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorOperator {
    pub t: Mat,
}

impl ErrorOperator {
    pub fn new(k: &Mat, pair: &BlockToeplitzPair) -> Self {
        let rows = k.nrows();
        let sn = pair.state_noise_dim();
        let mut t = Mat::zeros(rows, sn + k.ncols());
        t.columns_mut(0, sn).copy_from(&(k * &pair.h - &pair.l));
        t.columns_mut(sn, k.ncols()).copy_from(k);
        Self { t }
    }

    /// `T_K T_K^T`.
    pub fn gram(&self) -> Mat {
        linalg::symmetrize(&(&self.t * self.t.transpose()))
    }
}

/// Zeroes every entry above the block diagonal of a `(T d_s) x (T d_y)` matrix.
pub fn causal_mask(k: &mut Mat, d_s: usize, d_y: usize) {
    for c in 0..k.ncols() {
        for r in 0..k.nrows() {
            if r / d_s < c / d_y {
                k[(r, c)] = 0.0;
            }
        }
    }
}

/// Precomputed pieces of the causal projection that do not depend on `M`.
#[derive(Debug, Clone)]
pub struct CausalProjector {
    pair: BlockToeplitzPair,
    delta: Mat,
    delta_inv: Mat,
    k_nc_delta: Mat,
    k_nc: Mat,
}

impl CausalProjector {
    pub fn new(pair: &BlockToeplitzPair) -> Result<Self> {
        let ny = pair.h.nrows();
        let s = Mat::identity(ny, ny) + &pair.h * pair.h.transpose();
        let delta = s.clone().cholesky().ok_or(Error::NotPd)?.l();
        let delta_inv = delta
            .clone()
            .solve_lower_triangular(&Mat::identity(ny, ny))
            .ok_or(Error::NotPd)?;
        let s_inv = delta_inv.transpose() * &delta_inv;
        let k_nc = &pair.l * pair.h.transpose() * s_inv;
        let k_nc_delta = &k_nc * &delta;
        Ok(Self { pair: pair.clone(), delta, delta_inv, k_nc_delta, k_nc })
    }

    pub fn pair(&self) -> &BlockToeplitzPair {
        &self.pair
    }

    /// Non-causal optimum `K_o = L H^T (I + H H^T)^{-1}`.
    pub fn noncausal(&self) -> &Mat {
        &self.k_nc
    }

    /// Lower Cholesky factor of `I + H H^T`.
    pub fn delta(&self) -> &Mat {
        &self.delta
    }

    /// Minimises `Tr(T_K T_K^T M)` over block-lower-triangular `K`.
    pub fn project(&self, m: &Mat) -> Result<(Mat, f64)> {
        let u = causal_factor(m)?;
        let (d_s, d_y) = (self.pair.d_s, self.pair.d_y);
        let mut x = &u * &self.k_nc_delta;
        causal_mask(&mut x, d_s, d_y);
        let mut k = u.solve_lower_triangular(&x).ok_or(Error::NotPd)? * &self.delta_inv;
        causal_mask(&mut k, d_s, d_y);
        let t = ErrorOperator::new(&k, &self.pair);
        let phi = (t.gram() * m).trace();
        Ok((k, phi))
    }
}

/// Lower-triangular `U` with `U^T U = M`, from the exchange-permuted Cholesky
/// factorisation `U = J chol(J M J)^T J`.
pub fn causal_factor(m: &Mat) -> Result<Mat> {
    let n = m.nrows();
    let j = linalg::exchange(n);
    let jmj = linalg::symmetrize(&(&j * m * &j));
    let r = jmj.cholesky().ok_or(Error::NotPd)?.l();
    Ok(&j * r.transpose() * &j)
}

/// Causal Wiener-Hopf projection: returns the optimal `K_T` for weight `M`
/// and the attained `Tr(T_K T_K^T M)`.
pub fn causal_project(m: &Mat, pair: &BlockToeplitzPair) -> Result<(Mat, f64)> {
    CausalProjector::new(pair)?.project(m)
}

/// Solves `Tr[((I - G/gamma)^{-1} - I)^2] = rho^2` for `gamma` and returns
/// the maximiser `(I - G/gamma)^{-2}` of the linearised step. A zero `G`
/// yields `gamma = inf` and the identity.
pub fn bisection_gamma_matrix(g: &Mat, rho: f64, tol: f64) -> (f64, Mat) {
    let n = g.nrows();
    let (eigs, v) = linalg::sym_eigen(g);
    let eigs: Vec<f64> = eigs.into_iter().map(|w| w.max(0.0)).collect();
    let gamma = dual::solve_gamma(&eigs, 1.0, rho, tol);
    if !gamma.is_finite() {
        return (gamma, Mat::identity(n, n));
    }
    let d = Mat::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        eigs.iter().map(|&w| {
            let r = 1.0 / (1.0 - w / gamma);
            r * r
        }),
    ));
    (gamma, linalg::symmetrize(&(&v * d * v.transpose())))
}

/// Worst-case expected squared error over the Wasserstein ball of radius
/// `rho_t` around the identity-covariance nominal, with the optimal `gamma`.
pub fn worst_case_mse_finite(t_k: &ErrorOperator, rho_t: f64) -> (f64, f64) {
    let (eigs, _) = linalg::sym_eigen(&t_k.gram());
    let eigs: Vec<f64> = eigs.into_iter().map(|w| w.max(0.0)).collect();
    if rho_t <= 0.0 {
        return (eigs.iter().sum(), f64::INFINITY);
    }
    let gamma = dual::solve_gamma(&eigs, 1.0, rho_t, BISECTION_TOL);
    (dual::dual_value(&eigs, 1.0, gamma, rho_t), gamma)
}

const BISECTION_TOL: f64 = 1e-10;

/// Transport map `D = (I - T_K^T T_K / gamma)^{-1}` sending nominal to
/// worst-case disturbances.
pub fn worst_case_transform(t_k: &ErrorOperator, gamma: f64) -> Result<Mat> {
    let n = t_k.t.ncols();
    if !gamma.is_finite() {
        return Ok(Mat::identity(n, n));
    }
    let gram = linalg::symmetrize(&(t_k.t.transpose() * &t_k.t));
    let top = linalg::max_sym_eigenvalue(&gram);
    if !(gamma > top) {
        return Err(Error::GammaTooSmall { gamma, lambda_max: top });
    }
    Ok(linalg::sym_fn(&gram, |w| 1.0 / (1.0 - w / gamma)))
}

/// Smallest eigenvalue of the assembled block LMI and the value of the
/// semidefinite objective at `X = gamma^2 (gamma I - T_K T_K^T)^{-1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpCertificate {
    pub min_eigenvalue: f64,
    pub objective: f64,
}

pub fn sdp_certificate(k: &Mat, gamma: f64, pair: &BlockToeplitzPair, rho_t: f64) -> Result<SdpCertificate> {
    let proj = CausalProjector::new(pair)?;
    let ns = k.nrows();
    let ny = k.ncols();
    let t_k = ErrorOperator::new(k, pair);
    let sn = pair.state_noise_dim();
    let hth = Mat::identity(sn, sn) + pair.h.transpose() * &pair.h;
    let t_nc = linalg::symmetrize(&(&pair.l * linalg::inverse(&hth)? * pair.l.transpose()));
    let s_inv = linalg::symmetrize(&linalg::inverse(&(proj.delta() * proj.delta().transpose()))?);
    let eye = Mat::identity(ns, ns);
    let x = linalg::symmetrize(&(linalg::inverse(&(&eye * gamma - t_k.gram()))? * (gamma * gamma)));
    let dk = k - proj.noncausal();
    let dim = 2 * ns + ny;
    let mut lmi = Mat::zeros(dim, dim);
    lmi.view_mut((0, 0), (ns, ns)).copy_from(&x);
    lmi.view_mut((0, ns), (ns, ns)).copy_from(&(&eye * gamma));
    lmi.view_mut((ns, 0), (ns, ns)).copy_from(&(&eye * gamma));
    lmi.view_mut((ns, ns), (ns, ns)).copy_from(&(&eye * gamma - t_nc));
    lmi.view_mut((ns, 2 * ns), (ns, ny)).copy_from(&dk);
    lmi.view_mut((2 * ns, ns), (ny, ns)).copy_from(&dk.transpose());
    lmi.view_mut((2 * ns, 2 * ns), (ny, ny)).copy_from(&s_inv);
    let min_eigenvalue = linalg::min_sym_eigenvalue(&lmi);
    let objective = gamma * (rho_t * rho_t - ns as f64) + x.trace();
    Ok(SdpCertificate { min_eigenvalue, objective })
}

/// Frank-Wolfe settings shared by both horizons.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FwConfig {
    /// Stop once the relative change of `M` falls to this level.
    pub tol: f64,
    pub max_iter: usize,
    pub bisection_tol: f64,
    /// Report hitting `max_iter` as [`Error::IterationCap`] instead of
    /// returning the last iterate.
    pub error_on_cap: bool,
}

impl Default for FwConfig {
    fn default() -> Self {
        Self { tol: 1e-6, max_iter: 5000, bisection_tol: 1e-10, error_on_cap: true }
    }
}

#[derive(Debug, Clone)]
pub struct FiniteSynthesisResult {
    pub k: Mat,
    pub gamma_star: f64,
    pub m_star: Mat,
    /// Worst-case summed squared error over the horizon.
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Linearisation gaps `Tr(G_k (M~_k - M_k))`.
    pub gap_history: Vec<f64>,
    /// `||M - (I - G/gamma)^{-2}||_F / ||M||_F` at the returned filter.
    pub kkt_residual: f64,
    /// `|Tr[((I - G/gamma)^{-1} - I)^2] - rho^2| / rho^2`.
    pub radius_residual: f64,
    pub horizon: usize,
    pub rho_t: f64,
    pub pair: BlockToeplitzPair,
}

impl FiniteSynthesisResult {
    pub fn error_operator(&self) -> ErrorOperator {
        ErrorOperator::new(&self.k, &self.pair)
    }
}

pub fn fw_solve_finite(
    model: &StateSpaceModel,
    horizon: usize,
    rho_t: f64,
    config: &FwConfig,
) -> Result<FiniteSynthesisResult> {
    if !(rho_t > 0.0) {
        return Err(Error::InvalidArgument("rho_T must be positive"));
    }
    let pair = build_block_toeplitz(model, horizon)?;
    let proj = CausalProjector::new(&pair)?;
    let n = pair.l.nrows();
    let mut m = Mat::identity(n, n);
    let mut gaps = Vec::new();
    let mut converged = false;
    let mut change = f64::INFINITY;
    let mut iterations = 0;
    for k in 0..config.max_iter {
        let (kt, _) = proj.project(&m)?;
        let g = ErrorOperator::new(&kt, &pair).gram();
        let (_, m_tilde) = bisection_gamma_matrix(&g, rho_t, config.bisection_tol);
        gaps.push((&g * (&m_tilde - &m)).trace());
        let eta = 2.0 / (k as f64 + 2.0);
        let next = linalg::symmetrize(&(&m * (1.0 - eta) + &m_tilde * eta));
        change = (&next - &m).norm() / m.norm();
        m = next;
        iterations = k + 1;
        if change <= config.tol {
            converged = true;
            break;
        }
    }
    if !converged && config.error_on_cap {
        return Err(Error::IterationCap { iterations, change });
    }
    let (k, _) = proj.project(&m)?;
    let t_k = ErrorOperator::new(&k, &pair);
    let (value, gamma_star) = worst_case_mse_finite(&t_k, rho_t);
    let g = t_k.gram();
    let (eigs, _) = linalg::sym_eigen(&g);
    let eigs: Vec<f64> = eigs.into_iter().map(|w| w.max(0.0)).collect();
    let (kkt_residual, radius_residual) = if gamma_star.is_finite() {
        let fixed = linalg::sym_fn(&g, |w| {
            let r = 1.0 / (1.0 - w.max(0.0) / gamma_star);
            r * r
        });
        let rad = dual::radius_term(&eigs, 1.0, gamma_star);
        ((&m - fixed).norm() / m.norm(), (rad - rho_t * rho_t).abs() / (rho_t * rho_t))
    } else {
        ((&m - Mat::identity(n, n)).norm() / m.norm(), 1.0)
    };
    Ok(FiniteSynthesisResult {
        k,
        gamma_star,
        m_star: m,
        value,
        iterations,
        converged,
        gap_history: gaps,
        kkt_residual,
        radius_residual,
        horizon,
        rho_t,
        pair,
    })
}

//! State-space core: model validation, the filtering Riccati equation,
//! canonical factors, transfer-function evaluation and block-Toeplitz
//! operators for finite horizons.
//!
//! Disturbances are stacked as `xi = [x0; w_0..w_{T-2}; v_0..v_{T-1}]`
//! with identity nominal covariance, so `y = H [x0; w] + v` and
//! `s = L [x0; w]`.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{self, to_complex};
use crate::{math, CMat, Mat, C64};

/// Linear time-invariant plant `x' = A x + B w`, `y = C_y x + v`, `s = C_s x`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    a: Mat,
    b: Mat,
    c_y: Mat,
    c_s: Mat,
}

impl StateSpaceModel {
    /// Validates dimensions, finiteness, detectability of `(A, C_y)` and
    /// stabilizability of `(A, B)`.
    pub fn new(a: Mat, b: Mat, c_y: Mat, c_s: Mat) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(Error::Dimension(format!("A is {}x{}", a.nrows(), a.ncols())));
        }
        if b.nrows() != n {
            return Err(Error::Dimension(format!("B has {} rows, expected {n}", b.nrows())));
        }
        if c_y.ncols() != n || c_y.nrows() == 0 {
            return Err(Error::Dimension(format!("C_y is {}x{}", c_y.nrows(), c_y.ncols())));
        }
        if c_s.ncols() != n || c_s.nrows() == 0 {
            return Err(Error::Dimension(format!("C_s is {}x{}", c_s.nrows(), c_s.ncols())));
        }
        for (name, m) in [("A", &a), ("B", &b), ("C_y", &c_y), ("C_s", &c_s)] {
            if m.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(name));
            }
        }
        let model = Self { a, b, c_y, c_s };
        model.check_pbh()?;
        Ok(model)
    }

    /// Scalar plant with all four maps equal to the given numbers.
    pub fn scalar(a: f64, b: f64, c_y: f64, c_s: f64) -> Result<Self> {
        let m = |x| Mat::from_element(1, 1, x);
        Self::new(m(a), m(b), m(c_y), m(c_s))
    }

    /// Constant-velocity tracking model with sampling interval `dt`,
    /// observing and estimating the position.
    pub fn tracking(dt: f64) -> Self {
        let a = Mat::from_row_slice(2, 2, &[1.0, dt, 0.0, 1.0]);
        let b = Mat::from_row_slice(2, 1, &[0.0, dt]);
        let c = Mat::from_row_slice(1, 2, &[1.0, 0.0]);
        Self::new(a, b, c.clone(), c).expect("tracking model is valid")
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }
    pub fn b(&self) -> &Mat {
        &self.b
    }
    pub fn c_y(&self) -> &Mat {
        &self.c_y
    }
    pub fn c_s(&self) -> &Mat {
        &self.c_s
    }
    pub fn d_x(&self) -> usize {
        self.a.nrows()
    }
    pub fn d_w(&self) -> usize {
        self.b.ncols()
    }
    pub fn d_y(&self) -> usize {
        self.c_y.nrows()
    }
    pub fn d_s(&self) -> usize {
        self.c_s.nrows()
    }

    // PBH tests on the eigenvalues of A outside the open unit disk.
    fn check_pbh(&self) -> Result<()> {
        let n = self.d_x();
        for lambda in linalg::eigenvalues(&self.a) {
            if lambda.norm() < 1.0 - 1e-9 {
                continue;
            }
            let mut shifted = to_complex(&self.a) * C64::new(-1.0, 0.0);
            for i in 0..n {
                shifted[(i, i)] += lambda;
            }
            let obs = stack_rows(&shifted, &to_complex(&self.c_y));
            if linalg::rank(&obs, 1e-9) < n {
                return Err(Error::NotDetectable);
            }
            let ctrb = stack_cols(&shifted, &to_complex(&self.b));
            if linalg::rank(&ctrb, 1e-9) < n {
                return Err(Error::NotStabilizable);
            }
        }
        Ok(())
    }
}

fn stack_rows(top: &CMat, bottom: &CMat) -> CMat {
    let mut m = CMat::zeros(top.nrows() + bottom.nrows(), top.ncols());
    m.rows_mut(0, top.nrows()).copy_from(top);
    m.rows_mut(top.nrows(), bottom.nrows()).copy_from(bottom);
    m
}

fn stack_cols(left: &CMat, right: &CMat) -> CMat {
    let mut m = CMat::zeros(left.nrows(), left.ncols() + right.ncols());
    m.columns_mut(0, left.ncols()).copy_from(left);
    m.columns_mut(left.ncols(), right.ncols()).copy_from(right);
    m
}

/// Stabilizing solution of the filtering Riccati equation and the
/// quantities derived from it.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiData {
    pub p: Mat,
    pub r_e: Mat,
    pub f_p: Mat,
    pub a_p: Mat,
    pub a_bar: Mat,
    pub b_bar: Mat,
    pub c_bar: Mat,
    pub r_e_inv: Mat,
    pub r_e_sqrt: Mat,
    pub r_e_inv_sqrt: Mat,
    /// Relative Frobenius residual of the Riccati equation.
    pub residual: f64,
}

impl RiccatiData {
    /// `C_s P C_y^T R_e^{-1}`, the feedthrough of the steady-state filter.
    pub fn h2_feedthrough(&self, model: &StateSpaceModel) -> Mat {
        model.c_s() * &self.p * model.c_y().transpose() * &self.r_e_inv
    }

    /// `I - P C_y^T R_e^{-1} C_y`.
    pub fn innovation_projector(&self, model: &StateSpaceModel) -> Mat {
        let n = model.d_x();
        Mat::identity(n, n) - &self.p * model.c_y().transpose() * &self.r_e_inv * model.c_y()
    }
}

const FIXED_POINT_CAP: usize = 2000;
const DOUBLING_CAP: usize = 100;

fn riccati_map(model: &StateSpaceModel, p: &Mat) -> Mat {
    let a = model.a();
    let c = model.c_y();
    let d_y = model.d_y();
    let r_e = Mat::identity(d_y, d_y) + c * p * c.transpose();
    let apc = a * p * c.transpose();
    let gain_term = match r_e.clone().cholesky() {
        Some(ch) => &apc * ch.solve(&apc.transpose()),
        None => return Mat::from_element(p.nrows(), p.ncols(), f64::NAN),
    };
    linalg::symmetrize(&(a * p * a.transpose() + model.b() * model.b().transpose() - gain_term))
}

fn relative_residual(model: &StateSpaceModel, p: &Mat) -> f64 {
    let r = riccati_map(model, p) - p;
    r.norm() / p.norm().max(1.0)
}

fn doubling(model: &StateSpaceModel, tol: f64) -> Option<Mat> {
    let n = model.d_x();
    let eye = Mat::identity(n, n);
    let mut a = model.a().transpose();
    let mut g = model.c_y().transpose() * model.c_y();
    let mut h = model.b() * model.b().transpose();
    for _ in 0..DOUBLING_CAP {
        let w = (&eye + &g * &h).try_inverse()?;
        let a_w = &a * &w;
        let a_next = &a_w * &a;
        let g_next = &g + &a_w * &g * a.transpose();
        let h_next = &h + a.transpose() * &h * &w * &a;
        let step = (&h_next - &h).norm() / h_next.norm().max(1.0);
        a = a_next;
        g = linalg::symmetrize(&g_next);
        h = linalg::symmetrize(&h_next);
        if !step.is_finite() {
            return None;
        }
        if step <= tol * 1e-3 {
            break;
        }
    }
    Some(h)
}

/// Solves `P = A P A^T + B B^T - F_P R_e F_P^T` by the Riccati recursion
/// from zero, falling back to structured doubling when the recursion stalls.
pub fn solve_dare(model: &StateSpaceModel, tol: f64) -> Result<RiccatiData> {
    let n = model.d_x();
    let mut p = Mat::zeros(n, n);
    let mut residual = f64::INFINITY;
    for _ in 0..FIXED_POINT_CAP {
        let next = riccati_map(model, &p);
        if next.iter().any(|x| !x.is_finite()) {
            break;
        }
        p = next;
        residual = relative_residual(model, &p);
        if residual <= tol {
            break;
        }
    }
    if !(residual <= tol) {
        if let Some(h) = doubling(model, tol) {
            let r = relative_residual(model, &h);
            if r < residual || !residual.is_finite() {
                p = h;
                residual = r;
            }
        }
    }
    if !(residual <= tol) {
        return Err(Error::NonConvergence { residual });
    }
    let data = derive(model, p, residual)?;
    if linalg::spectral_radius(&data.a_p) >= 1.0 {
        return Err(Error::NonConvergence { residual });
    }
    Ok(data)
}

fn derive(model: &StateSpaceModel, p: Mat, residual: f64) -> Result<RiccatiData> {
    let c = model.c_y();
    let d_y = model.d_y();
    let r_e = linalg::symmetrize(&(Mat::identity(d_y, d_y) + c * &p * c.transpose()));
    let r_e_inv = linalg::inverse(&r_e)?;
    let r_e_sqrt = linalg::sym_fn(&r_e, math::sqrt);
    let r_e_inv_sqrt = linalg::sym_fn(&r_e, |x| 1.0 / math::sqrt(x));
    let f_p = model.a() * &p * c.transpose() * &r_e_inv;
    let a_p = model.a() - &f_p * c;
    let a_bar = a_p.transpose();
    let b_bar = c.transpose() * &r_e_inv_sqrt;
    let c_bar = model.c_s() * &p * a_p.transpose();
    Ok(RiccatiData { p, r_e, f_p, a_p, a_bar, b_bar, c_bar, r_e_inv, r_e_sqrt, r_e_inv_sqrt, residual })
}

/// `H(z) = C_y (zI - A)^{-1} B` and `L(z) = C_s (zI - A)^{-1} B`.
pub fn eval_transfer(model: &StateSpaceModel, z: C64) -> Result<(CMat, CMat)> {
    let x = linalg::resolvent(model.a(), &to_complex(model.b()), z)?;
    Ok((to_complex(model.c_y()) * &x, to_complex(model.c_s()) * &x))
}

/// `Delta(z) = (I + C_y (zI - A)^{-1} F_P) R_e^{1/2}` and its inverse.
pub fn eval_delta(model: &StateSpaceModel, ric: &RiccatiData, z: C64) -> Result<(CMat, CMat)> {
    let d_y = model.d_y();
    let x = linalg::resolvent(model.a(), &to_complex(&ric.f_p), z)?;
    let delta = (CMat::identity(d_y, d_y) + to_complex(model.c_y()) * x) * to_complex(&ric.r_e_sqrt);
    Ok((delta, eval_delta_inv(model, ric, z)?))
}

/// `Delta(z)^{-1} = R_e^{-1/2} (I - C_y (zI - A_P)^{-1} F_P)`, which stays
/// finite at unit-circle eigenvalues of `A`.
pub fn eval_delta_inv(model: &StateSpaceModel, ric: &RiccatiData, z: C64) -> Result<CMat> {
    let d_y = model.d_y();
    let x = linalg::resolvent(&ric.a_p, &to_complex(&ric.f_p), z)?;
    Ok(to_complex(&ric.r_e_inv_sqrt) * (CMat::identity(d_y, d_y) - to_complex(model.c_y()) * x))
}

/// Steady-state Kalman filter `K_H2(z)` and the strictly anticausal
/// remainder `S(z)` with `K_o Delta = K_H2 Delta + S`.
pub fn eval_h2_and_s(model: &StateSpaceModel, ric: &RiccatiData, z: C64) -> Result<(CMat, CMat)> {
    let proj = ric.innovation_projector(model);
    let x = linalg::resolvent(&ric.a_p, &to_complex(&ric.f_p), z)?;
    let k_h2 = to_complex(&ric.h2_feedthrough(model)) + to_complex(&(model.c_s() * proj)) * x;
    let zi = C64::new(1.0, 0.0) / z;
    let y = linalg::resolvent(&ric.a_bar, &to_complex(&ric.b_bar), zi)?;
    let s = to_complex(&ric.c_bar) * y;
    Ok((k_h2, s))
}

/// `L (I + H^* H)^{-1} L^*` at `z`, the error spectrum of the non-causal
/// Wiener smoother.
///
/// Evaluated as `T_H2 T_H2^* - S S^*` so only resolvents of the stable
/// matrix `A_P` appear.
pub fn eval_noncausal_error_psd(model: &StateSpaceModel, ric: &RiccatiData, z: C64) -> Result<CMat> {
    let proj = to_complex(&(model.c_s() * ric.innovation_projector(model)));
    let d_y = model.d_y();
    let mut rhs = CMat::zeros(model.d_x(), model.d_w() + d_y);
    rhs.columns_mut(0, model.d_w()).copy_from(&to_complex(model.b()));
    rhs.columns_mut(model.d_w(), d_y).copy_from(&to_complex(&ric.f_p));
    let x = linalg::resolvent(&ric.a_p, &rhs, z)?;
    let mut t = &proj * x;
    {
        let mut tw = t.columns_mut(0, model.d_w());
        tw *= C64::new(-1.0, 0.0);
    }
    {
        let mut tv = t.columns_mut(model.d_w(), d_y);
        tv += to_complex(&ric.h2_feedthrough(model));
    }
    let (_, s) = eval_h2_and_s(model, ric, z)?;
    Ok(linalg::hermitize(&(&t * t.adjoint() - &s * s.adjoint())))
}

/// `T_K T_K^*` for a filter sample `K(z)` via `[K H - L, K]`.
pub fn eval_error_psd(model: &StateSpaceModel, k: &CMat, z: C64) -> Result<CMat> {
    let (h, l) = eval_transfer(model, z)?;
    let e = k * h - l;
    Ok(linalg::hermitize(&(&e * e.adjoint() + k * k.adjoint())))
}

/// Default bound on `T * max(d_x, d_w, d_y, d_s)` for finite horizons.
pub const DEFAULT_DIM_CAP: usize = 4096;

/// Finite-horizon measurement and target operators acting on `[x0; w]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockToeplitzPair {
    pub h: Mat,
    pub l: Mat,
    pub horizon: usize,
    pub d_x: usize,
    pub d_w: usize,
    pub d_y: usize,
    pub d_s: usize,
}

impl BlockToeplitzPair {
    /// Columns of `H` and `L`: `d_x + (T - 1) d_w`.
    pub fn state_noise_dim(&self) -> usize {
        self.h.ncols()
    }

    /// Length of the stacked disturbance `[x0; w; v]`.
    pub fn xi_dim(&self) -> usize {
        self.h.ncols() + self.h.nrows()
    }
}

pub fn build_block_toeplitz(model: &StateSpaceModel, horizon: usize) -> Result<BlockToeplitzPair> {
    build_block_toeplitz_with_cap(model, horizon, DEFAULT_DIM_CAP)
}

pub fn build_block_toeplitz_with_cap(
    model: &StateSpaceModel,
    horizon: usize,
    cap: usize,
) -> Result<BlockToeplitzPair> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1"));
    }
    let widest = model.d_x().max(model.d_w()).max(model.d_y()).max(model.d_s());
    if horizon.saturating_mul(widest) > cap {
        return Err(Error::HorizonTooLarge { horizon, cap });
    }
    let (d_x, d_w, d_y, d_s) = (model.d_x(), model.d_w(), model.d_y(), model.d_s());
    let cols = d_x + (horizon - 1) * d_w;
    let mut h = Mat::zeros(horizon * d_y, cols);
    let mut l = Mat::zeros(horizon * d_s, cols);
    // powers[k] = A^k
    let mut powers: Vec<Mat> = Vec::with_capacity(horizon);
    powers.push(Mat::identity(d_x, d_x));
    for k in 1..horizon {
        let next = model.a() * &powers[k - 1];
        powers.push(next);
    }
    for i in 0..horizon {
        h.view_mut((i * d_y, 0), (d_y, d_x)).copy_from(&(model.c_y() * &powers[i]));
        l.view_mut((i * d_s, 0), (d_s, d_x)).copy_from(&(model.c_s() * &powers[i]));
        for j in 1..=i {
            let ab = &powers[i - j] * model.b();
            let col = d_x + (j - 1) * d_w;
            h.view_mut((i * d_y, col), (d_y, d_w)).copy_from(&(model.c_y() * &ab));
            l.view_mut((i * d_s, col), (d_s, d_w)).copy_from(&(model.c_s() * &ab));
        }
    }
    Ok(BlockToeplitzPair { h, l, horizon, d_x, d_w, d_y, d_s })
}

/// Uniform grid `z_n = exp(j 2 pi n / N)` on the unit circle.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    n: usize,
    nodes: Vec<C64>,
}

impl FrequencyGrid {
    /// `n` must be a power of two and at least 4.
    pub fn new(n: usize) -> Result<Self> {
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::InvalidArgument("grid size must be a power of two and at least 4"));
        }
        let nodes = (0..n)
            .map(|k| {
                let w = 2.0 * PI * k as f64 / n as f64;
                C64::new(math::cos(w), math::sin(w))
            })
            .collect();
        Ok(Self { n, nodes })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn nodes(&self) -> &[C64] {
        &self.nodes
    }

    /// Angular frequency of node `k` in `[0, 2 pi)`.
    pub fn omega(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.n as f64
    }

    /// Index of the node carrying the conjugate frequency.
    pub fn conjugate_index(&self, k: usize) -> usize {
        (self.n - k) % self.n
    }
}

//! State-space realisation of the filter induced by a rational factor.
//!
//! The filter state stacks the `m` states of the factor correction with the
//! negated one-step Kalman predictor.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{self, to_complex};
use crate::ratapprox::RationalFactor;
use crate::sslib::{RiccatiData, StateSpaceModel};
use crate::{CMat, Mat, C64};

/// `zeta' = F zeta + G y`, `s_hat = H zeta + L y`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceFilter {
    pub f: Mat,
    pub g: Mat,
    pub h: Mat,
    pub l: Mat,
}

impl StateSpaceFilter {
    pub fn state_dim(&self) -> usize {
        self.f.nrows()
    }

    pub fn spectral_radius(&self) -> f64 {
        linalg::spectral_radius(&self.f)
    }
}

/// Solution `U_ly` of `A_u U A_P^T + B_u C_s P A_P^T = U`.
#[derive(Debug, Clone, PartialEq)]
pub struct SteinSolution {
    pub u_ly: Mat,
    pub residual: f64,
}

pub fn stein_solve(a_u: &Mat, b_u: &Mat, ric: &RiccatiData) -> Result<SteinSolution> {
    let m = a_u.nrows();
    let d_x = ric.a_p.nrows();
    if m == 0 {
        return Ok(SteinSolution { u_ly: Mat::zeros(0, d_x), residual: 0.0 });
    }
    let rhs = b_u * &ric.c_bar;
    // column-major vec(A_u U A_P^T) = (A_P kron A_u) vec(U)
    let kron = ric.a_p.kronecker(a_u);
    let system = Mat::identity(m * d_x, m * d_x) - kron;
    let b = nalgebra::DVector::from_column_slice(rhs.as_slice());
    let x = system.lu().solve(&b).ok_or(Error::SingularSystem)?;
    let u_ly = Mat::from_column_slice(m, d_x, x.as_slice());
    let resid = a_u * &u_ly * ric.a_p.transpose() + &rhs - &u_ly;
    let residual = resid.norm() / u_ly.norm().max(1.0);
    if !residual.is_finite() {
        return Err(Error::SingularSystem);
    }
    Ok(SteinSolution { u_ly, residual })
}

/// Assembles the realised filter for factor `u`.
pub fn assemble_filter(u: &RationalFactor, model: &StateSpaceModel, ric: &RiccatiData) -> Result<StateSpaceFilter> {
    let m = u.order();
    let (d_x, d_y, d_s) = (model.d_x(), model.d_y(), model.d_s());
    let u_ly = stein_solve(&u.a, &u.b, ric)?.u_ly;
    let a_tp = &u.a - &u.b * &u.c;
    let y_gain = &u_ly * model.c_y().transpose() * &ric.r_e_inv;
    let feed = ric.h2_feedthrough(model);
    let n = m + d_x;
    let mut f = Mat::zeros(n, n);
    f.view_mut((0, 0), (m, m)).copy_from(&a_tp);
    f.view_mut((0, m), (m, d_x)).copy_from(&(&y_gain * model.c_y()));
    f.view_mut((m, m), (d_x, d_x)).copy_from(&ric.a_p);
    let mut g = Mat::zeros(n, d_y);
    g.view_mut((0, 0), (m, d_y)).copy_from(&y_gain);
    g.view_mut((m, 0), (d_x, d_y)).copy_from(&(-&ric.f_p));
    let mut h = Mat::zeros(d_s, n);
    h.view_mut((0, 0), (d_s, m)).copy_from(&(&u.c * &a_tp));
    let tail = -model.c_s() + &feed * model.c_y() + &u.c * &y_gain * model.c_y();
    h.view_mut((0, m), (d_s, d_x)).copy_from(&tail);
    let l = &u.c * &y_gain + feed;
    let filter = StateSpaceFilter { f, g, h, l };
    let radius = filter.spectral_radius();
    if radius >= 1.0 {
        return Err(Error::InstabilityDetected(radius));
    }
    Ok(filter)
}

/// `H (zI - F)^{-1} G + L`.
pub fn filter_freq_response(f: &StateSpaceFilter, z: C64) -> Result<CMat> {
    let x = linalg::resolvent(&f.f, &to_complex(&f.g), z)?;
    Ok(to_complex(&f.h) * x + to_complex(&f.l))
}

/// Streaming filter state, initialised at zero.
#[derive(Debug, Clone)]
pub struct FilterRunner<'a> {
    filter: &'a StateSpaceFilter,
    zeta: nalgebra::DVector<f64>,
}

impl<'a> FilterRunner<'a> {
    pub fn new(filter: &'a StateSpaceFilter) -> Self {
        Self { filter, zeta: nalgebra::DVector::zeros(filter.state_dim()) }
    }

    pub fn step(&mut self, y: &nalgebra::DVector<f64>) -> nalgebra::DVector<f64> {
        let out = &self.filter.h * &self.zeta + &self.filter.l * y;
        self.zeta = &self.filter.f * &self.zeta + &self.filter.g * y;
        out
    }

    pub fn state(&self) -> &nalgebra::DVector<f64> {
        &self.zeta
    }
}

/// Runs the filter over a measurement sequence from a zero state.
pub fn filter_run(f: &StateSpaceFilter, ys: &[nalgebra::DVector<f64>]) -> Vec<nalgebra::DVector<f64>> {
    let mut runner = FilterRunner::new(f);
    ys.iter().map(|y| runner.step(y)).collect()
}

//! Rational approximation of a sampled positive spectrum.
//!
//! A density `M` is approximated by `P/Q` with symmetric Laurent
//! polynomials of order `m` so that `|P/Q - M| <= eps` on the grid. For a
//! fixed `eps` this is a linear feasibility problem in the coefficients.
//! The problem is posed as `min t` subject to every constraint relaxed by
//! `t` (after row normalisation) and solved by a log-barrier method; it is
//! feasible when the optimal `t` is non-positive up to `1e-11`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fft;
use crate::linalg;
use crate::lp::{MinMaxLp, Verdict};
use crate::{math, Mat, C64};

/// Strict-positivity margin replacing `P, Q > 0`.
pub const POSITIVITY_MARGIN: f64 = 1e-8;
const FEAS_TOL: f64 = 1e-11;

/// `p_0 + sum_{k=1}^m p_k (z^k + z^{-k})`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaurentPolynomial {
    pub coeffs: Vec<f64>,
}

impl LaurentPolynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// Value at `exp(j omega)`: `p_0 + 2 sum p_k cos(k omega)`.
    pub fn eval(&self, omega: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, &p)| if k == 0 { p } else { 2.0 * p * math::cos(k as f64 * omega) })
            .sum()
    }

    pub fn eval_grid(&self, n: usize) -> Vec<f64> {
        (0..n).map(|k| self.eval(2.0 * PI * k as f64 / n as f64)).collect()
    }
}

/// `P/Q` with `q_0 = 1` and grid error bound `eps`.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalPsd {
    pub p: LaurentPolynomial,
    pub q: LaurentPolynomial,
    pub eps: f64,
}

impl RationalPsd {
    pub fn order(&self) -> usize {
        self.p.order()
    }

    pub fn eval(&self, omega: f64) -> f64 {
        self.p.eval(omega) / self.q.eval(omega)
    }

    /// `max_n |P/Q - M|` over the grid carrying `samples`.
    pub fn grid_error(&self, samples: &[f64]) -> f64 {
        let n = samples.len();
        samples
            .iter()
            .enumerate()
            .map(|(k, &m)| (self.eval(2.0 * PI * k as f64 / n as f64) - m).abs())
            .fold(0.0, f64::max)
    }
}

/// Largest `|P/Q - M|` on a grid `refine` times finer, with `M` between
/// the nodes taken from the band-limited interpolation of `log M`.
/// Only reported; the constraints hold on the original nodes alone.
pub fn refined_grid_error(r: &RationalPsd, samples: &[f64], refine: usize) -> Result<f64> {
    let n = samples.len();
    if !n.is_power_of_two() || n < 2 || refine == 0 || !refine.is_power_of_two() {
        return Err(Error::InvalidArgument("grid and refinement must be powers of two"));
    }
    if samples.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(Error::InvalidArgument("density samples must be positive"));
    }
    let mut cep: Vec<C64> = samples.iter().map(|&x| C64::new(math::ln(x), 0.0)).collect();
    fft::inverse(&mut cep);
    let fine = n * refine;
    let half = n / 2;
    let mut padded = vec![C64::new(0.0, 0.0); fine];
    padded[..half].copy_from_slice(&cep[..half]);
    padded[half] = cep[half] * 0.5;
    padded[fine - half] = cep[half] * 0.5;
    for k in half + 1..n {
        padded[fine - (n - k)] = cep[k];
    }
    fft::forward(&mut padded);
    Ok(padded
        .iter()
        .enumerate()
        .map(|(k, l)| (r.eval(2.0 * PI * k as f64 / fine as f64) - math::exp(l.re)).abs())
        .fold(0.0, f64::max))
}

fn basis(order: usize, omega: f64) -> Vec<f64> {
    (0..=order).map(|k| if k == 0 { 1.0 } else { 2.0 * math::cos(k as f64 * omega) }).collect()
}

/// Finds `P, Q` of order `m` with `P - (M + eps) Q <= 0`,
/// `P - (M - eps) Q >= 0`, `P, Q >= POSITIVITY_MARGIN` and `q_0 = 1` at
/// every node.
pub fn feasibility_lp(samples: &[f64], order: usize, eps: f64) -> Result<RationalPsd> {
    let n = samples.len();
    if n <= 2 * order {
        return Err(Error::InvalidArgument("grid must have more than 2m nodes"));
    }
    if samples.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(Error::InvalidArgument("density samples must be positive"));
    }
    if !(eps >= 0.0) {
        return Err(Error::InvalidArgument("eps must be non-negative"));
    }
    let nv = 2 * order + 1;
    let mut lp = MinMaxLp::new(nv);
    let delta = POSITIVITY_MARGIN;
    // nodes k and N - k give identical rows for a conjugate-symmetric density
    let top = samples.iter().fold(0.0f64, |a, &b| a.max(b));
    let symmetric = (1..n).all(|k| (samples[k] - samples[n - k]).abs() <= 1e-12 * top);
    let nodes = if symmetric { n / 2 + 1 } else { n };
    let mut push = |coef: Vec<f64>, bound: f64| {
        let scale = coef.iter().fold(bound.abs(), |a, &b| a.max(b.abs())).max(1e-300);
        lp.push_row(coef.iter().map(|c| c / scale).collect(), bound / scale);
    };
    for (k, &m) in samples.iter().enumerate().take(nodes) {
        let c = basis(order, 2.0 * PI * k as f64 / n as f64);
        let hi = m + eps;
        let lo = m - eps;
        let mut upper = c.clone();
        upper.extend(c[1..].iter().map(|x| -hi * x));
        push(upper, hi);
        let mut lower: Vec<f64> = c.iter().map(|x| -x).collect();
        lower.extend(c[1..].iter().map(|x| lo * x));
        push(lower, -lo);
        let mut p_pos: Vec<f64> = c.iter().map(|x| -x).collect();
        p_pos.extend(core::iter::repeat_n(0.0, order));
        push(p_pos, -delta);
        let mut q_pos = vec![0.0; order + 1];
        q_pos.extend(c[1..].iter().map(|x| -x));
        push(q_pos, 1.0 - delta);
    }
    let x = match lp.decide(FEAS_TOL)? {
        Verdict::Feasible { x } => x,
        Verdict::Infeasible => return Err(Error::Infeasible),
    };
    let p = LaurentPolynomial::new(x[..=order].to_vec());
    let mut q = vec![1.0];
    q.extend_from_slice(&x[order + 1..nv]);
    let mut r = RationalPsd { p, q: LaurentPolynomial::new(q), eps };
    let err = r.grid_error(samples);
    let slack = 1e-9 * (1.0 + top);
    let positive = |poly: &LaurentPolynomial| poly.eval_grid(n).iter().all(|&v| v >= delta * (1.0 - 1e-6) - slack);
    if err > eps + slack || !positive(&r.p) || !positive(&r.q) {
        return Err(Error::NumericalFailure("LP solution violates the constraints"));
    }
    r.eps = eps.max(err);
    Ok(r)
}

/// Bisection on `eps` over `[0, max |M - mean M|]` down to width `tol_eps`.
///
/// A probe whose LP cannot be solved reliably counts as infeasible, so
/// the returned approximation is always one whose constraints were checked.
pub fn best_precision(samples: &[f64], order: usize, tol_eps: f64) -> Result<RationalPsd> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("empty density"));
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let mut hi = samples.iter().map(|m| (m - mean).abs()).fold(0.0, f64::max);
    let mut best = match feasibility_lp(samples, order, hi) {
        Ok(r) => r,
        Err(Error::Infeasible) | Err(Error::NumericalFailure(_)) => {
            let mut p = vec![0.0; order + 1];
            p[0] = mean;
            let mut q = vec![0.0; order + 1];
            q[0] = 1.0;
            RationalPsd { p: LaurentPolynomial::new(p), q: LaurentPolynomial::new(q), eps: hi }
        }
        Err(e) => return Err(e),
    };
    let mut lo = 0.0;
    if let Ok(r) = feasibility_lp(samples, order, 0.0) {
        return Ok(r);
    }
    hi = hi.max(best.eps);
    while hi - lo > tol_eps {
        let mid = 0.5 * (lo + hi);
        match feasibility_lp(samples, order, mid) {
            Ok(r) => {
                hi = mid;
                best = r;
            }
            Err(Error::Infeasible) | Err(Error::NumericalFailure(_)) => lo = mid,
            Err(e) => return Err(e),
        }
    }
    Ok(best)
}

/// Smallest order `m <= m_max` admitting an `eps`-approximation.
pub fn least_order(samples: &[f64], eps: f64, m_max: usize) -> Result<RationalPsd> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument("eps must be positive"));
    }
    for m in 0..=m_max {
        if samples.len() <= 2 * m {
            break;
        }
        match feasibility_lp(samples, m, eps) {
            Ok(r) => return Ok(r),
            Err(Error::Infeasible) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::OrderCapExceeded(m_max))
}

/// `S(z) = sum_k s_k z^{-k}` with all zeros inside the unit disk.
#[derive(Debug, Clone, PartialEq)]
pub struct MinPhasePoly {
    pub coeffs: Vec<f64>,
}

impl MinPhasePoly {
    pub fn eval(&self, z: C64) -> C64 {
        let zi = C64::new(1.0, 0.0) / z;
        self.coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, &s| acc * zi + s)
    }

    /// Zeros of `sum_k s_k z^{m-k}`.
    pub fn roots(&self) -> Vec<C64> {
        poly_roots(&self.coeffs)
    }
}

// Roots of c[0] z^d + ... + c[d] via the companion matrix, Newton-polished.
fn poly_roots(c: &[f64]) -> Vec<C64> {
    let d = c.len().saturating_sub(1);
    if d == 0 {
        return Vec::new();
    }
    let mut comp = Mat::zeros(d, d);
    for j in 0..d {
        comp[(0, j)] = -c[j + 1] / c[0];
    }
    for i in 1..d {
        comp[(i, i - 1)] = 1.0;
    }
    linalg::eigenvalues(&comp)
        .into_iter()
        .map(|mut r| {
            for _ in 0..3 {
                let (mut p, mut dp) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
                for &a in c {
                    dp = dp * r + p;
                    p = p * r + a;
                }
                if dp.norm() == 0.0 {
                    break;
                }
                let step = p / dp;
                if !step.re.is_finite() || !step.im.is_finite() || step.norm() > 1e-3 * (1.0 + r.norm()) {
                    break;
                }
                r -= step;
            }
            r
        })
        .collect()
}

/// Minimum-phase `S` with `|S(z)|^2 = P(z)` on the unit circle.
pub fn poly_spectral_factor(p: &LaurentPolynomial) -> Result<MinPhasePoly> {
    let top = p.coeffs.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let mut order = p.order();
    while order > 0 && p.coeffs[order].abs() <= 1e-14 * top {
        order -= 1;
    }
    let value_at_one: f64 = p.coeffs[..=order]
        .iter()
        .enumerate()
        .map(|(k, &x)| if k == 0 { x } else { 2.0 * x })
        .sum();
    if !(value_at_one > 0.0) {
        return Err(Error::InvalidArgument("Laurent polynomial must be positive on the circle"));
    }
    let mut coeffs = vec![0.0; p.order() + 1];
    if order == 0 {
        coeffs[0] = math::sqrt(p.coeffs[0]);
        return Ok(MinPhasePoly { coeffs });
    }
    let mut full: Vec<f64> = p.coeffs[..=order].iter().rev().copied().collect();
    full.extend_from_slice(&p.coeffs[1..=order]);
    let roots = poly_roots(&full);
    for r in &roots {
        let modulus = r.norm();
        if (modulus - 1.0).abs() <= 1e-6 {
            return Err(Error::RootNearCircle(modulus));
        }
    }
    let (inside, outside): (Vec<C64>, Vec<C64>) = roots.into_iter().partition(|r| r.norm() < 1.0);
    if inside.len() != order {
        return Err(Error::NumericalFailure("roots do not split evenly across the unit circle"));
    }
    for r in &inside {
        let paired = outside.iter().any(|o| (o * r.conj() - 1.0).norm() <= 1e-8 * (1.0 + o.norm()));
        if !paired {
            return Err(Error::NumericalFailure("polynomial roots do not pair as (r, 1/conj(r))"));
        }
    }
    let mut monic = vec![C64::new(1.0, 0.0)];
    for r in &inside {
        let mut next = vec![C64::new(0.0, 0.0); monic.len() + 1];
        for (i, &a) in monic.iter().enumerate() {
            next[i] += a;
            next[i + 1] -= a * r;
        }
        monic = next;
    }
    let s_at_one: f64 = monic.iter().map(|x| x.re).sum();
    let gain = math::sqrt(value_at_one) / s_at_one.abs();
    for (dst, src) in coeffs.iter_mut().zip(&monic) {
        *dst = gain * src.re;
    }
    Ok(MinPhasePoly { coeffs })
}

/// `U(z) = d (1 + C (zI - A)^{-1} B)` realising `S_P(z) / S_Q(z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalFactor {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
    pub d: f64,
    pub numerator: MinPhasePoly,
    pub denominator: MinPhasePoly,
}

impl RationalFactor {
    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// Ratio of the two polynomials at `z`.
    pub fn eval(&self, z: C64) -> C64 {
        self.numerator.eval(z) / self.denominator.eval(z)
    }

    /// State-space evaluation `d (1 + C (zI - A)^{-1} B)`.
    pub fn eval_realization(&self, z: C64) -> Result<C64> {
        if self.order() == 0 {
            return Ok(C64::new(self.d, 0.0));
        }
        let x = linalg::resolvent(&self.a, &linalg::to_complex(&self.b), z)?;
        let v = linalg::to_complex(&self.c) * x;
        Ok((v[(0, 0)] + 1.0) * self.d)
    }

    pub fn samples(&self, nodes: &[C64]) -> Vec<C64> {
        nodes.iter().map(|&z| self.eval(z)).collect()
    }
}

/// Minimum-phase rational factor of `P/Q` in controllable canonical form.
pub fn rational_factor(r: &RationalPsd) -> Result<RationalFactor> {
    let sp = poly_spectral_factor(&r.p)?;
    let sq = poly_spectral_factor(&r.q)?;
    let m = r.p.order().max(r.q.order());
    let pad = |s: &MinPhasePoly| {
        let mut v = s.coeffs.clone();
        v.resize(m + 1, 0.0);
        v
    };
    let (num, den) = (pad(&sp), pad(&sq));
    let d = num[0] / den[0];
    let mut a = Mat::zeros(m, m);
    let mut b = Mat::zeros(m, 1);
    let mut c = Mat::zeros(1, m);
    for k in 1..=m {
        let ak = den[k] / den[0];
        let bk = num[k] / num[0];
        a[(0, k - 1)] = -ak;
        c[(0, k - 1)] = bk - ak;
    }
    for i in 1..m {
        a[(i, i - 1)] = 1.0;
    }
    if m > 0 {
        b[(0, 0)] = 1.0;
    }
    let factor = RationalFactor {
        a,
        b,
        c,
        d,
        numerator: MinPhasePoly { coeffs: num },
        denominator: MinPhasePoly { coeffs: den },
    };
    if m > 0 {
        let poles = linalg::spectral_radius(&factor.a);
        let zeros = linalg::spectral_radius(&(&factor.a - &factor.b * &factor.c));
        if poles >= 1.0 || zeros >= 1.0 {
            return Err(Error::NumericalFailure("rational factor is not minimum phase"));
        }
    }
    Ok(factor)
}

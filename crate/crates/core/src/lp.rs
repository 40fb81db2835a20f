//! Log-barrier path following for `min t` subject to `a_i^T x - t <= b_i`,
//! a linear program with few variables and many rows.
//!
//! Every iterate is strictly feasible, so an iterate with `t <= target`
//! certifies that the relaxed system `A x <= b + target` has a solution.
//! On the central path the duality gap is `rows / tau`, which gives the
//! lower bound used to certify infeasibility.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::math;

const NEWTON_CAP: usize = 2000;
const CENTERING_CAP: usize = 60;
const CENTERING_TOL: f64 = 1e-8;
const TAU_GROWTH: f64 = 16.0;
const ARMIJO: f64 = 0.25;

pub(crate) enum Verdict {
    /// `A x <= b + target`.
    Feasible { x: Vec<f64> },
    /// The optimal `t` exceeds `target`.
    Infeasible,
}

pub(crate) struct MinMaxLp {
    dim: usize,
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
}

impl MinMaxLp {
    pub fn new(dim: usize) -> Self {
        Self { dim, rows: Vec::new(), rhs: Vec::new() }
    }

    pub fn push_row(&mut self, row: Vec<f64>, bound: f64) {
        debug_assert_eq!(row.len(), self.dim);
        self.rows.push(row);
        self.rhs.push(bound);
    }

    fn slacks(&self, x: &[f64], t: f64) -> Vec<f64> {
        self.rows
            .iter()
            .zip(&self.rhs)
            .map(|(a, &b)| b + t - a.iter().zip(x).map(|(a, x)| a * x).sum::<f64>())
            .collect()
    }

    fn barrier(&self, x: &[f64], t: f64, tau: f64) -> f64 {
        let s = self.slacks(x, t);
        if s.iter().any(|&v| !(v > 0.0)) {
            return f64::INFINITY;
        }
        tau * t - s.iter().map(|&v| math::ln(v)).sum::<f64>()
    }

    /// Decides whether the optimal `t` is at most `target`.
    pub fn decide(&self, target: f64) -> Result<Verdict> {
        let d = self.dim;
        let m = self.rows.len();
        if m == 0 {
            return Ok(Verdict::Feasible { x: vec![0.0; d] });
        }
        let mut x = vec![0.0; d];
        let mut t = self.rhs.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(-b)) + 1.0;
        let mut tau = m as f64 / (1.0 + t.abs());
        let mut newton = 0;
        loop {
            // centre for the current tau
            let mut centred = false;
            for _ in 0..CENTERING_CAP {
                if t <= target {
                    return Ok(Verdict::Feasible { x });
                }
                newton += 1;
                if newton > NEWTON_CAP {
                    return Err(Error::NumericalFailure("barrier method did not converge"));
                }
                let s = self.slacks(&x, t);
                let mut grad = DVector::zeros(d + 1);
                let mut hess = DMatrix::zeros(d + 1, d + 1);
                grad[d] = tau;
                let mut c = vec![0.0; d + 1];
                for (a, &si) in self.rows.iter().zip(&s) {
                    for j in 0..d {
                        c[j] = -a[j];
                    }
                    c[d] = 1.0;
                    let w = 1.0 / si;
                    for i in 0..=d {
                        grad[i] -= c[i] * w;
                        let ci = c[i] * w * w;
                        for j in 0..=i {
                            hess[(i, j)] += ci * c[j];
                        }
                    }
                }
                for i in 0..=d {
                    for j in 0..i {
                        hess[(j, i)] = hess[(i, j)];
                    }
                }
                let step = match hess.clone().cholesky() {
                    Some(ch) => -ch.solve(&grad),
                    None => {
                        let ridge = 1e-14 * hess.diagonal().amax();
                        let lifted = hess + DMatrix::identity(d + 1, d + 1) * ridge;
                        -lifted.cholesky().ok_or(Error::NumericalFailure("singular barrier Hessian"))?.solve(&grad)
                    }
                };
                let decrement = -grad.dot(&step);
                if !decrement.is_finite() {
                    return Err(Error::NumericalFailure("barrier method produced a non-finite step"));
                }
                if decrement / 2.0 <= CENTERING_TOL {
                    centred = true;
                    break;
                }
                let f0 = self.barrier(&x, t, tau);
                let mut alpha = 1.0;
                let accepted = loop {
                    let xn: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + alpha * b).collect();
                    let tn = t + alpha * step[d];
                    let f = self.barrier(&xn, tn, tau);
                    if f < f0 && f <= f0 - ARMIJO * alpha * decrement {
                        break Some((xn, tn));
                    }
                    alpha *= 0.5;
                    if alpha < 1e-16 {
                        break None;
                    }
                };
                match accepted {
                    Some((xn, tn)) => {
                        x = xn;
                        t = tn;
                    }
                    // no progress is possible at this tau in floating point
                    None => {
                        centred = true;
                        break;
                    }
                }
            }
            if !centred {
                return Err(Error::NumericalFailure("barrier centring stalled"));
            }
            // doubled to cover imperfect centring
            let gap = 2.0 * m as f64 / tau;
            if t - gap > target {
                return Ok(Verdict::Infeasible);
            }
            if gap <= 1e-15 * (1.0 + t.abs()) {
                return Err(Error::NumericalFailure("barrier method cannot separate t from the target"));
            }
            tau *= TAU_GROWTH;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chebyshev_fit_of_three_points() {
        // min_x max |x - y_i| for y = 0, 1, 3 is 1.5 at x = 1.5
        let mut lp = MinMaxLp::new(1);
        for y in [0.0, 1.0, 3.0] {
            lp.push_row(vec![1.0], y);
            lp.push_row(vec![-1.0], -y);
        }
        match lp.decide(1.5 + 1e-9).unwrap() {
            Verdict::Feasible { x } => {
                let worst = [0.0f64, 1.0, 3.0].iter().fold(0.0f64, |a, y| a.max((x[0] - y).abs()));
                assert!(worst <= 1.5 + 1e-9);
            }
            Verdict::Infeasible => panic!("expected a feasible verdict"),
        }
        match lp.decide(1.5 - 1e-9).unwrap() {
            Verdict::Infeasible => {}
            Verdict::Feasible { .. } => panic!("expected an infeasible verdict"),
        }
    }

    #[test]
    fn interior_point_is_found_immediately_for_loose_targets() {
        let mut lp = MinMaxLp::new(2);
        lp.push_row(vec![1.0, 0.0], 1.0);
        lp.push_row(vec![0.0, 1.0], 1.0);
        assert!(matches!(lp.decide(0.0).unwrap(), Verdict::Feasible { .. }));
    }
}

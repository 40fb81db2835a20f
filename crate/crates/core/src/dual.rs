//! Scalar machinery of the strong-duality reformulation, shared by the
//! finite (plain sum) and frequency-domain (grid average) evaluators.

/// `weight * sum_i (w_i / (gamma - w_i))^2`, the transport-cost term.
pub(crate) fn radius_term(eigs: &[f64], weight: f64, gamma: f64) -> f64 {
    weight
        * eigs
            .iter()
            .map(|&w| {
                let r = w / (gamma - w);
                r * r
            })
            .sum::<f64>()
}

/// `gamma rho^2 + gamma * weight * sum_i ((1 - w_i/gamma)^{-1} - 1)`.
pub(crate) fn dual_value(eigs: &[f64], weight: f64, gamma: f64, rho: f64) -> f64 {
    if !gamma.is_finite() {
        return weight * eigs.iter().sum::<f64>();
    }
    gamma * rho * rho + weight * eigs.iter().map(|&w| gamma * w / (gamma - w)).sum::<f64>()
}

/// Unique `gamma > max(eigs)` with `radius_term(gamma) = rho^2`, or
/// infinity when every eigenvalue vanishes.
pub(crate) fn solve_gamma(eigs: &[f64], weight: f64, rho: f64, tol: f64) -> f64 {
    let top = eigs.iter().fold(0.0f64, |a, &b| a.max(b));
    if top <= 0.0 || rho <= 0.0 {
        return f64::INFINITY;
    }
    let target = rho * rho;
    let total: f64 = weight * eigs.iter().map(|w| w.max(0.0)).sum::<f64>();
    let mut lo = top * (1.0 + 1e-9);
    let mut hi = top + total / rho;
    while radius_term(eigs, weight, hi) > target {
        lo = hi;
        hi *= 2.0;
    }
    if radius_term(eigs, weight, lo) <= target {
        return lo;
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..400 {
        mid = 0.5 * (lo + hi);
        let f = radius_term(eigs, weight, mid);
        if (f - target).abs() <= tol * target || hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
        if f > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    mid
}

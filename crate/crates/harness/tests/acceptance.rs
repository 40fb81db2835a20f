//! Acceptance suite: one pass/fail line per criterion.
//!
//! Run with `cargo test -p drkf --test acceptance`. A positional argument
//! restricts the run to criteria whose label contains it.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use drkf::bench::{bench_scaling, loglog_slope};
use drkf::filters::{FilterBank, FilterKind, SynthesisSetup};
use drkf::report::{evaluate_worst_case, Horizon};
use drkf::sim::{simulate_filters, NoiseModel};
use drkf::config::NoiseKind;
use drkf_core::finite::{causal_mask, causal_project, fw_solve_finite, sdp_certificate, ErrorOperator, FwConfig};
use drkf_core::freq::{solve_infinite, spectral_factor_dft, SpectralDensity};
use drkf_core::linalg;
use drkf_core::sslib::{build_block_toeplitz, BlockToeplitzPair, FrequencyGrid, StateSpaceModel};
use drkf_core::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Criterion = fn() -> Vec<(String, Outcome)>;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn walk() -> StateSpaceModel {
    StateSpaceModel::scalar(1.0, 1.0, 1.0, 1.0).unwrap()
}

fn tracking() -> StateSpaceModel {
    StateSpaceModel::tracking(1.0)
}

// Scalar system A = B = C_y = C_s = 1, T = 10, rho_T = 0.2 sqrt(T), under the
// worst-case noise of the finite filter. The seed was fixed before any run.
fn short_horizon_comparison() -> Vec<(String, Outcome)> {
    const SEED: u64 = 2024;
    let start = Instant::now();
    let mut bank = FilterBank::new(&walk(), SynthesisSetup::new(0.2, 10, 1024)).unwrap();
    let filters = bank.build_all(&[FilterKind::DrkfFinite, FilterKind::DrkfInfinite]).unwrap();
    let noise = NoiseModel::new(NoiseKind::WorstCase, &mut bank).unwrap();
    let sim = simulate_filters(&filters, &noise, 0.2, 1000, SEED);
    let secs = start.elapsed().as_secs_f64();
    let fin = sim.curve(FilterKind::DrkfFinite).unwrap();
    let inf = sim.curve(FilterKind::DrkfInfinite).unwrap();
    let ok = (fin.final_step - 0.86).abs() <= 0.05 && (inf.final_step - 0.88).abs() <= 0.05 && secs < 30.0;
    let detail = format!(
        "MSE at T=10: finite {:.4} (target 0.86), infinite {:.4} (target 0.88), tol 0.05, se {:.3}; \
         horizon means {:.4} / {:.4}; exact expectations at T=10 {:.4} / {:.4}; {:.1} s",
        fin.final_step,
        inf.final_step,
        (2.0f64 / 1000.0).sqrt() * fin.analytic_mse[9],
        fin.average,
        inf.average,
        fin.analytic_mse[9],
        inf.analytic_mse[9],
        secs
    );
    vec![("1 short-horizon simulation".into(), Outcome::new(ok, detail))]
}

fn table_values() -> Vec<(String, Outcome)> {
    const PUBLISHED: [[f64; 4]; 4] = [
        [0.7870, 3.4948, 14.842, 34.110],
        [0.7871, 3.5818, 15.954, 38.327],
        [0.7870, 3.4948, 14.844, 34.124],
        [0.7870, 3.4948, 14.834, 34.024],
    ];
    // relative slack for ties at machine precision
    const SLACK: f64 = 1e-9;
    let rhos = [0.01, 1.0, 3.0, 5.0];
    let mut pattern_ok = true;
    let mut exact_ok = true;
    let mut rows = Vec::new();
    let mut misses = Vec::new();
    for (col, &rho) in rhos.iter().enumerate() {
        let mut setup = SynthesisSetup::new(rho, 1, 1024);
        setup.fw.tol = 1e-8;
        let mut bank = FilterBank::new(&tracking(), setup).unwrap();
        let drkf = bank.infinite().unwrap().value;
        let mut vals = vec![drkf];
        for m in 1..=3 {
            let built = bank.build(FilterKind::Ra(m)).unwrap();
            let resp = built.response.unwrap();
            let ctx = bank.context().unwrap();
            vals.push(evaluate_worst_case(&tracking(), rho, Horizon::Infinite { ctx, response: &resp }).unwrap().0);
        }
        let ordered = vals[1] >= vals[2] * (1.0 - SLACK) && vals[2] >= vals[3] * (1.0 - SLACK) && vals[3] >= drkf * (1.0 - SLACK);
        let ra2 = rho > 1.0 || rel(vals[2], drkf) <= 2e-3;
        let ra3 = rel(vals[3], drkf) <= 1e-3;
        pattern_ok &= ordered && ra2 && ra3;
        for (row, v) in vals.iter().enumerate() {
            if rel(*v, PUBLISHED[row][col]) > 1e-2 {
                exact_ok = false;
                misses.push(format!("{}@{rho}", ["DRKF", "RA(1)", "RA(2)", "RA(3)"][row]));
            }
        }
        rows.push(format!("rho={rho}: {:.5} {:.5e} {:.5} {:.5}", vals[0], vals[1], vals[2], vals[3]));
    }
    vec![
        ("2 rational approximation ordering and convergence in m".into(), Outcome::new(pattern_ok, rows.join("; "))),
        (
            "2b rational approximation reference values at 1%".into(),
            Outcome::new(exact_ok, if misses.is_empty() { "all within 1%".into() } else { format!("outside 1%: {}", misses.join(", ")) }),
        ),
    ]
}

fn kalman_recovery() -> Vec<(String, Outcome)> {
    let model = tracking();
    let fw = FwConfig::default();
    let fin = fw_solve_finite(&model, 20, 1e-4, &fw).unwrap();
    let (k_nominal, _) = causal_project(&Mat::identity(20, 20), &fin.pair).unwrap();
    let fin_err = (&fin.k - &k_nominal).norm() / k_nominal.norm();

    let inf = solve_infinite(&model, 1e-4, 1024, &fw).unwrap();
    let mut bank = FilterBank::new(&model, SynthesisSetup::new(1e-4, 1, 1024)).unwrap();
    let kalman = bank.context().unwrap().kalman_samples().to_vec();
    let top = kalman.iter().map(linalg::max_abs_c).fold(0.0, f64::max);
    let inf_err = inf.k_samples.iter().zip(&kalman).map(|(a, b)| linalg::max_abs_c(&(a - b))).fold(0.0, f64::max) / top;
    let ok = fin_err <= 1e-3 && inf_err <= 1e-3;
    vec![(
        "3 Kalman recovery at rho=1e-4".into(),
        Outcome::new(ok, format!("finite T=20 relative error {fin_err:.2e}, infinite {inf_err:.2e}, tol 1e-3")),
    )]
}

fn fixed_point_residuals() -> Vec<(String, Outcome)> {
    let fw = FwConfig { tol: 1e-6, ..FwConfig::default() };
    let res = solve_infinite(&tracking(), 1.0, 512, &fw).unwrap();
    let ok = res.converged && res.fixed_point_residual <= 1e-4 && res.radius_residual <= 1e-4;
    vec![(
        "4 fixed-point residuals at N=512".into(),
        Outcome::new(
            ok,
            format!(
                "fixed-point {:.2e}, radius {:.2e}, tol 1e-4, {} iterations",
                res.fixed_point_residual, res.radius_residual, res.iterations
            ),
        ),
    )]
}

fn frank_wolfe_rate() -> Vec<(String, Outcome)> {
    let start = Instant::now();
    let fw = FwConfig { tol: 0.0, max_iter: 500, error_on_cap: false, ..FwConfig::default() };
    let res = solve_infinite(&tracking(), 1.0, 256, &fw).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let ks: Vec<f64> = (10..=500).map(|k| k as f64).collect();
    let gaps: Vec<f64> = (10..=500).map(|k| res.gap_history[k - 1]).collect();
    let nonpositive = gaps.iter().filter(|g| g.partial_cmp(&&0.0) != Some(std::cmp::Ordering::Greater)).count();
    let slope = loglog_slope(&ks, &gaps);
    let ok = nonpositive == 0 && slope <= -0.9 && secs < 60.0;
    vec![(
        "5 Frank-Wolfe gap rate".into(),
        Outcome::new(ok, format!("log-log slope {slope:.3} (need <= -0.9), {nonpositive} nonpositive gaps, {secs:.1} s")),
    )]
}

fn sdp_certificates() -> Vec<(String, Outcome)> {
    let cases: Vec<(StateSpaceModel, usize, f64)> = vec![
        (walk(), 1, 0.5),
        (walk(), 10, 0.2 * 10f64.sqrt()),
        (walk(), 10, 3.0),
        (tracking(), 10, 1.0),
        (tracking(), 20, 1e-4),
        (tracking(), 20, 20f64.sqrt()),
        (StateSpaceModel::scalar(0.7, 0.5, 1.2, -0.8).unwrap(), 6, 2.0),
    ];
    let mut worst_eig = f64::INFINITY;
    let mut worst_rel = 0.0f64;
    for (model, t, rho_t) in &cases {
        let res = fw_solve_finite(model, *t, *rho_t, &FwConfig::default()).unwrap();
        let cert = sdp_certificate(&res.k, res.gamma_star, &res.pair, *rho_t).unwrap();
        worst_eig = worst_eig.min(cert.min_eigenvalue);
        worst_rel = worst_rel.max(rel(cert.objective, res.value));
    }
    let ok = worst_eig >= -1e-7 && worst_rel <= 1e-5;
    vec![(
        "6 SDP certificate".into(),
        Outcome::new(ok, format!("{} solves: min eigenvalue {worst_eig:.2e}, objective vs dual {worst_rel:.2e}", cases.len())),
    )]
}

// Dual objective gamma rho^2 + gamma Tr[(I - G/gamma)^{-1} - I] minimised over
// gamma by bisection on its derivative, then over lower-triangular K by
// gradient descent with the envelope gradient 2 W^2 T_K [H, I]^T.
fn inner_gamma(g: &Mat, rho: f64) -> (f64, f64, Mat) {
    let n = g.nrows();
    let top = linalg::max_sym_eigenvalue(g).max(1e-300);
    let eval = |gamma: f64| -> (f64, f64, Mat) {
        let w = linalg::inverse(&(Mat::identity(n, n) - g / gamma)).unwrap();
        let value = gamma * rho * rho + gamma * (w.trace() - n as f64);
        let slope = rho * rho + w.trace() - n as f64 - (&w * g * &w).trace() / gamma;
        (value, slope, w)
    };
    let mut lo = top * (1.0 + 1e-15);
    let mut hi = 2.0 * top;
    while eval(hi).1 < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if eval(mid).1 < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (value, _, w) = eval(hi);
    (value, hi, w)
}

fn descent_oracle(pair: &BlockToeplitzPair, rho: f64) -> f64 {
    let t = pair.horizon;
    let hi = {
        let mut m = Mat::zeros(t, pair.xi_dim());
        m.columns_mut(0, pair.state_noise_dim()).copy_from(&pair.h);
        m.columns_mut(pair.state_noise_dim(), t).copy_from(&Mat::identity(t, t));
        m
    };
    let objective = |k: &Mat| inner_gamma(&ErrorOperator::new(k, pair).gram(), rho);
    let mut k = Mat::zeros(t, t);
    let (mut value, _, mut w) = objective(&k);
    let mut step = 1e-2;
    for _ in 0..200_000 {
        let op = ErrorOperator::new(&k, pair);
        let mut grad = &w * &w * &op.t * hi.transpose() * 2.0;
        causal_mask(&mut grad, 1, 1);
        let g2 = grad.norm_squared();
        if g2 < 1e-26 {
            break;
        }
        let mut accepted = false;
        while step > 1e-18 {
            let cand = &k - &grad * step;
            let (v, _, wc) = objective(&cand);
            if v <= value - 0.3 * step * g2 {
                k = cand;
                value = v;
                w = wc;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        step *= 1.5;
    }
    value
}

fn brute_force() -> Vec<(String, Outcome)> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    let mut notes = Vec::new();
    for i in 0..10 {
        let model = StateSpaceModel::scalar(
            rng.gen_range(-1.2..1.2),
            rng.gen_range(0.3..1.5),
            rng.gen_range(0.3..1.5) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
            rng.gen_range(0.3..1.5),
        )
        .unwrap();
        let t = 1 + i % 3;
        let rho = rng.gen_range(0.1..2.0);
        let fw = FwConfig { tol: 1e-10, max_iter: 200_000, ..FwConfig::default() };
        let res = fw_solve_finite(&model, t, rho, &fw).unwrap();
        let pair = build_block_toeplitz(&model, t).unwrap();
        let oracle = descent_oracle(&pair, rho);
        let err = rel(res.value, oracle);
        worst = worst.max(err);
        notes.push(format!("{err:.1e}"));
    }
    vec![(
        "7 brute-force equivalence".into(),
        Outcome::new(worst <= 1e-4, format!("worst relative gap {worst:.2e} over 10 systems [{}]", notes.join(" "))),
    )]
}

fn factorisation_quality() -> Vec<(String, Outcome)> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let grid = FrequencyGrid::new(1024).unwrap();
    let (mut worst_trip, mut worst_tail) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let coeffs: Vec<(f64, f64)> =
            (1..=8).map(|k| (rng.gen_range(-0.6..0.6) / k as f64, rng.gen_range(-0.6..0.6) / k as f64)).collect();
        let level: f64 = rng.gen_range(-1.0..1.0);
        let samples: Vec<f64> = (0..grid.len())
            .map(|n| {
                let om = grid.omega(n);
                let s: f64 = coeffs.iter().enumerate().map(|(k, (a, b))| {
                    let kk = (k + 1) as f64;
                    a * (kk * om).cos() + b * (kk * om).sin()
                }).sum();
                (level + s).exp()
            })
            .collect();
        let top = samples.iter().cloned().fold(0.0, f64::max);
        let density = SpectralDensity::new(grid.clone(), samples.clone()).unwrap();
        let factor = spectral_factor_dft(&density).unwrap();
        let trip = factor.samples.iter().zip(&samples).map(|(u, m)| (u.norm_sqr() - m).abs()).fold(0.0, f64::max) / top;
        worst_trip = worst_trip.max(trip);
        worst_tail = worst_tail.max(factor.anticausal_tail);
    }
    vec![(
        "8 spectral factorisation quality".into(),
        Outcome::new(worst_trip <= 1e-6 && worst_tail <= 1e-6, format!("round trip {worst_trip:.2e}, anticausal tail {worst_tail:.2e}, tol 1e-6")),
    )]
}

fn horizon_consistency() -> Vec<(String, Outcome)> {
    let fin = fw_solve_finite(&tracking(), 50, 50f64.sqrt(), &FwConfig::default()).unwrap();
    let inf = solve_infinite(&tracking(), 1.0, 1024, &FwConfig::default()).unwrap();
    let per_step = fin.value / 50.0;
    let gap = rel(per_step, inf.value);
    vec![(
        "9 finite/infinite consistency".into(),
        Outcome::new(gap <= 0.05, format!("finite T=50 per step {per_step:.4}, infinite {:.4}, relative gap {gap:.3}", inf.value)),
    )]
}

fn runtime_scaling() -> Vec<(String, Outcome)> {
    let report = bench_scaling(&tracking(), &[10, 25, 50], 1.0, 1024, 7, &FwConfig::default()).unwrap();
    let ok = report.finite_strictly_increasing() && report.finite_exponent > 1.0 && report.infinite_variation < 0.1;
    let times: Vec<String> =
        report.rows.iter().map(|r| format!("T={}: {:.3}s/{:.3}s", r.horizon, r.finite_secs, r.infinite_secs)).collect();
    vec![(
        "10 runtime scaling".into(),
        Outcome::new(
            ok,
            format!(
                "{}; finite exponent {:.2}, infinite variation {:.1}%",
                times.join(", "),
                report.finite_exponent,
                100.0 * report.infinite_variation
            ),
        ),
    )]
}

fn main() -> ExitCode {
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let criteria: [(&str, Criterion); 10] = [
        ("short-horizon", short_horizon_comparison),
        ("table", table_values),
        ("kalman", kalman_recovery),
        ("residual", fixed_point_residuals),
        ("rate", frank_wolfe_rate),
        ("sdp", sdp_certificates),
        ("brute", brute_force),
        ("factor", factorisation_quality),
        ("consistency", horizon_consistency),
        ("runtime", runtime_scaling),
    ];
    let mut failed = 0;
    let mut ran = 0;
    for (slug, check) in criteria {
        if filter.as_deref().is_some_and(|f| !slug.contains(f)) {
            continue;
        }
        let lines = match catch_unwind(AssertUnwindSafe(check)) {
            Ok(lines) => lines,
            Err(_) => vec![(slug.to_string(), Outcome::new(false, "panicked"))],
        };
        for (label, outcome) in lines {
            ran += 1;
            if !outcome.pass {
                failed += 1;
            }
            println!("[{}] {label}: {}", if outcome.pass { "PASS" } else { "FAIL" }, outcome.detail);
        }
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

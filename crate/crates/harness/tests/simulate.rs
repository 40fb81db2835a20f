use drkf::config::{ExperimentConfig, ModelSpec, NoiseKind, RhoSpec};
use drkf::filters::{FilterBank, FilterKind, SynthesisSetup};
use drkf::sim::{simulate, simulate_filters, NoiseModel};
use drkf_core::freq::FreqContext;
use drkf_core::sslib::{build_block_toeplitz, solve_dare, FrequencyGrid, StateSpaceModel};
use drkf_core::C64;

fn config(noise: NoiseKind, horizon: usize, trials: usize, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        model: ModelSpec::from_model(&StateSpaceModel::tracking(1.0)),
        rho: RhoSpec::Single(1.0),
        horizon,
        grid: 256,
        trials,
        seed,
        noise,
        filters: vec![FilterKind::Kalman, FilterKind::DrkfFinite, FilterKind::DrkfInfinite],
    }
}

#[test]
fn zero_disturbance_gives_zero_error() {
    let res = simulate(&config(NoiseKind::Zero, 8, 5, 1)).unwrap();
    for c in &res[0].curves {
        assert!(c.mse.iter().all(|&v| v == 0.0), "{}", c.name);
    }
    assert_eq!(res[0].energy, 0.0);
}

#[test]
fn kalman_matches_its_nominal_cost_under_white_noise() {
    let model = StateSpaceModel::scalar(0.9, 1.0, 1.0, 1.0).unwrap();
    let horizon = 120;
    let mut bank = FilterBank::new(&model, SynthesisSetup::new(1.0, horizon, 256)).unwrap();
    let kalman = bank.build(FilterKind::Kalman).unwrap();
    let noise = NoiseModel::new(NoiseKind::White, &mut bank).unwrap();
    let res = simulate_filters(&[kalman], &noise, 1.0, 2000, 3);
    let curve = &res.curves[0];
    assert!((curve.average - curve.analytic_average).abs() <= 3.0 * curve.average_stderr);

    // once the transient has died out the per-step error is the stationary cost
    let ric = solve_dare(&model, 1e-12).unwrap();
    let grid = FrequencyGrid::new(256).unwrap();
    let ctx = FreqContext::new(&model, &ric, &grid).unwrap();
    let psd = ctx.factor_error_psd(&vec![C64::new(1.0, 0.0); 256]).unwrap();
    let stationary = psd.iter().sum::<f64>() / 256.0;
    assert!((curve.analytic_mse[horizon - 1] - stationary).abs() < 1e-9);
}

#[test]
fn robust_filter_ends_below_kalman_under_worst_case_noise() {
    let res = simulate(&config(NoiseKind::WorstCase, 30, 1000, 5)).unwrap();
    let r = &res[0];
    let kalman = r.curve(FilterKind::Kalman).unwrap();
    let finite = r.curve(FilterKind::DrkfFinite).unwrap();
    let infinite = r.curve(FilterKind::DrkfInfinite).unwrap();
    assert!(finite.final_step < kalman.final_step);
    assert!(infinite.final_step < kalman.final_step);
    assert!(finite.analytic_average < kalman.analytic_average);
    // the finite filter is the minimiser of its own worst case
    assert!(finite.worst_case_per_step <= kalman.worst_case_per_step);
    assert!(finite.worst_case_per_step <= infinite.worst_case_per_step);
}

#[test]
fn worst_case_energy_matches_the_transport_map() {
    let res = simulate(&config(NoiseKind::WorstCase, 20, 4000, 9)).unwrap();
    let r = &res[0];
    // ||xi||^2 has standard deviation sqrt(2 Tr Sigma^2) <= sqrt(2) Tr Sigma
    let bound = 4.0 * (2.0f64).sqrt() * r.expected_energy / (r.trials as f64).sqrt();
    assert!((r.energy - r.expected_energy).abs() <= bound, "{} vs {}", r.energy, r.expected_energy);
    // the worst case only adds energy to the nominal
    let xi_dim = build_block_toeplitz(&StateSpaceModel::tracking(1.0), 20).unwrap().xi_dim();
    assert!(r.expected_energy * 20.0 > xi_dim as f64);
}

#[test]
fn correlated_noise_matches_its_covariance() {
    let res = simulate(&config(NoiseKind::ArCorrelated { phi: 0.8 }, 25, 2000, 2)).unwrap();
    for c in &res[0].curves {
        assert!((c.average - c.analytic_average).abs() <= 3.5 * c.average_stderr, "{}", c.name);
    }
    let xi_dim = build_block_toeplitz(&StateSpaceModel::tracking(1.0), 25).unwrap().xi_dim();
    assert!((res[0].expected_energy * 25.0 - xi_dim as f64).abs() < 1e-9);
}

#[test]
fn fixed_seed_gives_identical_bytes() {
    let cfg = config(NoiseKind::ArCorrelated { phi: 0.8 }, 10, 200, 42);
    let a = simulate(&cfg).unwrap();
    let b = simulate(&cfg).unwrap();
    assert_eq!(a[0].curves_csv().unwrap(), b[0].curves_csv().unwrap());
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    let mut other = cfg.clone();
    other.seed = 43;
    assert_ne!(simulate(&other).unwrap()[0].curves_csv().unwrap(), a[0].curves_csv().unwrap());
}

#[test]
fn rho_sweep_produces_one_result_per_radius() {
    let mut cfg = config(NoiseKind::White, 6, 20, 0);
    cfg.rho = RhoSpec::Sweep(vec![0.5, 2.0]);
    let res = simulate(&cfg).unwrap();
    assert_eq!(res.len(), 2);
    assert_eq!(res[1].rho, 2.0);
    assert!(res.iter().all(|r| r.trials == 20 && r.curves.iter().all(|c| c.mse.iter().all(|&v| v >= 0.0))));
}

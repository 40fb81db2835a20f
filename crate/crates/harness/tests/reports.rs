use approx::assert_relative_eq;
use drkf::bench::bench_scaling;
use drkf::filters::{FilterBank, FilterKind, FilterResponse, SynthesisSetup};
use drkf::report::{evaluate_worst_case, freq_response_report, Horizon};
use drkf_core::finite::{fw_solve_finite, FwConfig};
use drkf_core::sslib::StateSpaceModel;
use drkf_core::{CMat, C64};

fn tracking_bank(rho: f64, grid: usize) -> FilterBank {
    FilterBank::new(&StateSpaceModel::tracking(1.0), SynthesisSetup::new(rho, 1, grid)).unwrap()
}

fn response(bank: &mut FilterBank, kind: FilterKind) -> FilterResponse {
    bank.build(kind).unwrap().response.unwrap()
}

#[test]
fn zero_filter_reports_the_signal_spectrum() {
    let (a, b, c_s) = (0.6, 0.8, 1.5);
    let model = StateSpaceModel::scalar(a, b, 1.0, c_s).unwrap();
    let mut bank = FilterBank::new(&model, SynthesisSetup::new(1.0, 1, 64)).unwrap();
    let ctx = bank.context().unwrap();
    let zero = FilterResponse::Samples(vec![CMat::zeros(1, 1); 64]);
    let report = freq_response_report(ctx, &[("zero".into(), zero)]).unwrap();
    for (k, &om) in report.omega.iter().enumerate() {
        let z = C64::from_polar(1.0, om);
        let expect = (c_s * b / (z - a)).norm_sqr();
        assert_relative_eq!(report.column("zero").unwrap()[k], expect, max_relative = 1e-12);
    }
}

#[test]
fn robust_spectrum_lies_between_the_baselines() {
    let mut bank = tracking_bank(1.0, 256);
    let filters: Vec<(String, FilterResponse)> = [FilterKind::Kalman, FilterKind::DrkfInfinite, FilterKind::HinfProxy]
        .into_iter()
        .map(|k| (k.to_string(), response(&mut bank, k)))
        .collect();
    let report = freq_response_report(bank.context().unwrap(), &filters).unwrap();
    let kf = report.column("kalman").unwrap();
    let dr = report.column("drkf_infinite").unwrap();
    let hinf = report.column("hinf_proxy").unwrap();
    let mut crossing = 0;
    for k in 0..report.omega.len() {
        let lo = kf[k].min(hinf[k]);
        let hi = kf[k].max(hinf[k]);
        if hi - lo < 0.1 * hi {
            // where the baselines cross the envelope collapses and the robust
            // spectrum dips slightly below both
            crossing += 1;
            assert!(dr[k] >= 0.9 * lo && dr[k] <= 1.05 * hi, "node {k}: {} near [{lo}, {hi}]", dr[k]);
        } else {
            assert!(dr[k] >= 0.95 * lo && dr[k] <= 1.05 * hi, "node {k}: {} not in [{lo}, {hi}]", dr[k]);
        }
    }
    assert!(crossing < report.omega.len() / 10);
    // the H-infinity proxy flattens the peak of the error spectrum
    let peak = |v: &[f64]| v.iter().cloned().fold(0.0, f64::max);
    assert!(peak(hinf) < peak(dr) && peak(dr) < peak(kf));

    let n = report.omega.len();
    for (_, col) in &report.columns {
        for k in 1..n {
            assert_relative_eq!(col[k], col[n - k], max_relative = 1e-10);
        }
    }
    let csv = report.to_csv().unwrap();
    assert!(csv.starts_with("k,omega,kalman,drkf_infinite,hinf_proxy\n"));
    assert_eq!(csv.lines().count(), n + 1);
}

#[test]
fn worst_case_evaluation() {
    let model = StateSpaceModel::tracking(1.0);
    let mut bank = tracking_bank(1.0, 1024);
    let kalman = response(&mut bank, FilterKind::Kalman);
    let ctx = bank.context().unwrap();
    let psd = drkf::report::error_spectrum(ctx, &kalman).unwrap();
    let h2 = psd.iter().sum::<f64>() / psd.len() as f64;
    let (at_zero, _) = evaluate_worst_case(&model, 0.0, Horizon::Infinite { ctx, response: &kalman }).unwrap();
    assert_relative_eq!(at_zero, h2, max_relative = 1e-12);

    let drkf = response(&mut bank, FilterKind::DrkfInfinite);
    let mut others = vec![kalman];
    for k in [FilterKind::Ra(1), FilterKind::Ra(2), FilterKind::HinfProxy] {
        others.push(response(&mut bank, k));
    }
    let ctx = bank.context().unwrap();
    let (best, _) = evaluate_worst_case(&model, 1.0, Horizon::Infinite { ctx, response: &drkf }).unwrap();
    for other in &others {
        let (v, _) = evaluate_worst_case(&model, 1.0, Horizon::Infinite { ctx, response: other }).unwrap();
        assert!(best <= v * (1.0 + 1e-9), "{best} > {v}");
    }
}

#[test]
fn tracking_values_match_the_published_table() {
    let model = StateSpaceModel::tracking(1.0);
    for (rho, published) in [(0.01, 0.7870), (1.0, 3.4948), (3.0, 14.842), (5.0, 34.110)] {
        let mut setup = SynthesisSetup::new(rho, 1, 1024);
        setup.fw.tol = 1e-8;
        let mut bank = FilterBank::new(&model, setup).unwrap();
        let drkf = response(&mut bank, FilterKind::DrkfInfinite);
        let (v, _) = evaluate_worst_case(&model, rho, Horizon::Infinite { ctx: bank.context().unwrap(), response: &drkf }).unwrap();
        assert_relative_eq!(v, published, max_relative = 1e-3);
    }
}

#[test]
fn finite_evaluation_reproduces_the_solver_value() {
    let model = StateSpaceModel::scalar(1.0, 1.0, 1.0, 1.0).unwrap();
    let res = fw_solve_finite(&model, 8, 0.7, &FwConfig::default()).unwrap();
    let (v, gamma) = evaluate_worst_case(&model, 0.7, Horizon::Finite { k_t: &res.k, horizon: 8 }).unwrap();
    assert_relative_eq!(v, res.value, max_relative = 1e-12);
    assert_relative_eq!(gamma, res.gamma_star, max_relative = 1e-9);
    let wrong = drkf_core::Mat::zeros(7, 8);
    assert!(evaluate_worst_case(&model, 0.7, Horizon::Finite { k_t: &wrong, horizon: 8 }).is_err());
}

#[test]
fn bench_rows_and_sanity_floor() {
    let model = StateSpaceModel::tracking(1.0);
    let report = bench_scaling(&model, &[1, 4], 1.0, 64, 1, &FwConfig::default()).unwrap();
    assert_eq!(report.rows.len(), 2);
    assert!(report.rows[0].finite_secs < 1.0);
    assert!(report.rows.iter().all(|r| r.infinite_secs > 0.0));
    assert!(bench_scaling(&model, &[10], 1.0, 64, 1, &FwConfig::default()).is_err());
}

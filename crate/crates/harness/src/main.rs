use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use drkf::bench::bench_scaling;
use drkf::config::{load_model, ExperimentConfig, ModelSpec, NoiseKind, RhoSpec};
use drkf::error::{HarnessError, Result};
use drkf::export::{infinite_to_csv, k_from_csv, k_to_csv, FilterMatrices, FiniteSummary, InfiniteSummary, RationalSummary};
use drkf::filters::{FilterBank, FilterKind, SynthesisSetup};
use drkf::report::{evaluate_worst_case, freq_response_report, Horizon};
use drkf::sim::simulate;
use drkf_core::finite::{fw_solve_finite, FwConfig};
use drkf_core::freq::solve_infinite;
use drkf_core::ratapprox::{best_precision, least_order, rational_factor};
use drkf_core::realize::assemble_filter;
use drkf_core::sslib::{solve_dare, StateSpaceModel};
use serde_json::json;

#[derive(Parser)]
#[command(name = "drkf", version, about = "Wasserstein distributionally robust Kalman filter synthesis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Solver {
    /// Stop when the relative change of the dual iterate falls below this.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 5000)]
    max_iter: usize,
    /// Return the last iterate instead of failing at the iteration cap.
    #[arg(long)]
    allow_cap: bool,
}

impl Solver {
    fn config(&self) -> FwConfig {
        FwConfig { tol: self.tol, max_iter: self.max_iter, error_on_cap: !self.allow_cap, ..FwConfig::default() }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Finite-horizon robust filter.
    SynthFinite {
        #[arg(long)]
        config: PathBuf,
        /// Radius of the ball over the whole horizon.
        #[arg(long)]
        rho: f64,
        #[arg(long = "T")]
        horizon: usize,
        /// Interpret `--rho` per step and scale it by sqrt(T).
        #[arg(long)]
        per_step: bool,
        #[command(flatten)]
        solver: Solver,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Infinite-horizon robust filter on a frequency grid.
    SynthInfinite {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        rho: f64,
        #[arg(long = "N", default_value_t = 1024)]
        grid: usize,
        #[command(flatten)]
        solver: Solver,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Rational approximation of the worst-case spectrum and its realised filter.
    Ratapprox {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        rho: f64,
        #[arg(long = "N", default_value_t = 1024)]
        grid: usize,
        /// Best precision at this order.
        #[arg(long, conflicts_with = "eps", required_unless_present = "eps")]
        order: Option<usize>,
        /// Least order reaching this precision.
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, default_value_t = 10)]
        m_max: usize,
        #[command(flatten)]
        solver: Solver,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Monte Carlo simulation of several filters.
    Simulate {
        /// Full experiment description; overrides the other options.
        #[arg(long)]
        experiment: Option<PathBuf>,
        #[arg(long, required_unless_present = "experiment")]
        config: Option<PathBuf>,
        /// Per-step radius.
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
        #[arg(long = "T", default_value_t = 50)]
        horizon: usize,
        #[arg(long = "N", default_value_t = 1024)]
        grid: usize,
        #[arg(long, value_enum, default_value_t = Noise::White)]
        noise: Noise,
        #[arg(long, default_value_t = NoiseKind::DEFAULT_PHI)]
        phi: f64,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_delimiter = ',', default_value = "kalman,drkf_finite,drkf_infinite")]
        filters: Vec<FilterKind>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Error spectra of several filters.
    Freqresp {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        rho: f64,
        #[arg(long = "N", default_value_t = 1024)]
        grid: usize,
        #[arg(long, value_delimiter = ',', default_value = "kalman,drkf_infinite,hinf_proxy")]
        filters: Vec<FilterKind>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Worst-case expected error of a filter.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        /// Per-step radius for stationary filters, total radius with `--gain`.
        #[arg(long)]
        rho: f64,
        /// Finite-horizon gain in the synth-finite CSV format.
        #[arg(long, conflicts_with = "filter")]
        gain: Option<PathBuf>,
        #[arg(long, required_unless_present = "gain")]
        filter: Option<FilterKind>,
        /// Radius used to synthesise `--filter`, defaults to `--rho`.
        #[arg(long)]
        design_rho: Option<f64>,
        #[arg(long = "N", default_value_t = 1024)]
        grid: usize,
    },
    /// Runtime scaling over horizons.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
        #[arg(long = "T", value_delimiter = ',', default_value = "10,25,50")]
        horizons: Vec<usize>,
        #[arg(long = "N", default_value_t = 256)]
        grid: usize,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Noise {
    White,
    Ar,
    Worst,
    Zero,
}

fn write_out(dir: Option<&Path>, name: &str, contents: &str) -> Result<()> {
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(name), contents)?;
    }
    Ok(())
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::SynthFinite { config, rho, horizon, per_step, solver, out_dir } => {
            let model = load_model(&config)?;
            let rho_t = if per_step { rho * (horizon as f64).sqrt() } else { rho };
            let res = fw_solve_finite(&model, horizon, rho_t, &solver.config())?;
            let summary = FiniteSummary::from(&res);
            let dir = out_dir.as_deref();
            write_out(dir, "k.csv", &k_to_csv(&res.k, horizon, model.d_s(), model.d_y())?)?;
            write_out(dir, "summary.json", &serde_json::to_string_pretty(&summary)?)?;
            print_json(&summary)
        }
        Command::SynthInfinite { config, rho, grid, solver, out_dir } => {
            let model = load_model(&config)?;
            let res = solve_infinite(&model, rho, grid, &solver.config())?;
            let summary = InfiniteSummary::from(&res);
            let dir = out_dir.as_deref();
            write_out(dir, "freq.csv", &infinite_to_csv(&res)?)?;
            write_out(dir, "summary.json", &serde_json::to_string_pretty(&summary)?)?;
            print_json(&summary)
        }
        Command::Ratapprox { config, rho, grid, order, eps, m_max, solver, out_dir } => {
            let model = load_model(&config)?;
            let res = solve_infinite(&model, rho, grid, &solver.config())?;
            let rational = match (order, eps) {
                (Some(m), _) => best_precision(&res.m_star.samples, m, 1e-10)?,
                (None, Some(e)) => least_order(&res.m_star.samples, e, m_max)?,
                (None, None) => return Err(HarnessError::config("either --order or --eps is required")),
            };
            let ric = solve_dare(&model, 1e-12)?;
            let factor = rational_factor(&rational)?;
            let filter = assemble_filter(&factor, &model, &ric)?;
            let mut bank = FilterBank::new(&model, SynthesisSetup::new(rho, 1, grid))?;
            let ctx = bank.context()?;
            let response = drkf::filters::FilterResponse::Factor(factor.samples(ctx.grid().nodes()));
            let (value, _) = evaluate_worst_case(&model, rho, Horizon::Infinite { ctx, response: &response })?;
            let summary = RationalSummary::from(&rational);
            let dir = out_dir.as_deref();
            write_out(dir, "ra.json", &serde_json::to_string_pretty(&summary)?)?;
            write_out(dir, "filter.json", &serde_json::to_string_pretty(&FilterMatrices::from(&filter))?)?;
            print_json(&json!({ "rational": summary, "worst_case_value": value, "drkf_value": res.value }))
        }
        Command::Simulate { experiment, config, rho, horizon, grid, noise, phi, trials, seed, filters, out_dir } => {
            let cfg = match experiment {
                Some(path) => ExperimentConfig::load(&path)?,
                None => {
                    let path = config.ok_or_else(|| HarnessError::config("--config is required"))?;
                    let noise = match noise {
                        Noise::White => NoiseKind::White,
                        Noise::Ar => NoiseKind::ArCorrelated { phi },
                        Noise::Worst => NoiseKind::WorstCase,
                        Noise::Zero => NoiseKind::Zero,
                    };
                    ExperimentConfig {
                        model: ModelSpec::from_model(&load_model(&path)?),
                        rho: RhoSpec::Single(rho),
                        horizon,
                        grid,
                        trials,
                        seed,
                        noise,
                        filters,
                    }
                }
            };
            let results = simulate(&cfg)?;
            for r in &results {
                for (name, secs) in &r.synthesis_secs {
                    eprintln!("rho {}: {name} synthesised in {secs:.3} s", r.rho);
                }
                eprintln!("rho {}: simulation took {:.3} s", r.rho, r.simulation_secs);
                write_out(out_dir.as_deref(), &format!("mse_rho{}.csv", r.rho), &r.curves_csv()?)?;
            }
            write_out(out_dir.as_deref(), "summary.json", &serde_json::to_string_pretty(&results)?)?;
            print_json(&results)
        }
        Command::Freqresp { config, rho, grid, filters, out } => {
            let model = load_model(&config)?;
            let mut bank = FilterBank::new(&model, SynthesisSetup::new(rho, 1, grid))?;
            let mut responses = Vec::with_capacity(filters.len());
            for kind in filters {
                let built = bank.build(kind)?;
                let resp = built
                    .response
                    .ok_or_else(|| HarnessError::config(format!("{kind} has no frequency response")))?;
                responses.push((kind.to_string(), resp));
            }
            let csv = freq_response_report(bank.context()?, &responses)?.to_csv()?;
            match out {
                Some(path) => std::fs::write(path, csv)?,
                None => print!("{csv}"),
            }
            Ok(())
        }
        Command::Evaluate { config, rho, gain, filter, design_rho, grid } => {
            let model = load_model(&config)?;
            let (value, gamma) = match (gain, filter) {
                (Some(path), _) => {
                    let (k, horizon, d_s, d_y) = k_from_csv(&std::fs::read_to_string(path)?)?;
                    if d_s != model.d_s() || d_y != model.d_y() {
                        return Err(HarnessError::config("gain dimensions do not match the model"));
                    }
                    evaluate_worst_case(&model, rho, Horizon::Finite { k_t: &k, horizon })?
                }
                (None, Some(kind)) => evaluate_stationary(&model, kind, rho, design_rho.unwrap_or(rho), grid)?,
                (None, None) => return Err(HarnessError::config("either --gain or --filter is required")),
            };
            print_json(&json!({ "value": value, "gamma": gamma }))
        }
        Command::Bench { config, rho, horizons, grid, repeats } => {
            let model = load_model(&config)?;
            print_json(&bench_scaling(&model, &horizons, rho, grid, repeats, &FwConfig::default())?)
        }
    }
}

fn evaluate_stationary(model: &StateSpaceModel, kind: FilterKind, rho: f64, design_rho: f64, grid: usize) -> Result<(f64, f64)> {
    let mut bank = FilterBank::new(model, SynthesisSetup::new(design_rho, 1, grid))?;
    let response = bank
        .build(kind)?
        .response
        .ok_or_else(|| HarnessError::config(format!("{kind} has no frequency response")))?;
    evaluate_worst_case(model, rho, Horizon::Infinite { ctx: bank.context()?, response: &response })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

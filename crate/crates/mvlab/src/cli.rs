//! Command-line front end: `limits`, `simulate`, `backtest`, `calibrate`,
//! `mp`, and `ridge` subcommands that evaluate the library and emit
//! plot-ready delimited tables plus a JSON run manifest.
//!
//! Exit codes: 0 success, 2 usage/invalid parameters, 3 file or schema
//! errors, 4 numeric failures (unsupported aspect ratio, solver failure,
//! degenerate inputs).

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::asymptotics::{
    self, double_ascent_scenario, limit_grid, LimitKind, RidgeInputs, SpectralMeasure,
};
use crate::backtest::{
    annualize, build_sorted_portfolios, parse_market_series, rolling_backtest, BacktestConfig,
    CharacteristicPanel, ConstructedAssets, InsampleMode,
};
use crate::calibration::{
    fit_theta_curve, parse_observations, FitOptions, PhiInput, SharpeUnit,
};
use crate::error::{Error, Result};
use crate::montecarlo::{run_sweep, NoiseKind, SweepConfig, ThetaOfN};
use crate::panel::ReturnPanel;
use crate::table;

#[derive(Parser)]
#[command(
    name = "mvlab",
    version,
    about = "Mean-variance portfolio lab: high-dimensional limits, Monte Carlo sweeps, rolling backtests, Sharpe-curve calibration"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Cap the rayon worker count. Outputs are identical for any value.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate closed-form Sharpe/loss/mean-SD limits over a grid, or the
    /// double-ascent scenario.
    Limits(LimitsArgs),
    /// Run a seeded Monte Carlo sweep from a key-value config file.
    Simulate(SimulateArgs),
    /// Run the rolling-window backtest on a return panel.
    Backtest(BacktestArgs),
    /// Fit the clairvoyant Sharpe curve to an observed SR-vs-N table.
    Calibrate(CalibrateArgs),
    /// Marchenko-Pastur support, zero mass, smallest-eigenvalue limits,
    /// and density tables.
    Mp(MpArgs),
    /// Ridge-regularized limits across a lambda list.
    Ridge(RidgeArgs),
}

#[derive(Args)]
struct LimitsArgs {
    /// Limit family: sr | loss | mean-sd.
    #[arg(long, conflicts_with = "scenario")]
    theorem: Option<String>,
    /// Scenario evaluation: double-ascent.
    #[arg(long)]
    scenario: Option<String>,
    /// Theta values (list or lo:hi:count).
    #[arg(long, default_value = "4")]
    theta: String,
    /// Phi values (list or lo:hi:count).
    #[arg(long, default_value = "0")]
    phi: String,
    /// Rho values (list or lo:hi:count).
    #[arg(long, default_value = "0.5")]
    rho: String,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Sample size for the double-ascent scenario (N = rho T).
    #[arg(long, default_value_t = 100)]
    t: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Key-value config file (see README for the schema).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct BacktestArgs {
    /// Return panel file (constructed assets or raw test assets).
    #[arg(long)]
    returns: PathBuf,
    /// Key-value config file (window, n_list, sigma, gamma, reps, seed,
    /// periods_per_year, insample).
    #[arg(long)]
    config: PathBuf,
    /// Long-format characteristics file (period,stock,characteristic,value);
    /// triggers sorted-portfolio construction from the returns panel.
    #[arg(long, requires = "ranking")]
    characteristics: Option<PathBuf>,
    /// Long-format ranking-weight file (period,stock,weight).
    #[arg(long, requires = "characteristics")]
    ranking: Option<PathBuf>,
    /// Top-M universe size for sorted-portfolio construction.
    #[arg(long, default_value_t = 1500)]
    top_m: usize,
    /// Groups per characteristic.
    #[arg(long, default_value_t = 10)]
    groups: usize,
    /// Market excess-return file (period,value) for CAPM alphas.
    #[arg(long)]
    market: Option<PathBuf>,
    /// Report annualized metrics.
    #[arg(long)]
    annualize: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Delimited N,SR[,SE] observations.
    #[arg(long)]
    input: PathBuf,
    /// Training window the observations were produced with.
    #[arg(long)]
    window: usize,
    /// Factor strength fed to the Sharpe limit.
    #[arg(long, default_value_t = 0.0)]
    phi: f64,
    /// Unit of the observed Sharpe ratios: period | annual.
    #[arg(long, default_value = "period")]
    unit: String,
    /// Periods per year when --unit annual.
    #[arg(long, default_value_t = 12.0)]
    periods_per_year: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Weight residuals by inverse squared SE when SEs are present.
    #[arg(long)]
    weighted: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct MpArgs {
    /// Rho values (list or lo:hi:count).
    #[arg(long)]
    rho: String,
    /// Density abscissas per rho (0 = summary table only).
    #[arg(long, default_value_t = 0)]
    points: usize,
    /// Spike parameters sigma_f2,b_norm2,sigma_eps2 for the
    /// smallest-eigenvalue column.
    #[arg(long)]
    spike: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct RidgeArgs {
    /// Lambda values (list or lo:hi:count).
    #[arg(long)]
    lambda: String,
    #[arg(long)]
    rho: f64,
    /// Limiting squared mean norm.
    #[arg(long)]
    xi2: f64,
    /// Squared clairvoyant Sharpe ratio (loss column only).
    #[arg(long)]
    theta: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Population spectral atoms as tau:weight pairs, e.g. "1:0.6,2:0.4".
    #[arg(long, default_value = "1:1")]
    h_atoms: String,
    /// Mean-projection spectral atoms, same syntax.
    #[arg(long, default_value = "1:1")]
    g_atoms: String,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
}

/// Entry point used by the binary; returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            Ok(p) => p,
            Err(e) => {
                eprintln!("error: {e}");
                return 2;
            }
        };
        return pool.install(|| dispatch(&cli.command));
    }
    dispatch(&cli.command)
}

fn dispatch(cmd: &Command) -> i32 {
    let result = match cmd {
        Command::Limits(a) => cmd_limits(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Backtest(a) => cmd_backtest(a),
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::Mp(a) => cmd_mp(a),
        Command::Ridge(a) => cmd_ridge(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn emit(
    table: &str,
    out: &Option<PathBuf>,
    manifest_path: &Option<PathBuf>,
    manifest: serde_json::Value,
) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, table)?,
        None => print!("{table}"),
    }
    let manifest_target = manifest_path.clone().or_else(|| {
        out.as_ref()
            .map(|p| p.with_extension("manifest.json"))
    });
    if let Some(path) = manifest_target {
        table::write_manifest(&path, &manifest)?;
    }
    Ok(())
}

/// The asset-count grid used by the double-ascent figures: dense at small N,
/// coarser past the interpolation threshold, skipping N = T itself.
pub fn scenario_n_grid() -> Vec<usize> {
    let mut ns = vec![3, 5, 8];
    ns.extend((10..=95).step_by(5));
    ns.extend([110, 120]);
    ns.extend((150..=1000).step_by(50));
    ns
}

fn cmd_limits(a: &LimitsArgs) -> Result<()> {
    if let Some(scenario) = &a.scenario {
        if scenario != "double-ascent" {
            return Err(Error::Invalid(format!("unknown scenario '{scenario}'")));
        }
        let phis = table::parse_phi_list(&a.phi, a.t)?;
        if phis.len() != 1 {
            return Err(Error::Invalid(
                "the scenario takes a single phi value".into(),
            ));
        }
        let t = a.t as f64;
        let rhos: Vec<f64> = scenario_n_grid().iter().map(|&n| n as f64 / t).collect();
        let rows = double_ascent_scenario(t, phis[0], &rhos, a.sigma)?;
        let rendered = table::render_scenario(&rows);
        let manifest = json!({
            "command": "limits",
            "scenario": "double-ascent",
            "t": a.t,
            "phi": phis[0],
            "sigma": a.sigma,
        });
        return emit(&rendered, &a.out, &a.manifest, manifest);
    }

    let theorem = a
        .theorem
        .as_deref()
        .ok_or_else(|| Error::Invalid("pass --theorem or --scenario".into()))?;
    let kind = match theorem {
        "sr" => LimitKind::Sharpe,
        "loss" => LimitKind::Loss,
        "mean-sd" => LimitKind::MeanSd,
        other => {
            return Err(Error::Invalid(format!(
                "unknown theorem '{other}' (expected sr | loss | mean-sd)"
            )))
        }
    };
    let thetas = table::parse_f64_list(&a.theta)?;
    let phis = table::parse_f64_list(&a.phi)?;
    let rhos = table::parse_f64_list(&a.rho)?;
    let rows = limit_grid(kind, &thetas, &phis, &rhos, a.sigma)?;
    let rendered = table::render_limits(&rows, kind);
    let manifest = json!({
        "command": "limits",
        "theorem": theorem,
        "theta": thetas,
        "phi": phis,
        "rho": rhos,
        "sigma": a.sigma,
    });
    emit(&rendered, &a.out, &a.manifest, manifest)
}

/// Parse a simulate config file into a [`SweepConfig`].
pub fn parse_sweep_config(text: &str) -> Result<SweepConfig> {
    let kv = table::parse_kv(text)?;
    let t: usize = table::kv_required(&kv, "t")?
        .parse()
        .map_err(|_| Error::Schema("config key 't' must be an integer".into()))?;
    let n_list = match table::kv_required(&kv, "n_list")? {
        "paper" => scenario_n_grid(),
        spec => table::parse_usize_list(spec)?,
    };
    let phi_list = table::parse_phi_list(table::kv_required(&kv, "phi_list")?, t)?;
    let theta_raw = table::kv_required(&kv, "theta")?;
    let theta_of_n = if theta_raw == "schedule" {
        ThetaOfN::Schedule
    } else {
        ThetaOfN::Constant(theta_raw.parse().map_err(|_| {
            Error::Schema("config key 'theta' must be a number or 'schedule'".into())
        })?)
    };
    let reps: usize = table::kv_required(&kv, "reps")?
        .parse()
        .map_err(|_| Error::Schema("config key 'reps' must be an integer".into()))?;
    let seed: u64 = table::kv_required(&kv, "seed")?
        .parse()
        .map_err(|_| Error::Schema("config key 'seed' must be an integer".into()))?;
    let sigma: f64 = kv
        .get("sigma")
        .map(|s| s.parse())
        .transpose()
        .map_err(|_| Error::Schema("config key 'sigma' must be a number".into()))?
        .unwrap_or(1.0);
    let noise = match kv.get("noise").map(String::as_str) {
        None | Some("gaussian") => NoiseKind::Gaussian,
        Some("student_t8") => NoiseKind::StudentT8,
        Some(other) => {
            return Err(Error::Schema(format!(
                "config key 'noise' must be gaussian | student_t8, got '{other}'"
            )))
        }
    };
    let redraw_loadings = match kv.get("redraw_loadings").map(String::as_str) {
        None | Some("false") => false,
        Some("true") => true,
        Some(other) => {
            return Err(Error::Schema(format!(
                "config key 'redraw_loadings' must be true | false, got '{other}'"
            )))
        }
    };
    Ok(SweepConfig {
        t,
        n_list,
        phi_list,
        theta_of_n,
        reps,
        seed,
        sigma,
        noise,
        redraw_loadings,
    })
}

fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.config)?;
    let cfg = parse_sweep_config(&text)?;
    let rows = run_sweep(&cfg)?;
    let rendered = table::render_sweep(&rows);
    let manifest = json!({
        "command": "simulate",
        "config_path": a.config,
        "resolved_config": &cfg,
    });
    emit(&rendered, &a.out, &a.manifest, manifest)
}

/// Parse a backtest config file into a [`BacktestConfig`].
pub fn parse_backtest_config(text: &str) -> Result<BacktestConfig> {
    let kv = table::parse_kv(text)?;
    let parse_f = |key: &str, default: Option<f64>| -> Result<f64> {
        match kv.get(key) {
            Some(v) => v
                .parse()
                .map_err(|_| Error::Schema(format!("config key '{key}' must be a number"))),
            None => default
                .ok_or_else(|| Error::Schema(format!("missing required config key '{key}'"))),
        }
    };
    let window: usize = table::kv_required(&kv, "window")?
        .parse()
        .map_err(|_| Error::Schema("config key 'window' must be an integer".into()))?;
    let n_list = table::parse_usize_list(table::kv_required(&kv, "n_list")?)?;
    let reps: usize = table::kv_required(&kv, "reps")?
        .parse()
        .map_err(|_| Error::Schema("config key 'reps' must be an integer".into()))?;
    let seed: u64 = table::kv_required(&kv, "seed")?
        .parse()
        .map_err(|_| Error::Schema("config key 'seed' must be an integer".into()))?;
    let insample = match kv.get("insample").map(String::as_str) {
        None | Some("per_window") => InsampleMode::PerWindow,
        Some("full_sample") => InsampleMode::FullSample,
        Some(other) => {
            return Err(Error::Schema(format!(
                "config key 'insample' must be per_window | full_sample, got '{other}'"
            )))
        }
    };
    Ok(BacktestConfig {
        window,
        n_list,
        sigma: parse_f("sigma", Some(0.03))?,
        gamma: parse_f("gamma", Some(3.0))?,
        reps,
        seed,
        periods_per_year: parse_f("periods_per_year", Some(12.0))?,
        insample,
    })
}

fn cmd_backtest(a: &BacktestArgs) -> Result<()> {
    let cfg = parse_backtest_config(&std::fs::read_to_string(&a.config)?)?;
    let returns = ReturnPanel::load(&a.returns)?;
    let market = match &a.market {
        Some(path) => Some(parse_market_series(
            &std::fs::read_to_string(path)?,
            returns.periods(),
        )?),
        None => None,
    };
    let assets: ConstructedAssets = match (&a.characteristics, &a.ranking) {
        (Some(cpath), Some(rpath)) => {
            let panel = CharacteristicPanel::from_tables(
                &returns,
                &std::fs::read_to_string(cpath)?,
                &std::fs::read_to_string(rpath)?,
                market,
            )?;
            build_sorted_portfolios(&panel, a.top_m, a.groups)?
        }
        _ => {
            let mut assets = ConstructedAssets::from(&returns);
            assets.market_excess = market;
            assets
        }
    };
    let mut report = rolling_backtest(&assets, &cfg)?;
    if a.annualize {
        for row in &mut report.rows {
            row.mean = annualize(&row.mean, cfg.periods_per_year);
            row.sd = annualize(&row.sd, cfg.periods_per_year);
        }
    }
    let rendered = table::render_backtest(&report);
    let manifest = json!({
        "command": "backtest",
        "returns_path": a.returns,
        "characteristics_path": a.characteristics,
        "ranking_path": a.ranking,
        "market_path": a.market,
        "top_m": a.top_m,
        "groups": a.groups,
        "annualize": a.annualize,
        "market_proxy_used": report.market_proxy_used,
        "resolved_config": &cfg,
    });
    emit(&rendered, &a.out, &a.manifest, manifest)
}

fn cmd_calibrate(a: &CalibrateArgs) -> Result<()> {
    let observed = parse_observations(&std::fs::read_to_string(&a.input)?)?;
    let unit = match a.unit.as_str() {
        "period" => SharpeUnit::PerPeriod,
        "annual" => SharpeUnit::Annualized {
            periods_per_year: a.periods_per_year,
        },
        other => {
            return Err(Error::Invalid(format!(
                "unknown unit '{other}' (expected period | annual)"
            )))
        }
    };
    let fit = fit_theta_curve(
        &observed,
        &FitOptions {
            window: a.window,
            phi: PhiInput::Single(a.phi),
            sigma: a.sigma,
            unit,
            weighted: a.weighted,
        },
    )?;
    let rendered = table::render_calibration(&fit);
    let manifest = json!({
        "command": "calibrate",
        "input_path": a.input,
        "window": a.window,
        "phi": a.phi,
        "unit": a.unit,
        "periods_per_year": a.periods_per_year,
        "sigma": a.sigma,
        "weighted": a.weighted,
        "fitted": {
            "sqrt_theta1": fit.model.sqrt_theta1,
            "sqrt_theta_bar": fit.model.sqrt_theta_bar,
            "lambda_speed": fit.model.lambda_speed,
            "sse": fit.sse,
            "converged": fit.converged,
        },
    });
    emit(&rendered, &a.out, &a.manifest, manifest)
}

fn parse_spike(spec: &str) -> Result<(f64, f64, f64)> {
    let parts = table::parse_f64_list(spec)?;
    if parts.len() != 3 {
        return Err(Error::Invalid(
            "spike must be sigma_f2,b_norm2,sigma_eps2".into(),
        ));
    }
    Ok((parts[0], parts[1], parts[2]))
}

fn cmd_mp(a: &MpArgs) -> Result<()> {
    let rhos = table::parse_f64_list(&a.rho)?;
    let spike = a.spike.as_deref().map(parse_spike).transpose()?;
    let mut rendered = table::render_mp(&rhos, spike)?;
    if a.points > 0 {
        rendered.push('\n');
        rendered.push_str(&table::render_mp_density(&rhos, a.points));
    }
    let manifest = json!({
        "command": "mp",
        "rho": rhos,
        "points": a.points,
        "spike": a.spike,
    });
    emit(&rendered, &a.out, &a.manifest, manifest)
}

fn parse_atoms(spec: &str) -> Result<SpectralMeasure> {
    let atoms: Result<Vec<(f64, f64)>> = spec
        .split(',')
        .map(|pair| {
            let (t, p) = pair.split_once(':').ok_or_else(|| {
                Error::Invalid(format!("atom '{pair}' must be tau:weight"))
            })?;
            let tau: f64 = t
                .trim()
                .parse()
                .map_err(|_| Error::Invalid(format!("bad atom location '{t}'")))?;
            let w: f64 = p
                .trim()
                .parse()
                .map_err(|_| Error::Invalid(format!("bad atom weight '{p}'")))?;
            Ok((tau, w))
        })
        .collect();
    SpectralMeasure::new(atoms?)
}

fn cmd_ridge(a: &RidgeArgs) -> Result<()> {
    let lambdas = table::parse_f64_list(&a.lambda)?;
    let h = parse_atoms(&a.h_atoms)?;
    let g = parse_atoms(&a.g_atoms)?;
    let mut rows = Vec::with_capacity(lambdas.len());
    for &lambda in &lambdas {
        let lim = asymptotics::ridge_limits(&RidgeInputs {
            h: h.clone(),
            g: g.clone(),
            lambda,
            rho: a.rho,
            xi2: a.xi2,
            theta_tilde: a.theta,
            sigma: a.sigma,
        })?;
        rows.push((lambda, lim));
    }
    let rendered = table::render_ridge(&rows);
    let manifest = json!({
        "command": "ridge",
        "lambda": lambdas,
        "rho": a.rho,
        "xi2": a.xi2,
        "theta": a.theta,
        "sigma": a.sigma,
        "h_atoms": a.h_atoms,
        "g_atoms": a.g_atoms,
    });
    emit(&rendered, &a.out, &a.manifest, manifest)
}

//! Fit the clairvoyant Sharpe curve `sqrt(theta(N))` to an observed
//! out-of-sample Sharpe-vs-N curve through the single-factor Sharpe limit.

use serde::{Deserialize, Serialize};

use crate::asymptotics::{sr_limit_factor, LimitInputs};
use crate::error::{Error, Result};
use crate::moments::RHO_ONE_WINDOW;
use crate::optim::nelder_mead;

/// Exponential saturation model of the clairvoyant Sharpe ratio:
/// `sqrt(theta(N)) = sqrt(theta1) e^{-lambda (N-1)} + sqrt(theta_bar) (1 - e^{-lambda (N-1)})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaCurveModel {
    /// Sharpe ratio of a single asset.
    pub sqrt_theta1: f64,
    /// Upper bound of the clairvoyant Sharpe ratio.
    pub sqrt_theta_bar: f64,
    /// Exponential saturation speed per asset.
    pub lambda_speed: f64,
}

impl ThetaCurveModel {
    pub fn new(sqrt_theta1: f64, sqrt_theta_bar: f64, lambda_speed: f64) -> Result<Self> {
        if !(sqrt_theta1 > 0.0 && sqrt_theta_bar > 0.0 && lambda_speed > 0.0) {
            return Err(Error::Invalid(
                "theta-curve parameters must all be positive".into(),
            ));
        }
        if sqrt_theta_bar < sqrt_theta1 {
            return Err(Error::Invalid(
                "sqrt_theta_bar must be >= sqrt_theta1 (non-decreasing curve)".into(),
            ));
        }
        Ok(Self {
            sqrt_theta1,
            sqrt_theta_bar,
            lambda_speed,
        })
    }
}

/// Evaluate `sqrt(theta(N))` under the model.
pub fn theta_curve(model: &ThetaCurveModel, n: f64) -> f64 {
    let decay = (-model.lambda_speed * (n - 1.0)).exp();
    model.sqrt_theta1 * decay + model.sqrt_theta_bar * (1.0 - decay)
}

/// Unit the observed Sharpe ratios are quoted in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SharpeUnit {
    PerPeriod,
    /// Annualized with the given periods per year; converted internally by
    /// `1/sqrt(periods_per_year)`.
    Annualized { periods_per_year: f64 },
}

impl SharpeUnit {
    fn to_per_period(&self, sr: f64) -> f64 {
        match self {
            SharpeUnit::PerPeriod => sr,
            SharpeUnit::Annualized { periods_per_year } => sr / periods_per_year.sqrt(),
        }
    }

    fn from_per_period(&self, sr: f64) -> f64 {
        match self {
            SharpeUnit::PerPeriod => sr,
            SharpeUnit::Annualized { periods_per_year } => sr * periods_per_year.sqrt(),
        }
    }
}

/// The factor strength fed to the Sharpe limit: one value for every N, or a
/// per-N table (nearest match wins on lookup).
#[derive(Debug, Clone)]
pub enum PhiInput {
    Single(f64),
    PerN(Vec<(f64, f64)>),
}

impl PhiInput {
    fn at(&self, n: f64) -> f64 {
        match self {
            PhiInput::Single(p) => *p,
            PhiInput::PerN(tbl) => {
                tbl.iter()
                    .min_by(|a, b| {
                        (a.0 - n).abs().partial_cmp(&(b.0 - n).abs()).unwrap()
                    })
                    .map(|&(_, p)| p)
                    .unwrap_or(0.0)
            }
        }
    }
}

/// Options for the curve fit.
#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Training-window length the observed curve was produced with.
    pub window: usize,
    pub phi: PhiInput,
    pub sigma: f64,
    pub unit: SharpeUnit,
    /// Weight squared residuals by `1/se^2` when standard errors accompany
    /// the observations.
    pub weighted: bool,
}

/// One fitted point.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FitPoint {
    pub n: f64,
    pub observed_sr: f64,
    pub fitted_sr: f64,
}

/// Result of the calibration fit.
#[derive(Debug, Clone)]
pub struct CalibrationFit {
    pub model: ThetaCurveModel,
    /// Sum of squared residuals in the input unit.
    pub sse: f64,
    pub points: Vec<FitPoint>,
    pub converged: bool,
    /// Points discarded because N equalled the window (rho = 1).
    pub dropped_points: usize,
}

/// Sharpe limit implied by the curve model at asset count `n`.
fn implied_sr(model: &ThetaCurveModel, n: f64, window: f64, phi: f64, sigma: f64) -> Result<f64> {
    let sqrt_theta = theta_curve(model, n);
    let inp = LimitInputs::new(sqrt_theta * sqrt_theta, phi, n / window, sigma)?;
    Ok(sr_limit_factor(&inp))
}

/// Fit the theta-curve parameters by minimizing the squared gap between the
/// observed Sharpe curve and the limit implied through the factor-model
/// Sharpe formula: a coarse log-grid scan followed by Nelder-Mead
/// refinement of the best candidates.
pub fn fit_theta_curve(
    observed: &[(f64, f64, Option<f64>)],
    opts: &FitOptions,
) -> Result<CalibrationFit> {
    if opts.window < 2 {
        return Err(Error::Invalid("window must be >= 2".into()));
    }
    if !(opts.sigma > 0.0) {
        return Err(Error::Invalid("sigma must be positive".into()));
    }
    let window = opts.window as f64;
    let mut pts: Vec<(f64, f64, f64)> = Vec::new(); // (n, sr_pp, weight)
    let mut dropped = 0;
    for &(n, sr, se) in observed {
        if !(n >= 1.0) || !sr.is_finite() {
            return Err(Error::Invalid(format!("bad observation (N = {n}, SR = {sr})")));
        }
        if (n / window - 1.0).abs() < RHO_ONE_WINDOW {
            dropped += 1;
            continue;
        }
        let w = if opts.weighted {
            match se {
                Some(s) if s > 0.0 => {
                    let s_pp = opts.unit.to_per_period(s);
                    1.0 / (s_pp * s_pp)
                }
                _ => 1.0,
            }
        } else {
            1.0
        };
        pts.push((n, opts.unit.to_per_period(sr), w));
    }
    if pts.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "need at least 4 usable (N, SR) points, got {}",
            pts.len()
        )));
    }

    // Objective over log-parameters (a, g, l):
    // sqrt_theta1 = e^a, sqrt_theta_bar = e^a + e^g, lambda = e^l.
    // The gap parameterization keeps the curve monotone non-decreasing.
    let eval = |x: &[f64]| -> f64 {
        let model = ThetaCurveModel {
            sqrt_theta1: x[0].exp(),
            sqrt_theta_bar: x[0].exp() + x[1].exp(),
            lambda_speed: x[2].exp(),
        };
        let mut acc = 0.0;
        for &(n, sr, w) in &pts {
            match implied_sr(&model, n, window, opts.phi.at(n), opts.sigma) {
                Ok(fit) => acc += w * (sr - fit).powi(2),
                Err(_) => acc += 1e6,
            }
        }
        acc
    };

    // Coarse grid in log space, spanning the plausible Sharpe range.
    let sr_cap = pts
        .iter()
        .map(|p| p.1.abs())
        .fold(0.01f64, f64::max)
        .max(0.05);
    let t1_grid: Vec<f64> = log_space(0.02, sr_cap * 3.0, 8);
    let gap_grid: Vec<f64> = log_space(1e-4, sr_cap * 4.0, 8);
    let lam_grid: Vec<f64> = log_space(1e-4, 1.0, 10);
    let mut candidates: Vec<(f64, [f64; 3])> = Vec::new();
    for &t1 in &t1_grid {
        for &gap in &gap_grid {
            for &lam in &lam_grid {
                let x = [t1.ln(), gap.ln(), lam.ln()];
                candidates.push((eval(&x), x));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    let grid_best = candidates[0].0;

    let mut best: Option<(f64, Vec<f64>, bool)> = None;
    for (_, start) in candidates.iter().take(5) {
        let r = nelder_mead(eval, start, &[0.3, 0.3, 0.3], 2000, 1e-10);
        if best.as_ref().map_or(true, |(fx, _, _)| r.fx < *fx) {
            best = Some((r.fx, r.x, r.converged));
        }
    }
    let (fx, x, converged) = best.unwrap();
    debug_assert!(fx <= grid_best + 1e-12);

    let model = ThetaCurveModel::new(x[0].exp(), x[0].exp() + x[1].exp(), x[2].exp())?;
    let mut points = Vec::with_capacity(pts.len());
    let mut sse_unit = 0.0;
    for &(n, sr_pp, _) in &pts {
        let fitted_pp = implied_sr(&model, n, window, opts.phi.at(n), opts.sigma)?;
        let obs_u = opts.unit.from_per_period(sr_pp);
        let fit_u = opts.unit.from_per_period(fitted_pp);
        sse_unit += (obs_u - fit_u).powi(2);
        points.push(FitPoint {
            n,
            observed_sr: obs_u,
            fitted_sr: fit_u,
        });
    }
    Ok(CalibrationFit {
        model,
        sse: sse_unit,
        points,
        converged,
        dropped_points: dropped,
    })
}

fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (l, h) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (l + (h - l) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Parse a delimited `N,SR[,SE]` observation table. A header line is
/// optional and detected by a non-numeric first field.
pub fn parse_observations(text: &str) -> Result<Vec<(f64, f64, Option<f64>)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let lin = raw.trim();
        if lin.is_empty() {
            continue;
        }
        let delim = crate::panel::sniff_delimiter(lin);
        let parts: Vec<&str> = lin.split(delim).map(str::trim).collect();
        if i == 0 && parts[0].parse::<f64>().is_err() {
            continue; // header
        }
        if parts.len() < 2 || parts.len() > 3 {
            return Err(Error::Schema(format!(
                "observation line {}: expected 'N,SR[,SE]', got '{raw}'",
                i + 1
            )));
        }
        let n: f64 = parts[0].parse().map_err(|_| {
            Error::Schema(format!("observation line {}: bad N '{}'", i + 1, parts[0]))
        })?;
        let sr: f64 = parts[1].parse().map_err(|_| {
            Error::Schema(format!("observation line {}: bad SR '{}'", i + 1, parts[1]))
        })?;
        let se = match parts.get(2) {
            Some(s) if !s.is_empty() => Some(s.parse().map_err(|_| {
                Error::Schema(format!("observation line {}: bad SE '{s}'", i + 1))
            })?),
            _ => None,
        };
        out.push((n, sr, se));
    }
    Ok(out)
}

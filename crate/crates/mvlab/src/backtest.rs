//! Characteristic-sorted test-asset construction and the rolling-window
//! out-of-sample evaluation protocol, with the usual metric table
//! (Sharpe, certainty equivalent, CAPM alpha, minimum-variance and 1/N
//! references, in-sample Sharpe).

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::LowRankMoments;
use crate::panel::ReturnPanel;
use crate::rng::derive_rng;
use crate::weights::{
    minvar_weights_low_rank, pseudoinverse_weights_from_moments, PhiChoice, PsinvOptions,
};

/// Stock-level inputs for test-asset construction: a T x S return matrix,
/// per-period characteristic values (missing allowed), ranking weights
/// (e.g. market caps) used to pick the top-M universe, and optionally a
/// market excess-return series for CAPM alphas.
#[derive(Debug, Clone)]
pub struct CharacteristicPanel {
    pub periods: Vec<String>,
    pub stocks: Vec<String>,
    /// T x S stock returns.
    pub returns: DMatrix<f64>,
    /// Characteristic name plus T x S values in row-major layout.
    pub characteristics: Vec<(String, Vec<Option<f64>>)>,
    /// T x S ranking weights, row-major; missing excludes the stock from
    /// that period's universe.
    pub ranking_weights: Vec<Option<f64>>,
    pub market_excess: Option<Vec<f64>>,
}

impl CharacteristicPanel {
    pub fn validate(&self) -> Result<()> {
        let t = self.periods.len();
        let s = self.stocks.len();
        if self.returns.nrows() != t || self.returns.ncols() != s {
            return Err(Error::Invalid(format!(
                "returns are {}x{}, expected {t}x{s}",
                self.returns.nrows(),
                self.returns.ncols()
            )));
        }
        if self.ranking_weights.len() != t * s {
            return Err(Error::Invalid("ranking weights shape mismatch".into()));
        }
        for (name, vals) in &self.characteristics {
            if vals.len() != t * s {
                return Err(Error::Invalid(format!(
                    "characteristic '{name}' shape mismatch"
                )));
            }
        }
        if let Some(mkt) = &self.market_excess {
            if mkt.len() != t {
                return Err(Error::Invalid("market series length mismatch".into()));
            }
        }
        Ok(())
    }

    fn rank_weight(&self, t: usize, s: usize) -> Option<f64> {
        self.ranking_weights[t * self.stocks.len() + s]
    }

    /// Assemble a characteristic panel from a stock-return panel plus
    /// long-format characteristic and ranking-weight tables.
    ///
    /// Characteristics: `period,stock,characteristic,value` rows (header
    /// required). Ranking weights: `period,stock,weight`. Unknown periods
    /// or stocks are schema errors; absent combinations stay missing.
    pub fn from_tables(
        returns: &ReturnPanel,
        characteristics_text: &str,
        ranking_text: &str,
        market_excess: Option<Vec<f64>>,
    ) -> Result<Self> {
        let t_len = returns.n_periods();
        let s_len = returns.n_assets();
        let period_idx: std::collections::HashMap<&str, usize> = returns
            .periods()
            .iter()
            .enumerate()
            .map(|(i, p)| (p.as_str(), i))
            .collect();
        let stock_idx: std::collections::HashMap<&str, usize> = returns
            .assets()
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();

        let mut characteristics: Vec<(String, Vec<Option<f64>>)> = Vec::new();
        let mut char_pos: std::collections::HashMap<String, usize> =
            std::collections::HashMap::new();
        for (lineno, row) in long_rows(characteristics_text, 4, "characteristic file")? {
            let t = *period_idx.get(row[0]).ok_or_else(|| {
                Error::Schema(format!(
                    "characteristic file line {lineno}: unknown period '{}'",
                    row[0]
                ))
            })?;
            let s = *stock_idx.get(row[1]).ok_or_else(|| {
                Error::Schema(format!(
                    "characteristic file line {lineno}: unknown stock '{}'",
                    row[1]
                ))
            })?;
            let value: f64 = row[3].parse().map_err(|_| {
                Error::Schema(format!(
                    "characteristic file line {lineno}: bad value '{}'",
                    row[3]
                ))
            })?;
            let ci = *char_pos.entry(row[2].to_string()).or_insert_with(|| {
                characteristics.push((row[2].to_string(), vec![None; t_len * s_len]));
                characteristics.len() - 1
            });
            characteristics[ci].1[t * s_len + s] = Some(value);
        }

        let mut ranking_weights = vec![None; t_len * s_len];
        for (lineno, row) in long_rows(ranking_text, 3, "ranking file")? {
            let t = *period_idx.get(row[0]).ok_or_else(|| {
                Error::Schema(format!("ranking file line {lineno}: unknown period '{}'", row[0]))
            })?;
            let s = *stock_idx.get(row[1]).ok_or_else(|| {
                Error::Schema(format!("ranking file line {lineno}: unknown stock '{}'", row[1]))
            })?;
            let w: f64 = row[2].parse().map_err(|_| {
                Error::Schema(format!("ranking file line {lineno}: bad weight '{}'", row[2]))
            })?;
            ranking_weights[t * s_len + s] = Some(w);
        }

        let panel = CharacteristicPanel {
            periods: returns.periods().to_vec(),
            stocks: returns.assets().to_vec(),
            returns: returns.values().clone(),
            characteristics,
            ranking_weights,
            market_excess,
        };
        panel.validate()?;
        Ok(panel)
    }
}

/// Split a long-format table into trimmed rows, skipping the header line.
fn long_rows<'a>(
    text: &'a str,
    fields: usize,
    what: &str,
) -> Result<Vec<(usize, Vec<&'a str>)>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Schema(format!("{what} is empty")))?;
    let delim = crate::panel::sniff_delimiter(header);
    let mut rows = Vec::new();
    for (i, lin) in lines {
        let parts: Vec<&str> = lin.split(delim).map(str::trim).collect();
        if parts.len() != fields {
            return Err(Error::Schema(format!(
                "{what} line {}: expected {fields} fields, got {}",
                i + 1,
                parts.len()
            )));
        }
        rows.push((i + 1, parts));
    }
    Ok(rows)
}

/// Parse a `period,value` market excess-return series and align it with a
/// panel's period labels.
pub fn parse_market_series(text: &str, periods: &[String]) -> Result<Vec<f64>> {
    let rows = long_rows(text, 2, "market file")?;
    let mut by_period: std::collections::HashMap<&str, f64> = std::collections::HashMap::new();
    for (lineno, row) in rows {
        let v: f64 = row[1]
            .parse()
            .map_err(|_| Error::Schema(format!("market file line {lineno}: bad value '{}'", row[1])))?;
        by_period.insert(row[0], v);
    }
    periods
        .iter()
        .map(|p| {
            by_period
                .get(p.as_str())
                .copied()
                .ok_or_else(|| Error::Schema(format!("market file missing period '{p}'")))
        })
        .collect()
}

/// A constructed test-asset panel that may carry missing entries: a
/// period/characteristic cell with too few eligible stocks leaves that
/// characteristic's group assets missing for the period.
#[derive(Debug, Clone)]
pub struct ConstructedAssets {
    pub periods: Vec<String>,
    pub assets: Vec<String>,
    /// T x A values, row-major; `None` marks a missing observation.
    pub values: Vec<Option<f64>>,
    pub market_excess: Option<Vec<f64>>,
}

impl ConstructedAssets {
    pub fn n_periods(&self) -> usize {
        self.periods.len()
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    pub fn value(&self, t: usize, a: usize) -> Option<f64> {
        self.values[t * self.assets.len() + a]
    }

    /// Asset indices with no missing period; only these enter selection
    /// universes.
    pub fn complete_assets(&self) -> Vec<usize> {
        (0..self.n_assets())
            .filter(|&a| (0..self.n_periods()).all(|t| self.value(t, a).is_some()))
            .collect()
    }

    /// Strict panel conversion; errors if anything is missing.
    pub fn to_return_panel(&self) -> Result<ReturnPanel> {
        let t = self.n_periods();
        let a = self.n_assets();
        let mut m = DMatrix::zeros(t, a);
        for i in 0..t {
            for j in 0..a {
                m[(i, j)] = self.value(i, j).ok_or_else(|| {
                    Error::Invalid(format!(
                        "missing value at period '{}', asset '{}'",
                        self.periods[i], self.assets[j]
                    ))
                })?;
            }
        }
        ReturnPanel::new(self.periods.clone(), self.assets.clone(), m)
    }
}

impl From<&ReturnPanel> for ConstructedAssets {
    fn from(p: &ReturnPanel) -> Self {
        ConstructedAssets {
            periods: p.periods().to_vec(),
            assets: p.assets().to_vec(),
            values: p.values().transpose().iter().copied().map(Some).collect(),
            market_excess: None,
        }
    }
}

/// Build characteristic-sorted group portfolios. Per period and
/// characteristic: restrict to the top `top_m` stocks by ranking weight,
/// drop stocks missing that characteristic, sort ascending by its value,
/// split sequentially into `groups` blocks (remainder to the earliest
/// blocks), and average returns inside each block.
pub fn build_sorted_portfolios(
    panel: &CharacteristicPanel,
    top_m: usize,
    groups: usize,
) -> Result<ConstructedAssets> {
    panel.validate()?;
    if groups < 2 {
        return Err(Error::Invalid(format!("need at least 2 groups, got {groups}")));
    }
    if top_m < groups {
        return Err(Error::Invalid(format!(
            "top_m = {top_m} cannot be smaller than groups = {groups}"
        )));
    }
    let t_len = panel.periods.len();
    let s_len = panel.stocks.len();
    let a_len = panel.characteristics.len() * groups;
    let mut assets = Vec::with_capacity(a_len);
    for (name, _) in &panel.characteristics {
        for g in 1..=groups {
            assets.push(format!("{name}:g{g}"));
        }
    }
    let mut values: Vec<Option<f64>> = vec![None; t_len * a_len];

    for t in 0..t_len {
        // top-M universe by ranking weight (descending, index-stable)
        let mut ranked: Vec<(usize, f64)> = (0..s_len)
            .filter_map(|s| panel.rank_weight(t, s).map(|w| (s, w)))
            .collect();
        ranked.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.0.cmp(&b.0))
        });
        let universe: Vec<usize> = ranked.iter().take(top_m).map(|&(s, _)| s).collect();

        for (ci, (_, vals)) in panel.characteristics.iter().enumerate() {
            let mut eligible: Vec<(usize, f64)> = universe
                .iter()
                .filter_map(|&s| vals[t * s_len + s].map(|v| (s, v)))
                .collect();
            if eligible.len() < groups {
                continue; // leaves this characteristic's assets missing at t
            }
            eligible.sort_by(|a, b| {
                a.1.partial_cmp(&b.1)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.0.cmp(&b.0))
            });
            let base = eligible.len() / groups;
            let rem = eligible.len() % groups;
            let mut start = 0;
            for g in 0..groups {
                let size = base + usize::from(g < rem);
                let members = &eligible[start..start + size];
                start += size;
                let avg = members
                    .iter()
                    .map(|&(s, _)| panel.returns[(t, s)])
                    .sum::<f64>()
                    / size as f64;
                values[t * a_len + ci * groups + g] = Some(avg);
            }
        }
    }
    Ok(ConstructedAssets {
        periods: panel.periods.clone(),
        assets,
        values,
        market_excess: panel.market_excess.clone(),
    })
}

/// Which moments feed the reported in-sample Sharpe ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InsampleMode {
    /// Per-window training moments, averaged across investment dates.
    #[default]
    PerWindow,
    /// Moments of the full sample, once per selection.
    FullSample,
}

/// Rolling-backtest configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BacktestConfig {
    /// Training window length.
    pub window: usize,
    /// Selection sizes to evaluate.
    pub n_list: Vec<usize>,
    /// Risk budget for the pseudoinverse weights.
    pub sigma: f64,
    /// CER risk aversion.
    pub gamma: f64,
    /// Random-selection replications per N.
    pub reps: usize,
    pub seed: u64,
    pub periods_per_year: f64,
    #[serde(default)]
    pub insample: InsampleMode,
}

impl BacktestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < 2 {
            return Err(Error::Invalid(format!(
                "window must be >= 2, got {}",
                self.window
            )));
        }
        if self.reps < 1 {
            return Err(Error::Invalid("reps must be >= 1".into()));
        }
        if self.n_list.is_empty() {
            return Err(Error::Invalid("n_list must be nonempty".into()));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::Invalid("sigma must be positive".into()));
        }
        if !(self.periods_per_year >= 1.0) {
            return Err(Error::Invalid("periods_per_year must be >= 1".into()));
        }
        Ok(())
    }
}

/// One row of the metric table, per-period units unless annualized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub n: usize,
    pub sr: f64,
    pub cer: f64,
    pub avg: f64,
    pub std: f64,
    pub capm_alpha: f64,
    pub minvar_sr: f64,
    pub minvar_cer: f64,
    pub ew_sr: f64,
    pub ew_cer: f64,
    pub insample_sr: f64,
}

/// Annualize a metrics row: Sharpe columns scale by `sqrt(p)`, average-like
/// columns (avg, cer, alpha) by `p`, the SD by `sqrt(p)`.
pub fn annualize(row: &MetricsRow, periods_per_year: f64) -> MetricsRow {
    let sq = periods_per_year.sqrt();
    MetricsRow {
        n: row.n,
        sr: row.sr * sq,
        cer: row.cer * periods_per_year,
        avg: row.avg * periods_per_year,
        std: row.std * sq,
        capm_alpha: row.capm_alpha * periods_per_year,
        minvar_sr: row.minvar_sr * sq,
        minvar_cer: row.minvar_cer * periods_per_year,
        ew_sr: row.ew_sr * sq,
        ew_cer: row.ew_cer * periods_per_year,
        insample_sr: row.insample_sr * sq,
    }
}

/// Aggregated backtest output for one N: replication mean, replication SD,
/// and diagnostic counts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BacktestRow {
    pub mean: MetricsRow,
    pub sd: MetricsRow,
    /// Windows where the theta branch was non-positive and the in-sample
    /// scale fallback engaged, summed over replications.
    pub fallback_windows: usize,
    /// Windows with a degenerate covariance (weights forced to zero).
    pub degenerate_windows: usize,
    pub reps: usize,
}

/// Full backtest report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BacktestReport {
    pub rows: Vec<BacktestRow>,
    /// True when no market series was supplied and the equal-weighted
    /// average of all complete assets proxied it in the alpha regression.
    pub market_proxy_used: bool,
}

/// Weights fitted on one training window.
#[derive(Debug, Clone)]
pub struct WindowWeights {
    pub psinv: DVector<f64>,
    pub minvar: DVector<f64>,
    /// In-sample Sharpe of the pseudoinverse strategy, `sqrt(theta_s)`.
    pub insample_sr: f64,
    pub used_fallback: bool,
    pub degenerate: bool,
}

/// Fit all strategy weights on a training window. Degenerate covariance
/// zeroes the estimated strategies and flags the window.
pub fn window_weights(window_values: &DMatrix<f64>, sigma: f64) -> Result<WindowWeights> {
    let n = window_values.ncols();
    match LowRankMoments::from_values(window_values) {
        Ok(lr) => {
            let fit = pseudoinverse_weights_from_moments(
                &lr,
                &PsinvOptions {
                    sigma,
                    phi: PhiChoice::Estimated,
                    fallback: true,
                },
            )?;
            let minvar = minvar_weights_low_rank(&lr)?;
            Ok(WindowWeights {
                psinv: fit.weights.w,
                minvar: minvar.w,
                insample_sr: fit.theta_s.max(0.0).sqrt(),
                used_fallback: fit.used_fallback,
                degenerate: false,
            })
        }
        Err(Error::DegenerateCovariance(_)) => Ok(WindowWeights {
            psinv: DVector::zeros(n),
            minvar: DVector::zeros(n),
            insample_sr: 0.0,
            used_fallback: false,
            degenerate: true,
        }),
        Err(e) => Err(e),
    }
}

struct RepMetrics {
    row: MetricsRow,
    fallbacks: usize,
    degenerates: usize,
}

fn series_stats(series: &[f64]) -> (f64, f64) {
    let n = series.len() as f64;
    let avg = series.iter().sum::<f64>() / n;
    let var = series.iter().map(|v| (v - avg).powi(2)).sum::<f64>() / n;
    (avg, var.sqrt())
}

fn sharpe_of(avg: f64, sd: f64) -> f64 {
    if sd > 0.0 {
        avg / sd
    } else {
        0.0
    }
}

fn capm_alpha(strategy: &[f64], market: &[f64]) -> f64 {
    let n = strategy.len() as f64;
    let my = strategy.iter().sum::<f64>() / n;
    let mx = market.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (y, x) in strategy.iter().zip(market) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    let beta = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    my - beta * mx
}

fn run_replication(
    assets: &ConstructedAssets,
    cfg: &BacktestConfig,
    eligible: &[usize],
    n: usize,
    rep: usize,
    market: &[f64],
) -> Result<RepMetrics> {
    let mut rng = derive_rng(cfg.seed, &[n as u64, rep as u64]);
    let pick = rand::seq::index::sample(&mut rng, eligible.len(), n);
    let selection: Vec<usize> = pick.iter().map(|i| eligible[i]).collect();

    let t_total = assets.n_periods();
    let window = cfg.window;
    let a_len = assets.n_assets();
    // dense matrix of the selected (complete) columns
    let mut x = DMatrix::zeros(t_total, n);
    for (j, &a) in selection.iter().enumerate() {
        for t in 0..t_total {
            x[(t, j)] = assets.values[t * a_len + a].expect("selection is complete");
        }
    }

    let n_oos = t_total - window;
    let mut r_psinv = Vec::with_capacity(n_oos);
    let mut r_minvar = Vec::with_capacity(n_oos);
    let mut r_ew = Vec::with_capacity(n_oos);
    let mut insample_acc = 0.0;
    let mut insample_cnt = 0usize;
    let mut fallbacks = 0;
    let mut degenerates = 0;

    for h in window..t_total {
        let train = x.rows(h - window, window).into_owned();
        let ww = window_weights(&train, cfg.sigma)?;
        if ww.degenerate {
            degenerates += 1;
        } else {
            insample_acc += ww.insample_sr;
            insample_cnt += 1;
            if ww.used_fallback {
                fallbacks += 1;
            }
        }
        let today = x.row(h).transpose();
        r_psinv.push(today.dot(&ww.psinv));
        r_minvar.push(today.dot(&ww.minvar));
        r_ew.push(today.sum() / n as f64);
    }

    let insample_sr = match cfg.insample {
        InsampleMode::PerWindow => {
            if insample_cnt > 0 {
                insample_acc / insample_cnt as f64
            } else {
                0.0
            }
        }
        InsampleMode::FullSample => match LowRankMoments::from_values(&x) {
            Ok(lr) => lr.theta_s().max(0.0).sqrt(),
            Err(_) => 0.0,
        },
    };

    let (avg, std) = series_stats(&r_psinv);
    let (avg_mv, std_mv) = series_stats(&r_minvar);
    let (avg_ew, std_ew) = series_stats(&r_ew);
    let half_gamma = 0.5 * cfg.gamma;
    let row = MetricsRow {
        n,
        sr: sharpe_of(avg, std),
        cer: avg - half_gamma * std * std,
        avg,
        std,
        capm_alpha: capm_alpha(&r_psinv, market),
        minvar_sr: sharpe_of(avg_mv, std_mv),
        minvar_cer: avg_mv - half_gamma * std_mv * std_mv,
        ew_sr: sharpe_of(avg_ew, std_ew),
        ew_cer: avg_ew - half_gamma * std_ew * std_ew,
        insample_sr,
    };
    Ok(RepMetrics {
        row,
        fallbacks,
        degenerates,
    })
}

/// Run the rolling backtest: for each N, `reps` seeded selections held
/// fixed across every investment date; per date, moments fit on the
/// trailing window and out-of-sample returns recorded for the
/// pseudoinverse, minimum-variance, and 1/N strategies.
pub fn rolling_backtest(
    assets: &ConstructedAssets,
    cfg: &BacktestConfig,
) -> Result<BacktestReport> {
    cfg.validate()?;
    let t_total = assets.n_periods();
    if t_total <= cfg.window {
        return Err(Error::InsufficientData(format!(
            "need more than window = {} periods, got {t_total}",
            cfg.window
        )));
    }
    let eligible = assets.complete_assets();
    if let Some(&n) = cfg.n_list.iter().find(|&&n| n > eligible.len()) {
        return Err(Error::Invalid(format!(
            "N = {n} exceeds the {} complete assets available",
            eligible.len()
        )));
    }
    if cfg.n_list.iter().any(|&n| n == 0) {
        return Err(Error::Invalid("N must be positive".into()));
    }

    // market series over the out-of-sample span, or the equal-weighted
    // average of all complete assets as a flagged proxy
    let a_len = assets.n_assets();
    let (market, proxy_used): (Vec<f64>, bool) = match &assets.market_excess {
        Some(m) => (m[cfg.window..].to_vec(), false),
        None => {
            let mut proxy = Vec::with_capacity(t_total - cfg.window);
            for t in cfg.window..t_total {
                let avg = eligible
                    .iter()
                    .map(|&a| assets.values[t * a_len + a].unwrap_or(0.0))
                    .sum::<f64>()
                    / eligible.len() as f64;
                proxy.push(avg);
            }
            (proxy, true)
        }
    };

    let jobs: Vec<(usize, usize)> = cfg
        .n_list
        .iter()
        .flat_map(|&n| (0..cfg.reps).map(move |rep| (n, rep)))
        .collect();
    let outcomes: Result<Vec<RepMetrics>> = jobs
        .par_iter()
        .map(|&(n, rep)| run_replication(assets, cfg, &eligible, n, rep, &market))
        .collect();
    let outcomes = outcomes?;

    let mut rows = Vec::with_capacity(cfg.n_list.len());
    for (i, &n) in cfg.n_list.iter().enumerate() {
        let slice = &outcomes[i * cfg.reps..(i + 1) * cfg.reps];
        let reps = cfg.reps as f64;
        let mean_of = |f: &dyn Fn(&MetricsRow) -> f64| {
            slice.iter().map(|o| f(&o.row)).sum::<f64>() / reps
        };
        let sd_of = |f: &dyn Fn(&MetricsRow) -> f64, m: f64| {
            if cfg.reps < 2 {
                0.0
            } else {
                (slice.iter().map(|o| (f(&o.row) - m).powi(2)).sum::<f64>() / (reps - 1.0))
                    .sqrt()
            }
        };
        macro_rules! agg {
            ($field:ident) => {{
                let m = mean_of(&|r: &MetricsRow| r.$field);
                (m, sd_of(&|r: &MetricsRow| r.$field, m))
            }};
        }
        let (sr, sr_sd) = agg!(sr);
        let (cer, cer_sd) = agg!(cer);
        let (avg, avg_sd) = agg!(avg);
        let (std, std_sd) = agg!(std);
        let (alpha, alpha_sd) = agg!(capm_alpha);
        let (mv_sr, mv_sr_sd) = agg!(minvar_sr);
        let (mv_cer, mv_cer_sd) = agg!(minvar_cer);
        let (ew_sr, ew_sr_sd) = agg!(ew_sr);
        let (ew_cer, ew_cer_sd) = agg!(ew_cer);
        let (ins, ins_sd) = agg!(insample_sr);
        rows.push(BacktestRow {
            mean: MetricsRow {
                n,
                sr,
                cer,
                avg,
                std,
                capm_alpha: alpha,
                minvar_sr: mv_sr,
                minvar_cer: mv_cer,
                ew_sr,
                ew_cer,
                insample_sr: ins,
            },
            sd: MetricsRow {
                n,
                sr: sr_sd,
                cer: cer_sd,
                avg: avg_sd,
                std: std_sd,
                capm_alpha: alpha_sd,
                minvar_sr: mv_sr_sd,
                minvar_cer: mv_cer_sd,
                ew_sr: ew_sr_sd,
                ew_cer: ew_cer_sd,
                insample_sr: ins_sd,
            },
            fallback_windows: slice.iter().map(|o| o.fallbacks).sum(),
            degenerate_windows: slice.iter().map(|o| o.degenerates).sum(),
            reps: cfg.reps,
        });
    }
    Ok(BacktestReport {
        rows,
        market_proxy_used: proxy_used,
    })
}

//! Delimited table rendering, key-value config parsing, and run manifests.
//! Tables are plain comma-separated text with a fixed column order and
//! shortest-round-trip float formatting, so outputs diff cleanly and
//! reproduce bit-for-bit.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::asymptotics::{LimitKind, LimitRow, RidgeLimits, ScenarioRow};
use crate::backtest::BacktestReport;
use crate::calibration::CalibrationFit;
use crate::error::{Error, Result};
use crate::montecarlo::SweepRow;

/// Shortest round-trip rendering of a float (`NaN` for missing).
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn line(fields: &[String]) -> String {
    let mut s = fields.join(",");
    s.push('\n');
    s
}

/// Sweep table: `n,phi,rho,avg_sr,se_sr,avg_loss,se_loss,asy_sr,asy_loss,fallback_count`.
pub fn render_sweep(rows: &[SweepRow]) -> String {
    let mut out =
        String::from("n,phi,rho,avg_sr,se_sr,avg_loss,se_loss,asy_sr,asy_loss,fallback_count\n");
    for r in rows {
        out.push_str(&line(&[
            r.n.to_string(),
            fmt_f64(r.phi),
            fmt_f64(r.rho_t),
            fmt_f64(r.avg_sr),
            fmt_f64(r.se_sr),
            fmt_f64(r.avg_loss),
            fmt_f64(r.se_loss),
            fmt_f64(r.asy_sr),
            fmt_f64(r.asy_loss),
            r.fallback_count.to_string(),
        ]));
    }
    out
}

/// Limit-grid table; the value column is named after the requested family.
pub fn render_limits(rows: &[LimitRow], kind: LimitKind) -> String {
    let mut out = match kind {
        LimitKind::Sharpe => String::from("theta,phi,rho,sigma,sr\n"),
        LimitKind::Loss => String::from("theta,phi,rho,sigma,loss\n"),
        LimitKind::MeanSd => String::from("theta,phi,rho,sigma,mean,sd\n"),
    };
    for r in rows {
        let mut fields = vec![
            fmt_f64(r.theta_tilde),
            fmt_f64(r.phi_tilde),
            fmt_f64(r.rho),
            fmt_f64(r.sigma),
            fmt_f64(r.value),
        ];
        if let Some(v2) = r.value2 {
            fields.push(fmt_f64(v2));
        }
        out.push_str(&line(&fields));
    }
    out
}

/// Double-ascent scenario table: `n,rho,theta,sr,loss`.
pub fn render_scenario(rows: &[ScenarioRow]) -> String {
    let mut out = String::from("n,rho,theta,sr,loss\n");
    for r in rows {
        out.push_str(&line(&[
            fmt_f64(r.n),
            fmt_f64(r.rho),
            fmt_f64(r.theta_tilde),
            fmt_f64(r.sr),
            fmt_f64(r.loss),
        ]));
    }
    out
}

/// Backtest metric table with replication-dispersion columns.
pub fn render_backtest(report: &BacktestReport) -> String {
    let mut out = String::from(
        "n,sr,cer,avg,std,capm_alpha,minvar_sr,minvar_cer,ew_sr,ew_cer,insample_sr,\
         sd_sr,sd_cer,sd_avg,sd_std,sd_capm_alpha,sd_minvar_sr,sd_minvar_cer,sd_ew_sr,\
         sd_ew_cer,sd_insample_sr,fallback_windows,degenerate_windows,reps\n",
    );
    for r in &report.rows {
        let m = &r.mean;
        let s = &r.sd;
        out.push_str(&line(&[
            m.n.to_string(),
            fmt_f64(m.sr),
            fmt_f64(m.cer),
            fmt_f64(m.avg),
            fmt_f64(m.std),
            fmt_f64(m.capm_alpha),
            fmt_f64(m.minvar_sr),
            fmt_f64(m.minvar_cer),
            fmt_f64(m.ew_sr),
            fmt_f64(m.ew_cer),
            fmt_f64(m.insample_sr),
            fmt_f64(s.sr),
            fmt_f64(s.cer),
            fmt_f64(s.avg),
            fmt_f64(s.std),
            fmt_f64(s.capm_alpha),
            fmt_f64(s.minvar_sr),
            fmt_f64(s.minvar_cer),
            fmt_f64(s.ew_sr),
            fmt_f64(s.ew_cer),
            fmt_f64(s.insample_sr),
            r.fallback_windows.to_string(),
            r.degenerate_windows.to_string(),
            r.reps.to_string(),
        ]));
    }
    out
}

/// Marchenko-Pastur summary table per rho.
pub fn render_mp(rhos: &[f64], spike: Option<(f64, f64, f64)>) -> Result<String> {
    let mut out = String::from("rho,lower_edge,upper_edge,zero_mass,smallest_nonzero_eig\n");
    for &rho in rhos {
        let (a, b) = crate::asymptotics::mp_support(rho);
        let eig = crate::asymptotics::smallest_nonzero_eig_limit(rho, spike)?;
        out.push_str(&line(&[
            fmt_f64(rho),
            fmt_f64(a),
            fmt_f64(b),
            fmt_f64(crate::asymptotics::mp_zero_mass(rho)),
            fmt_f64(eig),
        ]));
    }
    Ok(out)
}

/// Marchenko-Pastur density table over `points` abscissas per rho.
pub fn render_mp_density(rhos: &[f64], points: usize) -> String {
    let mut out = String::from("rho,x,density\n");
    for &rho in rhos {
        let (a, b) = crate::asymptotics::mp_support(rho);
        for i in 0..points {
            let x = a + (b - a) * (i as f64 + 0.5) / points as f64;
            out.push_str(&line(&[
                fmt_f64(rho),
                fmt_f64(x),
                fmt_f64(crate::asymptotics::mp_density(x, rho)),
            ]));
        }
    }
    out
}

/// Ridge limit table: one row per lambda.
pub fn render_ridge(rows: &[(f64, RidgeLimits)]) -> String {
    let mut out = String::from("lambda,m,m_prime,m1,theta1,theta2,phi1,phi2,sr,loss\n");
    for (lambda, r) in rows {
        out.push_str(&line(&[
            fmt_f64(*lambda),
            fmt_f64(r.m),
            fmt_f64(r.m_prime),
            fmt_f64(r.m1),
            fmt_f64(r.theta1),
            fmt_f64(r.theta2),
            fmt_f64(r.phi1),
            fmt_f64(r.phi2),
            fmt_f64(r.sr),
            fmt_f64(r.loss),
        ]));
    }
    out
}

/// Calibration report: fitted parameters followed by the per-N curve.
pub fn render_calibration(fit: &CalibrationFit) -> String {
    let mut out = String::new();
    out.push_str(&format!("# sqrt_theta1={}\n", fmt_f64(fit.model.sqrt_theta1)));
    out.push_str(&format!(
        "# sqrt_theta_bar={}\n",
        fmt_f64(fit.model.sqrt_theta_bar)
    ));
    out.push_str(&format!("# lambda_speed={}\n", fmt_f64(fit.model.lambda_speed)));
    out.push_str(&format!("# sse={}\n", fmt_f64(fit.sse)));
    out.push_str(&format!("# converged={}\n", fit.converged));
    out.push_str(&format!("# dropped_points={}\n", fit.dropped_points));
    out.push_str("n,observed_sr,fitted_sr,sqrt_theta\n");
    for p in &fit.points {
        out.push_str(&line(&[
            fmt_f64(p.n),
            fmt_f64(p.observed_sr),
            fmt_f64(p.fitted_sr),
            fmt_f64(crate::calibration::theta_curve(&fit.model, p.n)),
        ]));
    }
    out
}

/// Parse a `key = value` config file: one pair per line, `#` comments.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let lin = raw.split('#').next().unwrap_or("").trim();
        if lin.is_empty() {
            continue;
        }
        let (k, v) = lin.split_once('=').ok_or_else(|| {
            Error::Schema(format!("line {}: expected 'key = value', got '{raw}'", i + 1))
        })?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

pub fn kv_required<'a>(map: &'a BTreeMap<String, String>, key: &str) -> Result<&'a str> {
    map.get(key)
        .map(|s| s.as_str())
        .ok_or_else(|| Error::Schema(format!("missing required config key '{key}'")))
}

/// Parse a list spec: either comma-separated values or a `lo:hi:count`
/// inclusive linear range.
pub fn parse_f64_list(spec: &str) -> Result<Vec<f64>> {
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Invalid(format!(
                "range spec must be lo:hi:count, got '{spec}'"
            )));
        }
        let lo: f64 = parse_num(parts[0])?;
        let hi: f64 = parse_num(parts[1])?;
        let count: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| Error::Invalid(format!("bad count in '{spec}'")))?;
        if count < 2 {
            return Err(Error::Invalid("range count must be >= 2".into()));
        }
        Ok((0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect())
    } else {
        spec.split(',').map(parse_num).collect()
    }
}

fn parse_num(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Invalid(format!("cannot parse '{s}' as a number")))
}

pub fn parse_usize_list(spec: &str) -> Result<Vec<usize>> {
    spec.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::Invalid(format!("cannot parse '{s}' as an integer")))
        })
        .collect()
}

/// Parse a phi entry that may use the shorthand tokens tied to the sample
/// size: `1/T`, `1/sqrtT`, `logT`, `T`, or any plain number.
pub fn parse_phi_entry(s: &str, t: usize) -> Result<f64> {
    let tf = t as f64;
    match s.trim() {
        "1/T" => Ok(1.0 / tf),
        "1/sqrtT" => Ok(1.0 / tf.sqrt()),
        "logT" => Ok(tf.ln()),
        "T" => Ok(tf),
        other => parse_num(other),
    }
}

pub fn parse_phi_list(spec: &str, t: usize) -> Result<Vec<f64>> {
    spec.split(',').map(|s| parse_phi_entry(s, t)).collect()
}

/// Write a structured JSON manifest next to a run's outputs.
pub fn write_manifest<T: Serialize>(path: &Path, manifest: &T) -> Result<()> {
    let json = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::Invalid(format!("manifest serialization failed: {e}")))?;
    std::fs::write(path, json + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_parses_comments_and_spaces() {
        let m = parse_kv("a = 1\n# comment\n b=two # trailing\n\n").unwrap();
        assert_eq!(m.get("a").unwrap(), "1");
        assert_eq!(m.get("b").unwrap(), "two");
        assert!(parse_kv("not a pair\n").is_err());
    }

    #[test]
    fn list_specs() {
        assert_eq!(parse_f64_list("1,2,3.5").unwrap(), vec![1.0, 2.0, 3.5]);
        let r = parse_f64_list("0:1:5").unwrap();
        assert_eq!(r, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(parse_f64_list("0:1").is_err());
        assert_eq!(parse_usize_list("4, 5").unwrap(), vec![4, 5]);
    }

    #[test]
    fn phi_tokens() {
        assert_eq!(parse_phi_entry("T", 100).unwrap(), 100.0);
        assert_eq!(parse_phi_entry("1/T", 100).unwrap(), 0.01);
        assert_eq!(parse_phi_entry("1/sqrtT", 100).unwrap(), 0.1);
        assert!((parse_phi_entry("logT", 100).unwrap() - 100.0f64.ln()).abs() < 1e-15);
        assert_eq!(parse_phi_entry("2.5", 100).unwrap(), 2.5);
    }

    #[test]
    fn float_formatting_round_trips() {
        for v in [1.0 / 3.0, 0.1, 1e-17, 12345.6789, f64::NAN] {
            let s = fmt_f64(v);
            if v.is_nan() {
                assert_eq!(s, "NaN");
            } else {
                assert_eq!(s.parse::<f64>().unwrap(), v);
            }
        }
    }
}

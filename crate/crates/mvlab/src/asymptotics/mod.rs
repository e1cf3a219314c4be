//! Closed-form high-dimensional limits of the pseudoinverse estimator's
//! out-of-sample performance, for i.i.d. and single-factor return models,
//! plus Marchenko-Pastur spectral quantities and ridge-regularized limits.
//!
//! All functions take the limiting parameter tuple: squared clairvoyant
//! Sharpe ratio `theta`, signal-to-noise ratio `phi`, aspect ratio
//! `rho = lim N/T`, and the risk budget `sigma`. The ratio `rho = 1` is the
//! interpolation threshold where the limits blow up; a small window around
//! it is rejected.

pub mod mp;
pub mod ridge;

pub use mp::{mp_density, mp_support, mp_zero_mass, smallest_nonzero_eig_limit};
pub use ridge::{mp_stieltjes, ridge_limits, RidgeInputs, RidgeLimits, SpectralMeasure};

use crate::error::{Error, Result};
use crate::moments::RHO_ONE_WINDOW;

/// Limiting parameters indexing every closed-form limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitInputs {
    /// Squared clairvoyant Sharpe ratio, per period.
    pub theta_tilde: f64,
    /// Signal-to-noise ratio of the common factor (0 = factorless).
    pub phi_tilde: f64,
    /// Limit of N / T.
    pub rho: f64,
    /// Risk budget in per-period return SD units.
    pub sigma: f64,
}

impl LimitInputs {
    pub fn new(theta_tilde: f64, phi_tilde: f64, rho: f64, sigma: f64) -> Result<Self> {
        if !(theta_tilde > 1e-8 && theta_tilde < 1e8) {
            return Err(Error::Invalid(format!(
                "theta must lie in (1e-8, 1e8), got {theta_tilde}"
            )));
        }
        if !(phi_tilde >= 0.0) || !phi_tilde.is_finite() {
            return Err(Error::Invalid(format!(
                "phi must be finite and nonnegative, got {phi_tilde}"
            )));
        }
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::Invalid(format!("rho must be positive, got {rho}")));
        }
        if (rho - 1.0).abs() < RHO_ONE_WINDOW {
            return Err(Error::UnsupportedAspectRatio(rho));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::Invalid(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Self { theta_tilde, phi_tilde, rho, sigma })
    }

    /// Same inputs with the factor switched off.
    pub fn factorless(&self) -> Self {
        Self { phi_tilde: 0.0, ..*self }
    }
}

/// Limiting out-of-sample Sharpe ratio without a common factor.
///
/// `sqrt((1-rho)/(theta+rho)) * theta` below the interpolation threshold;
/// `sqrt((rho-1)/(theta+rho)) * theta / rho` above it.
pub fn sr_limit_factorless(inp: &LimitInputs) -> f64 {
    let th = inp.theta_tilde;
    let rho = inp.rho;
    if rho < 1.0 {
        ((1.0 - rho) / (th + rho)).sqrt() * th
    } else {
        ((rho - 1.0) / (th + rho)).sqrt() * th / rho
    }
}

/// Limiting prediction loss without a common factor. Proportional to sigma^2.
pub fn loss_limit_factorless(inp: &LimitInputs) -> f64 {
    let th = inp.theta_tilde;
    let rho = inp.rho;
    let s2 = inp.sigma * inp.sigma;
    if rho < 1.0 {
        let om = 1.0 - rho;
        s2 * ((th + rho) / (om.powi(3) * th) + th / om.powi(2) - 2.0 * (th + 1.0) / om + th + 1.0)
    } else {
        let om = rho - 1.0;
        s2 * ((th + rho) / (om.powi(3) * th) + th / (rho * rho * om * om)
            - 2.0 * (th + 1.0) / (rho * om)
            + th
            + 1.0)
    }
}

/// Limiting out-of-sample Sharpe ratio under a single common factor.
///
/// Below the threshold the factor plays no role and the factorless branch
/// applies unchanged. Above it, with `a = (rho + phi) / (phi + 1)`:
/// `theta sqrt(rho (rho-1)) / sqrt(a^4 + theta rho a^2 + theta phi^2 (rho-1)^2 / (phi+1)^2)`.
pub fn sr_limit_factor(inp: &LimitInputs) -> f64 {
    let th = inp.theta_tilde;
    let phi = inp.phi_tilde;
    let rho = inp.rho;
    if rho < 1.0 {
        return sr_limit_factorless(inp);
    }
    let a = (rho + phi) / (phi + 1.0);
    let den = a.powi(4)
        + th * rho * a * a
        + th * phi * phi * (rho - 1.0).powi(2) / (phi + 1.0).powi(2);
    th * (rho * (rho - 1.0)).sqrt() / den.sqrt()
}

/// Limiting prediction loss under a single common factor.
pub fn loss_limit_factor(inp: &LimitInputs) -> f64 {
    let th = inp.theta_tilde;
    let phi = inp.phi_tilde;
    let rho = inp.rho;
    let s2 = inp.sigma * inp.sigma;
    if rho < 1.0 {
        return loss_limit_factorless(inp);
    }
    let om = rho - 1.0;
    let p1 = (phi + 1.0).powi(4) * rho * rho * th / ((phi + rho).powi(4) * om * om);
    let p2 = (phi + 1.0).powi(2) * phi * phi * rho / ((phi + rho).powi(4) * om);
    let p3 = (phi + 1.0).powi(2) * rho * rho / ((phi + rho).powi(2) * om.powi(3));
    let p4 = rho / (th * om.powi(3));
    let p5 = -2.0 * (phi + 1.0).powi(2) * rho * (th + 1.0) / ((phi + rho).powi(2) * om);
    s2 * (p1 + p2 + p3 + p4 + p5 + 1.0 + th)
}

/// Limiting mean and standard deviation of the out-of-sample portfolio
/// return. Their ratio equals [`sr_limit_factor`] identically.
pub fn mean_sd_limit(inp: &LimitInputs) -> (f64, f64) {
    let th = inp.theta_tilde;
    let phi = inp.phi_tilde;
    let rho = inp.rho;
    let scale = inp.sigma / th.sqrt();
    if rho < 1.0 {
        let mean = scale * th / (1.0 - rho);
        let sd = scale * ((th + rho) / (1.0 - rho).powi(3)).sqrt();
        (mean, sd)
    } else {
        let om = rho - 1.0;
        let p1 = (phi + 1.0).powi(2);
        let pr = phi + rho;
        let mean = scale * th * rho * p1 / (om * pr * pr);
        let v = rho * th * phi * phi * p1 / (om * pr.powi(4))
            + rho * rho * th * p1 / (om.powi(3) * pr * pr)
            + rho / om.powi(3);
        (mean, scale * v.sqrt())
    }
}

/// The illustrative clairvoyant-Sharpe schedule `theta(N) = 1 + 15 (1 - e^{-0.05 N})`.
pub fn theta_schedule(n: f64) -> f64 {
    1.0 + 15.0 * (1.0 - (-0.05 * n).exp())
}

/// Which limit family a grid evaluation should report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitKind {
    Sharpe,
    Loss,
    MeanSd,
}

/// One evaluated grid point.
#[derive(Debug, Clone, Copy)]
pub struct LimitRow {
    pub theta_tilde: f64,
    pub phi_tilde: f64,
    pub rho: f64,
    pub sigma: f64,
    /// Sharpe or loss limit; for `MeanSd` the mean limit.
    pub value: f64,
    /// SD limit when `MeanSd` was requested.
    pub value2: Option<f64>,
}

/// Evaluate a limit family over the cartesian grid of the parameter lists.
pub fn limit_grid(
    kind: LimitKind,
    thetas: &[f64],
    phis: &[f64],
    rhos: &[f64],
    sigma: f64,
) -> Result<Vec<LimitRow>> {
    let mut rows = Vec::with_capacity(thetas.len() * phis.len() * rhos.len());
    for &th in thetas {
        for &ph in phis {
            for &rho in rhos {
                let inp = LimitInputs::new(th, ph, rho, sigma)?;
                let (value, value2) = match kind {
                    LimitKind::Sharpe => (sr_limit_factor(&inp), None),
                    LimitKind::Loss => (loss_limit_factor(&inp), None),
                    LimitKind::MeanSd => {
                        let (m, s) = mean_sd_limit(&inp);
                        (m, Some(s))
                    }
                };
                rows.push(LimitRow {
                    theta_tilde: th,
                    phi_tilde: ph,
                    rho,
                    sigma,
                    value,
                    value2,
                });
            }
        }
    }
    Ok(rows)
}

/// One point of the double-ascent scenario: theta follows
/// [`theta_schedule`] at `N = rho T`, so the Sharpe limit traces the
/// two-peaked curve as complexity grows at fixed sample size.
#[derive(Debug, Clone, Copy)]
pub struct ScenarioRow {
    pub n: f64,
    pub rho: f64,
    pub theta_tilde: f64,
    pub sr: f64,
    pub loss: f64,
}

/// Evaluate the double-ascent scenario over a rho grid at sample size `t`.
pub fn double_ascent_scenario(
    t: f64,
    phi_tilde: f64,
    rhos: &[f64],
    sigma: f64,
) -> Result<Vec<ScenarioRow>> {
    rhos.iter()
        .map(|&rho| {
            let n = rho * t;
            let th = theta_schedule(n);
            let inp = LimitInputs::new(th, phi_tilde, rho, sigma)?;
            Ok(ScenarioRow {
                n,
                rho,
                theta_tilde: th,
                sr: sr_limit_factor(&inp),
                loss: loss_limit_factor(&inp),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn inp(th: f64, ph: f64, rho: f64, sigma: f64) -> LimitInputs {
        LimitInputs::new(th, ph, rho, sigma).unwrap()
    }

    #[test]
    fn sr_factorless_anchors() {
        // rho -> 0: estimation error vanishes, SR -> sqrt(theta)
        assert_relative_eq!(
            sr_limit_factorless(&inp(4.0, 0.0, 1e-9, 1.0)),
            2.0,
            epsilon = 1e-6
        );
        assert_relative_eq!(
            sr_limit_factorless(&inp(4.0, 0.0, 0.5, 1.0)),
            4.0 * (0.5f64 / 4.5).sqrt(),
            epsilon = 1e-12
        );
        assert_relative_eq!(
            sr_limit_factorless(&inp(4.0, 0.0, 0.5, 1.0)),
            4.0 / 3.0,
            epsilon = 1e-12
        );
        assert_relative_eq!(
            sr_limit_factorless(&inp(4.0, 0.0, 2.0, 1.0)),
            2.0 * (1.0f64 / 6.0).sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn loss_factorless_anchors() {
        // algebraic cancellation at rho -> 0
        assert!(loss_limit_factorless(&inp(3.7, 0.0, 1e-9, 1.0)).abs() < 1e-6);
        // large-rho limit sigma^2 (1 + theta)
        let l = loss_limit_factorless(&inp(4.0, 0.0, 1e6, 1.0));
        assert!((l - 5.0).abs() < 1e-4);
        // proportional to sigma^2
        let l1 = loss_limit_factorless(&inp(4.0, 0.0, 0.5, 1.0));
        let l2 = loss_limit_factorless(&inp(4.0, 0.0, 0.5, 3.0));
        assert_relative_eq!(l2, 9.0 * l1, max_relative = 1e-12);
    }

    #[test]
    fn factor_reduces_to_factorless_at_phi_zero() {
        for th in [1.0, 4.0, 16.0] {
            for rho in [0.1, 0.3, 0.5, 0.7, 0.9, 1.5, 2.0, 4.0, 10.0] {
                let f = inp(th, 0.0, rho, 1.0);
                assert_relative_eq!(
                    sr_limit_factor(&f),
                    sr_limit_factorless(&f),
                    epsilon = 1e-12
                );
                assert_relative_eq!(
                    loss_limit_factor(&f),
                    loss_limit_factorless(&f),
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn factor_sr_low_dim_ignores_phi() {
        let with = sr_limit_factor(&inp(16.0, 10.0, 0.5, 1.0));
        let without = sr_limit_factorless(&inp(16.0, 0.0, 0.5, 1.0));
        assert_relative_eq!(with, without, epsilon = 1e-14);
        assert_relative_eq!(with, 16.0 * (0.5f64 / 16.5).sqrt(), epsilon = 1e-12);
        assert!((with - 2.78524).abs() < 1e-4);
    }

    #[test]
    fn factor_sr_high_dim_value() {
        // theta = 16, phi = log(100), rho = 2 (hand-checked against the formula)
        let v = sr_limit_factor(&inp(16.0, 100.0f64.ln(), 2.0, 1.0));
        let a: f64 = (2.0 + 100.0f64.ln()) / (1.0 + 100.0f64.ln());
        let den = a.powi(4)
            + 16.0 * 2.0 * a * a
            + 16.0 * 100.0f64.ln().powi(2) * 1.0 / (1.0 + 100.0f64.ln()).powi(2);
        assert_relative_eq!(v, 16.0 * 2.0f64.sqrt() / den.sqrt(), epsilon = 1e-12);
        assert!((v - 2.9927).abs() < 1e-3);
    }

    #[test]
    fn factor_loss_anchors() {
        // phi = 0, rho = 2 equals the factorless branch exactly
        assert_relative_eq!(
            loss_limit_factor(&inp(4.0, 0.0, 2.0, 1.0)),
            loss_limit_factorless(&inp(4.0, 0.0, 2.0, 1.0)),
            epsilon = 1e-13
        );
        // dominant-term limit at huge rho
        for phi in [0.0, 3.0, 50.0] {
            let l = loss_limit_factor(&inp(16.0, phi, 1e6, 1.0));
            assert!((l - 17.0).abs() < 1e-3, "phi={phi} l={l}");
        }
        // stronger factor lowers the loss in the over-parameterized regime
        let weak = loss_limit_factor(&inp(16.0, 0.0, 5.0, 1.0));
        let strong = loss_limit_factor(&inp(16.0, 100.0, 5.0, 1.0));
        assert!(strong < weak);
    }

    #[test]
    fn mean_sd_anchors_and_ratio_identity() {
        // rho -> 0: true optimal values sigma sqrt(theta) and sigma
        let (m, s) = mean_sd_limit(&inp(16.0, 0.0, 1e-9, 1.0));
        assert_relative_eq!(m, 4.0, epsilon = 1e-6);
        assert_relative_eq!(s, 1.0, epsilon = 1e-6);

        // theta = 16, rho = 0.5, sigma = 1
        let (m, s) = mean_sd_limit(&inp(16.0, 0.0, 0.5, 1.0));
        assert_relative_eq!(m, 8.0, epsilon = 1e-12);
        assert_relative_eq!(s, 0.25 * (16.5f64 / 0.125).sqrt(), epsilon = 1e-12);
        assert!((s - 2.8723).abs() < 1e-4);
        assert!((m / s - 2.78524).abs() < 1e-4);

        // ratio identity across a grid
        for th in [1.0, 4.0, 16.0] {
            for ph in [0.0, 0.5, 2.0, 10.0] {
                for rho in [0.1, 0.5, 0.9, 1.5, 3.0, 8.0] {
                    let i = inp(th, ph, rho, 0.7);
                    let (m, s) = mean_sd_limit(&i);
                    assert_relative_eq!(m / s, sr_limit_factor(&i), epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn theta_schedule_anchors() {
        assert_relative_eq!(theta_schedule(0.0), 1.0, epsilon = 1e-15);
        assert_relative_eq!(theta_schedule(1e9), 16.0, epsilon = 1e-12);
        assert_relative_eq!(
            theta_schedule(20.0),
            1.0 + 15.0 * (1.0 - (-1.0f64).exp()),
            epsilon = 1e-14
        );
        assert!((theta_schedule(20.0) - 10.48181).abs() < 1e-4);
    }

    #[test]
    fn rho_one_window_rejected() {
        assert!(matches!(
            LimitInputs::new(4.0, 0.0, 1.0, 1.0),
            Err(Error::UnsupportedAspectRatio(_))
        ));
        assert!(matches!(
            LimitInputs::new(4.0, 0.0, 1.0 + 1e-7, 1.0),
            Err(Error::UnsupportedAspectRatio(_))
        ));
        assert!(LimitInputs::new(4.0, 0.0, 1.0 + 1e-5, 1.0).is_ok());
    }

    #[test]
    fn double_ascent_shape() {
        // theta from the schedule at T = 100, phi = log(100): local max below
        // rho = 1, minimum near 1, and the second ascent overtakes it.
        let t = 100.0;
        let phi = 100.0f64.ln();
        let rhos: Vec<f64> = (0..200)
            .map(|i| 0.05 + i as f64 * (10.0 - 0.05) / 199.0)
            .filter(|r| (r - 1.0).abs() > 1e-3)
            .collect();
        let rows = double_ascent_scenario(t, phi, &rhos, 1.0).unwrap();
        let srs: Vec<f64> = rows.iter().map(|r| r.sr).collect();

        // local maximum strictly inside rho < 1
        let below: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.rho < 1.0)
            .map(|r| (r.rho, r.sr))
            .collect();
        let (argmax_rho, max_below) = below
            .iter()
            .cloned()
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        assert!(argmax_rho > below[0].0 && argmax_rho < below.last().unwrap().0);
        assert!(max_below > below[0].1 && max_below > below.last().unwrap().1);

        // minimum of the whole curve sits in a neighborhood of rho = 1
        let (argmin_rho, _) = rows
            .iter()
            .map(|r| (r.rho, r.sr))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        assert!((argmin_rho - 1.0).abs() < 0.3, "min at rho = {argmin_rho}");

        // second ascent: SR at rho = 5 beats SR at rho = 1.2
        let at = |target: f64| {
            rows.iter()
                .min_by(|a, b| {
                    (a.rho - target)
                        .abs()
                        .partial_cmp(&(b.rho - target).abs())
                        .unwrap()
                })
                .unwrap()
                .sr
        };
        assert!(at(5.0) > at(1.2));
        assert!(srs.iter().all(|v| v.is_finite()));
    }
}

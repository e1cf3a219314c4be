//! Portfolio weight constructors: the pseudoinverse mean-variance
//! estimator, the clairvoyant optimum, minimum-variance, equal weights,
//! and the minimum-norm interpolator.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::moments::{self, LowRankMoments};
use crate::panel::ReturnPanel;
use crate::population::PopulationModel;

/// A vector of portfolio weights together with the risk budget they were
/// scaled to (or, for unscaled strategies, their estimated risk).
#[derive(Debug, Clone)]
pub struct Weights {
    pub w: DVector<f64>,
    pub risk_budget: f64,
}

impl Weights {
    pub fn new(w: DVector<f64>, risk_budget: f64) -> Result<Self> {
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("non-finite weight entry".into()));
        }
        if !(risk_budget > 0.0) {
            return Err(Error::Invalid(format!(
                "risk budget must be positive, got {risk_budget}"
            )));
        }
        Ok(Self { w, risk_budget })
    }
}

/// How the squared-Sharpe branch obtains the signal-to-noise ratio when
/// the aspect ratio exceeds one.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum PhiChoice {
    /// No factor correction: phi = 0 (the factorless high-dimensional branch).
    #[default]
    None,
    /// Use a known signal-to-noise ratio.
    Fixed(f64),
    /// Estimate it from the window via the leading-eigenvalue estimator.
    Estimated,
}

/// Options for [`pseudoinverse_weights_with`].
#[derive(Debug, Clone, Copy)]
pub struct PsinvOptions {
    pub sigma: f64,
    pub phi: PhiChoice,
    /// When the squared-Sharpe estimate is non-positive (or its branch is
    /// undefined at rho = 1), fall back to scaling by the in-sample risk:
    /// `w = sigma / sqrt(theta_s) * pinv(cov) * mean`. Off by default.
    pub fallback: bool,
}

impl PsinvOptions {
    pub fn new(sigma: f64) -> Self {
        Self {
            sigma,
            phi: PhiChoice::None,
            fallback: false,
        }
    }
}

/// Pseudoinverse weights plus the estimation diagnostics the engines need.
#[derive(Debug, Clone)]
pub struct PsinvFit {
    pub weights: Weights,
    pub theta_s: f64,
    /// The branch estimate actually produced (may be non-positive when the
    /// fallback engaged).
    pub theta_hat: f64,
    pub used_fallback: bool,
}

/// Pseudoinverse mean-variance weights `sigma / sqrt(theta_hat) * pinv(cov) * mean`.
pub fn pseudoinverse_weights(panel: &ReturnPanel, sigma: f64) -> Result<Weights> {
    pseudoinverse_weights_with(panel, &PsinvOptions::new(sigma)).map(|f| f.weights)
}

/// As [`pseudoinverse_weights`], with explicit control over the phi source
/// and the non-positive-theta fallback.
pub fn pseudoinverse_weights_with(panel: &ReturnPanel, opts: &PsinvOptions) -> Result<PsinvFit> {
    let lr = LowRankMoments::from_panel(panel)?;
    pseudoinverse_weights_from_moments(&lr, opts)
}

/// Weight construction from an already-computed low-rank moment view.
pub fn pseudoinverse_weights_from_moments(
    lr: &LowRankMoments,
    opts: &PsinvOptions,
) -> Result<PsinvFit> {
    if !(opts.sigma > 0.0) {
        return Err(Error::Invalid(format!(
            "risk budget must be positive, got {}",
            opts.sigma
        )));
    }
    let rho_t = lr.aspect_ratio();
    let theta_s = lr.theta_s();
    let phi = match opts.phi {
        PhiChoice::None => None,
        PhiChoice::Fixed(p) => Some(p),
        PhiChoice::Estimated => {
            if rho_t > 1.0 {
                Some(lr.phi_hat()?)
            } else {
                None
            }
        }
    };
    let theta_hat = match moments::theta_hat_from_theta_s(theta_s, rho_t, phi) {
        Ok(th) => th,
        Err(e) => {
            if opts.fallback {
                f64::NEG_INFINITY // forces the fallback branch below
            } else {
                return Err(e);
            }
        }
    };
    let direction = lr.pinv_mean();
    if theta_hat > 0.0 {
        let w = direction * (opts.sigma / theta_hat.sqrt());
        Ok(PsinvFit {
            weights: Weights::new(w, opts.sigma)?,
            theta_s,
            theta_hat,
            used_fallback: false,
        })
    } else if opts.fallback {
        if !(theta_s > 0.0) {
            return Err(Error::DegenerateCovariance(
                "plug-in squared Sharpe is zero; no fallback scale exists".into(),
            ));
        }
        let w = direction * (opts.sigma / theta_s.sqrt());
        Ok(PsinvFit {
            weights: Weights::new(w, opts.sigma)?,
            theta_s,
            theta_hat,
            used_fallback: true,
        })
    } else {
        Err(Error::NonPositiveTheta(theta_hat))
    }
}

/// Clairvoyant optimal weights `sigma / sqrt(theta) * inv(Sigma) * mu`.
pub fn optimal_weights(pop: &PopulationModel, sigma: f64) -> Result<Weights> {
    if !(sigma > 0.0) {
        return Err(Error::Invalid(format!(
            "risk budget must be positive, got {sigma}"
        )));
    }
    if pop.mu.iter().all(|v| *v == 0.0) {
        return Err(Error::ZeroSignal);
    }
    let dir = pop.solve(&pop.mu)?;
    let theta = pop.mu.dot(&dir);
    if !(theta > 0.0) {
        return Err(Error::ZeroSignal);
    }
    Weights::new(dir * (sigma / theta.sqrt()), sigma)
}

/// Minimum-variance weights `pinv(cov) e / (e' pinv(cov) e)`, summing to one.
pub fn minvar_weights(m: &moments::MomentEstimate) -> Result<Weights> {
    let lr_dir = {
        let p = moments::pseudo_inverse(m)?;
        let ones = DVector::from_element(m.n_assets(), 1.0);
        &p * ones
    };
    minvar_from_direction(lr_dir, Some(m.cov.clone()))
}

/// Minimum-variance weights from a low-rank moment view.
pub fn minvar_weights_low_rank(lr: &LowRankMoments) -> Result<Weights> {
    let ones = DVector::from_element(lr.n_assets, 1.0);
    let dir = lr.pinv_mul(&ones);
    let denom = dir.sum();
    if denom.abs() < 1e-14 * dir.norm().max(1.0) {
        return Err(Error::DegenerateCovariance(
            "e' pinv(cov) e is numerically zero".into(),
        ));
    }
    let w = dir / denom;
    // estimated in-sample risk of the normalized portfolio
    let proj = lr.eigvecs.transpose() * &w;
    let var: f64 = proj
        .iter()
        .zip(&lr.eigvals)
        .map(|(p, l)| p * p * l)
        .sum();
    Weights::new(w, var.max(f64::MIN_POSITIVE).sqrt())
}

fn minvar_from_direction(dir: DVector<f64>, cov: Option<DMatrix<f64>>) -> Result<Weights> {
    let denom = dir.sum();
    if denom.abs() < 1e-14 * dir.norm().max(1.0) {
        return Err(Error::DegenerateCovariance(
            "e' pinv(cov) e is numerically zero".into(),
        ));
    }
    let w = dir / denom;
    let risk = match cov {
        Some(c) => (w.transpose() * c * &w)[(0, 0)].max(f64::MIN_POSITIVE).sqrt(),
        None => 1.0,
    };
    Weights::new(w, risk)
}

/// Equal weights `e / N`. When a covariance is supplied the risk budget
/// records the portfolio's true risk, otherwise it is a nominal 1.
pub fn equal_weights(n: usize, sigma_mat: Option<&DMatrix<f64>>) -> Result<Weights> {
    if n == 0 {
        return Err(Error::Invalid("equal weights need at least one asset".into()));
    }
    let w = DVector::from_element(n, 1.0 / n as f64);
    let risk = match sigma_mat {
        Some(s) => {
            if s.nrows() != n || s.ncols() != n {
                return Err(Error::Invalid(format!(
                    "covariance is {}x{}, expected {n}x{n}",
                    s.nrows(),
                    s.ncols()
                )));
            }
            (w.transpose() * s * &w)[(0, 0)].max(0.0).sqrt().max(f64::MIN_POSITIVE)
        }
        None => 1.0,
    };
    Weights::new(w, risk)
}

/// Minimum-l2-norm interpolating weights: the shortest `w` with
/// `R w = target` in every training period, computed through an SVD
/// pseudoinverse of the raw (uncentered) data matrix.
///
/// For N > T this is the min-norm interpolator; its direction coincides
/// exactly with `pinv(R'R) * mean`, the plug-in direction built from the
/// uncentered second-moment matrix. Note it is *not* the direction
/// `pinv(cov) * mean` of the centered estimator: when N > T that vector is
/// orthogonal to the interpolator (`R pinv(R) = I` makes the interpolator
/// a fixed point of the centering projection's null space).
pub fn min_norm_interpolating_weights(panel: &ReturnPanel, target: f64) -> Result<Weights> {
    let t = panel.n_periods();
    let svd = panel.values().clone().svd(true, true);
    let rhs = DVector::from_element(t, target);
    let w = svd
        .solve(&rhs, f64::EPSILON * t as f64)
        .map_err(|e| Error::Solver(e.to_string()))?;
    Weights::new(w, target.abs().max(f64::MIN_POSITIVE))
}

/// Plug-in direction from the *uncentered* second-moment matrix,
/// `pinv(R'R / T) * mean`. Exactly parallel to the min-norm interpolator.
pub fn uncentered_plugin_direction(panel: &ReturnPanel) -> Result<DVector<f64>> {
    let t = panel.n_periods() as f64;
    let x = panel.values();
    let second_moment = x.transpose() * x / t;
    let mean = DVector::from_iterator(
        panel.n_assets(),
        x.column_iter().map(|c| c.sum() / t),
    );
    let svd = second_moment.svd(true, true);
    svd.solve(&mean, f64::EPSILON * panel.n_assets() as f64)
        .map_err(|e| Error::Solver(e.to_string()))
}

/// Unscaled pseudoinverse direction `pinv(cov) * mean` of a panel.
pub fn psinv_direction(panel: &ReturnPanel) -> Result<DVector<f64>> {
    Ok(LowRankMoments::from_panel(panel)?.pinv_mean())
}

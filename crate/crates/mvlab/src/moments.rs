//! Sample moments, the covariance pseudoinverse, and the squared-Sharpe
//! and signal-to-noise estimators built on them.
//!
//! Two representations are provided. [`MomentEstimate`] stores the full
//! N x N covariance with a complete eigendecomposition; it is the explicit,
//! inspectable form. [`LowRankMoments`] keeps only the (at most min(T-1, N))
//! eigenpairs that can be nonzero, computed through the T x T Gram matrix
//! when N > T, and is what the Monte Carlo and backtest engines use per
//! window. Both agree on every pseudoinverse application; a unit test pins
//! that down.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{center_columns, sym_eigen_desc};
use crate::panel::ReturnPanel;

/// Tolerance window for treating an aspect ratio as "exactly one", where
/// the squared-Sharpe estimator has no valid branch.
pub const RHO_ONE_WINDOW: f64 = 1e-6;

/// Sample mean, covariance (divisor T-1), and its full eigendecomposition.
#[derive(Debug, Clone)]
pub struct MomentEstimate {
    /// Sample mean vector (length N).
    pub mean: DVector<f64>,
    /// Sample covariance, divisor T-1.
    pub cov: DMatrix<f64>,
    /// Eigenvalues sorted descending; small negatives are clamped to zero.
    pub eigvals: DVector<f64>,
    /// Orthonormal eigenvector columns matching `eigvals`.
    pub eigvecs: DMatrix<f64>,
    /// Rank cap K = min(T-1, N) used by the pseudoinverse.
    pub rank_used: usize,
    /// Number of observations the moments were estimated from.
    pub n_periods: usize,
}

impl MomentEstimate {
    pub fn n_assets(&self) -> usize {
        self.mean.len()
    }

    /// Aspect ratio N / T.
    pub fn aspect_ratio(&self) -> f64 {
        self.n_assets() as f64 / self.n_periods as f64
    }

    /// Eigenvalue cutoff below which directions are treated as numerically
    /// null: `tau_1 * N * machine_epsilon`.
    pub fn rank_threshold(&self) -> f64 {
        self.eigvals[0] * self.n_assets() as f64 * f64::EPSILON
    }
}

/// Estimate sample mean and covariance from a panel and eigendecompose.
pub fn estimate_moments(panel: &ReturnPanel) -> Result<MomentEstimate> {
    let t = panel.n_periods();
    let n = panel.n_assets();
    if t < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 periods to estimate a covariance, got {t}"
        )));
    }
    let (mean, xc) = center_columns(panel.values());
    let cov = xc.transpose() * &xc / (t - 1) as f64;
    let (mut eigvals, eigvecs) = sym_eigen_desc(&cov);
    let top = eigvals[0].max(0.0);
    for v in eigvals.iter_mut() {
        if *v < 0.0 {
            if *v < -1e-10 * top {
                return Err(Error::Invalid(format!(
                    "covariance eigenvalue {v} is negative beyond tolerance"
                )));
            }
            *v = 0.0;
        }
    }
    Ok(MomentEstimate {
        mean,
        cov,
        eigvals,
        eigvecs,
        rank_used: (t - 1).min(n),
        n_periods: t,
    })
}

/// Moore-Penrose pseudoinverse of the sample covariance: sum over the top
/// K = min(T-1, N) eigenpairs of `1/tau_i v_i v_i'`, skipping eigenvalues
/// below the numerical-rank threshold.
pub fn pseudo_inverse(m: &MomentEstimate) -> Result<DMatrix<f64>> {
    let n = m.n_assets();
    let thr = m.rank_threshold();
    let mut out = DMatrix::zeros(n, n);
    let mut used = 0;
    for i in 0..m.rank_used.min(n) {
        let tau = m.eigvals[i];
        if tau <= thr {
            break;
        }
        let v = m.eigvecs.column(i);
        out.syger(1.0 / tau, &v, &v, 1.0);
        used += 1;
    }
    if used == 0 {
        return Err(Error::DegenerateCovariance(
            "all eigenvalues fall below the numerical-rank threshold".into(),
        ));
    }
    // syger fills the lower triangle; mirror it.
    for i in 0..n {
        for j in (i + 1)..n {
            out[(i, j)] = out[(j, i)];
        }
    }
    Ok(out)
}

/// Squared-Sharpe plug-in `theta_s = mean' pinv(cov) mean`.
pub fn theta_s(m: &MomentEstimate) -> Result<f64> {
    let thr = m.rank_threshold();
    let mut acc = 0.0;
    let mut used = 0;
    for i in 0..m.rank_used {
        let tau = m.eigvals[i];
        if tau <= thr {
            break;
        }
        let proj = m.eigvecs.column(i).dot(&m.mean);
        acc += proj * proj / tau;
        used += 1;
    }
    if used == 0 {
        return Err(Error::DegenerateCovariance(
            "all eigenvalues fall below the numerical-rank threshold".into(),
        ));
    }
    Ok(acc)
}

/// Consistent estimator of the squared clairvoyant Sharpe ratio from the
/// plug-in `theta_s`, branching on the aspect ratio.
///
/// For `rho_t < 1`: `(1 - rho) theta_s - rho`. For `rho_t > 1` the factor
/// correction `((phi + rho)^2 / ((phi + 1)^2 rho)) [(rho - 1) theta_s - 1]`
/// applies; with `phi_hat` absent it reduces to `rho [(rho - 1) theta_s - 1]`.
pub fn theta_hat_from_theta_s(theta_s: f64, rho_t: f64, phi_hat: Option<f64>) -> Result<f64> {
    if (rho_t - 1.0).abs() < RHO_ONE_WINDOW {
        return Err(Error::UnsupportedAspectRatio(rho_t));
    }
    if rho_t < 1.0 {
        Ok((1.0 - rho_t) * theta_s - rho_t)
    } else {
        let phi = phi_hat.unwrap_or(0.0);
        let corr = (phi + rho_t).powi(2) / ((phi + 1.0).powi(2) * rho_t);
        Ok(corr * ((rho_t - 1.0) * theta_s - 1.0))
    }
}

/// Squared-Sharpe estimator evaluated from an explicit moment estimate.
pub fn estimate_theta_hat(m: &MomentEstimate, rho_t: f64, phi_hat: Option<f64>) -> Result<f64> {
    theta_hat_from_theta_s(theta_s(m)?, rho_t, phi_hat)
}

/// Signal-to-noise estimator `phi_hat = tau_1 / sigma_eps^2`, where
/// `sigma_eps^2` is the pooled entrywise variance of the centered data after
/// removing its first principal component.
///
/// The residual sum of squares has the closed form
/// `(T-1) (trace(cov) - tau_1)`, and the residual entries sum to zero
/// exactly, so the pooled variance is that sum divided by `T*N - 1`.
pub fn estimate_phi_hat(m: &MomentEstimate) -> Result<f64> {
    phi_hat_from_spectrum(m.eigvals[0], m.eigvals.sum(), m.n_periods, m.n_assets())
}

pub(crate) fn phi_hat_from_spectrum(tau1: f64, trace: f64, t: usize, n: usize) -> Result<f64> {
    if n < 2 || t < 3 {
        return Err(Error::InsufficientData(format!(
            "phi_hat needs N >= 2 and T >= 3, got N = {n}, T = {t}"
        )));
    }
    let rss = (t - 1) as f64 * (trace - tau1);
    let sigma_eps2 = rss / (t * n - 1) as f64;
    if sigma_eps2 <= tau1 * f64::EPSILON * (t * n) as f64 {
        return Err(Error::DegenerateCovariance(
            "zero residual variance after removing the leading component".into(),
        ));
    }
    Ok(tau1 / sigma_eps2)
}

/// Rank-revealing moment view: only the eigenpairs that can be nonzero.
///
/// When N > T the eigendecomposition runs on the T x T Gram matrix of the
/// centered data and the asset-space eigenvectors are recovered as
/// `X_c' u / sqrt((T-1) lambda)`, which is exact for the nonzero part of the
/// spectrum and far cheaper than an N x N decomposition.
#[derive(Debug, Clone)]
pub struct LowRankMoments {
    pub mean: DVector<f64>,
    /// Nonzero-capable eigenvalues, descending, already thresholded.
    pub eigvals: Vec<f64>,
    /// N x k matrix of matching orthonormal eigenvectors.
    pub eigvecs: DMatrix<f64>,
    /// Trace of the full sample covariance (includes discarded directions).
    pub trace: f64,
    pub n_periods: usize,
    pub n_assets: usize,
}

impl LowRankMoments {
    pub fn from_panel(panel: &ReturnPanel) -> Result<Self> {
        Self::from_values(panel.values())
    }

    pub fn from_values(values: &DMatrix<f64>) -> Result<Self> {
        let t = values.nrows();
        let n = values.ncols();
        if t < 2 {
            return Err(Error::InsufficientData(format!(
                "need at least 2 periods to estimate a covariance, got {t}"
            )));
        }
        let (mean, xc) = center_columns(values);
        let denom = (t - 1) as f64;
        let (raw_vals, raw_vecs, trace) = if n <= t {
            let cov = xc.transpose() * &xc / denom;
            let trace = cov.trace();
            let (vals, vecs) = sym_eigen_desc(&cov);
            (vals, vecs, trace)
        } else {
            let gram = &xc * xc.transpose() / denom;
            let trace = gram.trace();
            let (vals, u) = sym_eigen_desc(&gram);
            // Map Gram eigenvectors into asset space for the kept part only;
            // the mapping below divides by sqrt(lambda), so filter first.
            (vals, u, trace)
        };
        let top = raw_vals[0].max(0.0);
        let thr = top * n as f64 * f64::EPSILON;
        let cap = (t - 1).min(n);
        let mut eigvals = Vec::new();
        for i in 0..cap.min(raw_vals.len()) {
            if raw_vals[i] > thr {
                eigvals.push(raw_vals[i]);
            } else {
                break;
            }
        }
        if eigvals.is_empty() {
            return Err(Error::DegenerateCovariance(
                "all eigenvalues fall below the numerical-rank threshold".into(),
            ));
        }
        let k = eigvals.len();
        let eigvecs = if n <= t {
            raw_vecs.columns(0, k).into_owned()
        } else {
            let mut vecs = DMatrix::zeros(n, k);
            for i in 0..k {
                let v = xc.transpose() * raw_vecs.column(i) / (denom * eigvals[i]).sqrt();
                vecs.set_column(i, &v);
            }
            vecs
        };
        Ok(Self {
            mean,
            eigvals,
            eigvecs,
            trace,
            n_periods: t,
            n_assets: n,
        })
    }

    pub fn aspect_ratio(&self) -> f64 {
        self.n_assets as f64 / self.n_periods as f64
    }

    /// Apply the covariance pseudoinverse to a vector.
    pub fn pinv_mul(&self, v: &DVector<f64>) -> DVector<f64> {
        let proj = self.eigvecs.transpose() * v;
        let scaled = DVector::from_iterator(
            self.eigvals.len(),
            proj.iter().zip(&self.eigvals).map(|(p, l)| p / l),
        );
        &self.eigvecs * scaled
    }

    /// Pseudoinverse-weighted direction `pinv(cov) * mean`.
    pub fn pinv_mean(&self) -> DVector<f64> {
        self.pinv_mul(&self.mean)
    }

    /// Plug-in squared Sharpe `mean' pinv(cov) mean`.
    pub fn theta_s(&self) -> f64 {
        let proj = self.eigvecs.transpose() * &self.mean;
        proj.iter()
            .zip(&self.eigvals)
            .map(|(p, l)| p * p / l)
            .sum()
    }

    /// Largest sample eigenvalue.
    pub fn top_eigval(&self) -> f64 {
        self.eigvals[0]
    }

    /// Signal-to-noise estimator; see [`estimate_phi_hat`].
    pub fn phi_hat(&self) -> Result<f64> {
        phi_hat_from_spectrum(self.top_eigval(), self.trace, self.n_periods, self.n_assets)
    }
}

//! Seeded data generation under the single-factor model and the sweep
//! harness that compares finite-sample averages with the closed-form
//! limits over an (N, phi) grid.

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{self, LimitInputs};
use crate::error::{Error, Result};
use crate::moments::LowRankMoments;
use crate::panel::ReturnPanel;
use crate::rng::{derive_rng, f64_key};
use crate::weights::{pseudoinverse_weights_from_moments, PhiChoice, PsinvOptions};

/// Generator parameters for the single-factor data-generating process
/// `r_t = b mu_f + b sigma_f z_t + sigma_eps y_t`.
#[derive(Debug, Clone)]
pub struct FactorSpec {
    /// Factor loading direction.
    pub b: DVector<f64>,
    /// Factor mean per period.
    pub mu_f: f64,
    /// Factor standard deviation.
    pub sigma_f: f64,
    /// Idiosyncratic standard deviation.
    pub sigma_eps: f64,
}

impl FactorSpec {
    /// Implied squared clairvoyant Sharpe ratio
    /// `mu_f^2 |b|^2 / (sigma_eps^2 + sigma_f^2 |b|^2)`.
    pub fn theta(&self) -> f64 {
        let b2 = self.b.norm_squared();
        self.mu_f * self.mu_f * b2 / (self.sigma_eps * self.sigma_eps + self.sigma_f * self.sigma_f * b2)
    }

    /// Signal-to-noise ratio `sigma_f^2 |b|^2 / sigma_eps^2`.
    pub fn phi(&self) -> f64 {
        self.sigma_f * self.sigma_f * self.b.norm_squared()
            / (self.sigma_eps * self.sigma_eps)
    }

    /// Population mean `b mu_f`.
    pub fn population_mean(&self) -> DVector<f64> {
        &self.b * self.mu_f
    }

    /// Quadratic form `v' Sigma v` with
    /// `Sigma = sigma_f^2 b b' + sigma_eps^2 I`, rank-1 fast path.
    pub fn sigma_quadform(&self, v: &DVector<f64>) -> f64 {
        let bv = self.b.dot(v);
        self.sigma_f * self.sigma_f * bv * bv
            + self.sigma_eps * self.sigma_eps * v.norm_squared()
    }

    /// Quadratic form `v' (Sigma + mu mu') v`, the prediction-loss metric.
    pub fn loss_quadform(&self, v: &DVector<f64>) -> f64 {
        let mv = self.population_mean().dot(v);
        self.sigma_quadform(v) + mv * mv
    }

    /// Optimal weights `sigma / sqrt(theta) * inv(Sigma) mu`, in closed form
    /// via Sherman-Morrison: `inv(Sigma) mu = mu_f b / (sigma_eps^2 + sigma_f^2 |b|^2)`.
    pub fn optimal_weights(&self, sigma: f64) -> DVector<f64> {
        let b2 = self.b.norm_squared();
        let denom = self.sigma_eps * self.sigma_eps + self.sigma_f * self.sigma_f * b2;
        &self.b * (sigma / self.theta().sqrt() * self.mu_f / denom)
    }
}

/// Build a factor spec hitting an exact theta target: `b` a random unit
/// direction, `sigma_eps = 1`, `sigma_f^2 = phi`, and
/// `mu_f = sqrt(theta (1 + phi))` so the implied theta matches exactly.
pub fn make_factor_spec(
    n: usize,
    theta_target: f64,
    phi: f64,
    rng: &mut ChaCha8Rng,
) -> Result<FactorSpec> {
    if !(theta_target > 0.0) {
        return Err(Error::Invalid(format!(
            "theta target must be positive, got {theta_target}"
        )));
    }
    if !(phi >= 0.0) {
        return Err(Error::Invalid(format!("phi must be nonnegative, got {phi}")));
    }
    if n == 0 {
        return Err(Error::Invalid("need at least one asset".into()));
    }
    let mut b = DVector::from_fn(n, |_, _| {
        <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
    });
    let norm = b.norm();
    if norm == 0.0 {
        b[0] = 1.0;
    } else {
        b /= norm;
    }
    Ok(FactorSpec {
        b,
        mu_f: (theta_target * (1.0 + phi)).sqrt(),
        sigma_f: phi.sqrt(),
        sigma_eps: 1.0,
    })
}

/// Innovation distribution for the generator. Both are zero-mean with unit
/// variance; the Student-t option (standardized, df = 8) exercises the
/// bounded-fourth-moment condition away from Gaussianity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    #[default]
    Gaussian,
    StudentT8,
}

impl NoiseKind {
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            NoiseKind::Gaussian => {
                <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
            }
            NoiseKind::StudentT8 => {
                // variance of t(8) is 8/6; standardize to unit variance
                let t = StudentT::new(8.0).unwrap().sample(rng);
                t / (8.0f64 / 6.0).sqrt()
            }
        }
    }
}

/// Draw a T x N panel from the factor process.
pub fn generate_returns(
    spec: &FactorSpec,
    t: usize,
    rng: &mut ChaCha8Rng,
) -> Result<ReturnPanel> {
    generate_returns_with(spec, t, NoiseKind::Gaussian, rng)
}

pub fn generate_returns_with(
    spec: &FactorSpec,
    t: usize,
    noise: NoiseKind,
    rng: &mut ChaCha8Rng,
) -> Result<ReturnPanel> {
    if t < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 periods, got {t}"
        )));
    }
    let n = spec.b.len();
    let mut values = DMatrix::zeros(t, n);
    for r in 0..t {
        let f = spec.mu_f + spec.sigma_f * noise.sample(rng);
        for c in 0..n {
            values[(r, c)] = spec.b[c] * f + spec.sigma_eps * noise.sample(rng);
        }
    }
    ReturnPanel::from_values(values)
}

/// The clairvoyant-Sharpe schedule a sweep assigns to each asset count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaOfN {
    Constant(f64),
    /// `theta(N) = 1 + 15 (1 - e^{-0.05 N})`.
    Schedule,
}

impl ThetaOfN {
    pub fn value(&self, n: usize) -> f64 {
        match self {
            ThetaOfN::Constant(v) => *v,
            ThetaOfN::Schedule => asymptotics::theta_schedule(n as f64),
        }
    }
}

/// Sweep configuration: the grid, replication count, and master seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Observations per simulated panel.
    pub t: usize,
    /// Asset counts to visit.
    pub n_list: Vec<usize>,
    /// Signal-to-noise ratios to visit.
    pub phi_list: Vec<f64>,
    /// Theta assignment per N.
    pub theta_of_n: ThetaOfN,
    /// Replications per (N, phi) cell.
    pub reps: usize,
    /// Master seed; all streams derive from it.
    pub seed: u64,
    /// Risk budget for the weight scale (the Sharpe column is scale-free).
    pub sigma: f64,
    /// Innovation distribution.
    #[serde(default)]
    pub noise: NoiseKind,
    /// Redraw the loading direction every replication instead of once per
    /// cell.
    #[serde(default)]
    pub redraw_loadings: bool,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t < 2 {
            return Err(Error::Invalid(format!("t must be >= 2, got {}", self.t)));
        }
        if self.reps < 1 {
            return Err(Error::Invalid("reps must be >= 1".into()));
        }
        if self.n_list.is_empty() || self.phi_list.is_empty() {
            return Err(Error::Invalid("n_list and phi_list must be nonempty".into()));
        }
        if let Some(&n) = self.n_list.iter().find(|&&n| n < 2) {
            return Err(Error::Invalid(format!("all N must be >= 2, got {n}")));
        }
        if let Some(&p) = self.phi_list.iter().find(|&&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::Invalid(format!("phi values must be finite and >= 0, got {p}")));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::Invalid(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        Ok(())
    }
}

/// Aggregated cell of a sweep: finite-sample averages with standard errors
/// next to the closed-form limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub phi: f64,
    pub rho_t: f64,
    pub avg_sr: f64,
    pub se_sr: f64,
    pub avg_loss: f64,
    pub se_loss: f64,
    /// Closed-form Sharpe limit at (theta(N), phi, rho); NaN inside the
    /// rho = 1 window.
    pub asy_sr: f64,
    pub asy_loss: f64,
    /// Replications where the theta branch was non-positive and the
    /// in-sample-risk fallback scale was used.
    pub fallback_count: usize,
}

struct RepOutcome {
    sr: f64,
    loss: f64,
    fallback: bool,
}

fn run_rep(
    cfg: &SweepConfig,
    spec: &FactorSpec,
    phi: f64,
    rng: &mut ChaCha8Rng,
) -> Result<RepOutcome> {
    let panel = generate_returns_with(spec, cfg.t, cfg.noise, rng)?;
    let lr = LowRankMoments::from_panel(&panel)?;
    let fit = pseudoinverse_weights_from_moments(
        &lr,
        &PsinvOptions {
            sigma: cfg.sigma,
            phi: PhiChoice::Fixed(phi),
            fallback: true,
        },
    )?;
    let direction = lr.pinv_mean();
    let mu = spec.population_mean();
    let sr = direction.dot(&mu) / spec.sigma_quadform(&direction).sqrt();
    let gap = &fit.weights.w - &spec.optimal_weights(cfg.sigma);
    let loss = spec.loss_quadform(&gap);
    Ok(RepOutcome {
        sr,
        loss,
        fallback: fit.used_fallback,
    })
}

/// Run the sweep. Replications execute in parallel; the reduction is in
/// (N, phi, rep) order regardless of scheduling, so output is bit-identical
/// for a fixed seed across thread counts.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let cells: Vec<(usize, f64)> = cfg
        .n_list
        .iter()
        .flat_map(|&n| cfg.phi_list.iter().map(move |&p| (n, p)))
        .collect();

    let mut rows = Vec::with_capacity(cells.len());
    for (n, phi) in cells {
        let theta = cfg.theta_of_n.value(n);
        let rho_t = n as f64 / cfg.t as f64;

        let outcomes: Result<Vec<RepOutcome>> = (0..cfg.reps)
            .into_par_iter()
            .map(|rep| {
                // Loadings: one draw per cell (rep stream 0) unless redrawn
                // per replication.
                let spec = if cfg.redraw_loadings {
                    let mut brng =
                        derive_rng(cfg.seed, &[1, n as u64, f64_key(phi), rep as u64]);
                    make_factor_spec(n, theta, phi, &mut brng)?
                } else {
                    let mut brng = derive_rng(cfg.seed, &[1, n as u64, f64_key(phi), 0]);
                    make_factor_spec(n, theta, phi, &mut brng)?
                };
                let mut rng =
                    derive_rng(cfg.seed, &[2, n as u64, f64_key(phi), rep as u64]);
                run_rep(cfg, &spec, phi, &mut rng)
            })
            .collect();
        let outcomes = outcomes?;

        let reps = cfg.reps as f64;
        let mean = |f: &dyn Fn(&RepOutcome) -> f64| {
            outcomes.iter().map(|o| f(o)).sum::<f64>() / reps
        };
        let avg_sr = mean(&|o| o.sr);
        let avg_loss = mean(&|o| o.loss);
        let se = |f: &dyn Fn(&RepOutcome) -> f64, m: f64| {
            if cfg.reps < 2 {
                0.0
            } else {
                let var =
                    outcomes.iter().map(|o| (f(o) - m).powi(2)).sum::<f64>() / (reps - 1.0);
                (var / reps).sqrt()
            }
        };
        let (asy_sr, asy_loss) = match LimitInputs::new(theta, phi, rho_t, cfg.sigma) {
            Ok(inp) => (
                asymptotics::sr_limit_factor(&inp),
                asymptotics::loss_limit_factor(&inp),
            ),
            Err(_) => (f64::NAN, f64::NAN),
        };
        rows.push(SweepRow {
            n,
            phi,
            rho_t,
            avg_sr,
            se_sr: se(&|o| o.sr, avg_sr),
            avg_loss,
            se_loss: se(&|o| o.loss, avg_loss),
            asy_sr,
            asy_loss,
            fallback_count: outcomes.iter().filter(|o| o.fallback).count(),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Cholesky;

    fn rng(seed: u64) -> ChaCha8Rng {
        derive_rng(seed, &[])
    }

    #[test]
    fn factor_spec_arithmetic() {
        let mut r = rng(1);
        let s = make_factor_spec(16, 4.0, 0.0, &mut r).unwrap();
        assert_relative_eq!(s.mu_f, 2.0, epsilon = 1e-13);
        assert_eq!(s.sigma_f, 0.0);
        assert_relative_eq!(s.population_mean().norm_squared(), 4.0, epsilon = 1e-12);

        let s = make_factor_spec(16, 4.0, 1.0, &mut r).unwrap();
        assert_relative_eq!(s.mu_f, 8.0f64.sqrt(), epsilon = 1e-13);
        assert_relative_eq!(s.theta(), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn implied_theta_matches_direct_solve() {
        // mu' inv(Sigma) mu via a dense Cholesky agrees with the target.
        let mut r = rng(2);
        for phi in [0.0, 0.7, 5.0] {
            let s = make_factor_spec(12, 2.5, phi, &mut r).unwrap();
            let n = s.b.len();
            let sigma = &s.b * s.b.transpose() * (s.sigma_f * s.sigma_f)
                + DMatrix::identity(n, n) * (s.sigma_eps * s.sigma_eps);
            let mu = s.population_mean();
            let direct = mu.dot(&Cholesky::new(sigma).unwrap().solve(&mu));
            assert_relative_eq!(direct, 2.5, max_relative = 1e-10);
            assert_relative_eq!(s.theta(), 2.5, max_relative = 1e-12);
            assert_relative_eq!(s.phi(), phi, max_relative = 1e-12);
        }
    }

    #[test]
    fn generator_moments_recover_population() {
        let mut r = rng(3);
        let n = 8;
        let s = make_factor_spec(n, 4.0, 1.5, &mut r).unwrap();
        let t = 100_000;
        let panel = generate_returns(&s, t, &mut r).unwrap();
        let m = crate::moments::estimate_moments(&panel).unwrap();
        let mu = s.population_mean();
        // componentwise CLT bound: 4 standard errors of the mean
        for j in 0..n {
            let sd_j = (s.sigma_f * s.sigma_f * s.b[j] * s.b[j]
                + s.sigma_eps * s.sigma_eps)
                .sqrt();
            let se = sd_j / (t as f64).sqrt();
            assert!(
                (m.mean[j] - mu[j]).abs() < 4.0 * se,
                "component {j}: {} vs {}",
                m.mean[j],
                mu[j]
            );
        }
        // covariance recovery within 5% Frobenius
        let pop = &s.b * s.b.transpose() * (s.sigma_f * s.sigma_f)
            + DMatrix::identity(n, n) * (s.sigma_eps * s.sigma_eps);
        let rel = (&m.cov - &pop).norm() / pop.norm();
        assert!(rel < 0.05, "relative Frobenius gap {rel}");
    }

    #[test]
    fn near_noiseless_rows_align_with_loadings() {
        let mut r = rng(4);
        let mut s = make_factor_spec(5, 1.0, 0.0, &mut r).unwrap();
        s.sigma_eps = 1e-9;
        let panel = generate_returns(&s, 4, &mut r).unwrap();
        let expected = s.population_mean();
        for row in 0..4 {
            for c in 0..5 {
                assert_relative_eq!(
                    panel.values()[(row, c)],
                    expected[c],
                    epsilon = 1e-6
                );
            }
        }
    }

    #[test]
    fn student_t_noise_is_standardized() {
        let mut r = rng(5);
        let mut acc = 0.0;
        let mut acc2 = 0.0;
        let n = 200_000;
        for _ in 0..n {
            let v = NoiseKind::StudentT8.sample(&mut r);
            acc += v;
            acc2 += v * v;
        }
        let mean = acc / n as f64;
        let var = acc2 / n as f64 - mean * mean;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    fn small_cfg() -> SweepConfig {
        SweepConfig {
            t: 60,
            n_list: vec![12, 30],
            phi_list: vec![0.0, 1.0],
            theta_of_n: ThetaOfN::Constant(4.0),
            reps: 24,
            seed: 99,
            sigma: 1.0,
            noise: NoiseKind::Gaussian,
            redraw_loadings: false,
        }
    }

    #[test]
    fn sweep_is_deterministic_and_thread_invariant() {
        let cfg = small_cfg();
        let a = run_sweep(&cfg).unwrap();
        let b = run_sweep(&cfg).unwrap();
        assert_eq!(a, b);

        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let c = pool.install(|| run_sweep(&cfg).unwrap());
        assert_eq!(a, c);
    }

    #[test]
    fn sweep_losses_nonnegative_and_ses_finite() {
        let rows = run_sweep(&small_cfg()).unwrap();
        for r in &rows {
            assert!(r.avg_loss >= 0.0);
            assert!(r.se_sr.is_finite() && r.se_loss.is_finite());
        }
    }

    #[test]
    fn single_rep_has_zero_se() {
        let mut cfg = small_cfg();
        cfg.reps = 1;
        let rows = run_sweep(&cfg).unwrap();
        assert!(rows.iter().all(|r| r.se_sr == 0.0 && r.se_loss == 0.0));
    }

    #[test]
    fn sweep_matches_theorem_at_moderate_t() {
        // T = 100, N = 50, phi = 0, theta = 4: the Sharpe average sits
        // within 0.08 of the rho = 0.5 limit 4/3.
        let cfg = SweepConfig {
            t: 100,
            n_list: vec![50],
            phi_list: vec![0.0],
            theta_of_n: ThetaOfN::Constant(4.0),
            reps: 1000,
            seed: 7,
            sigma: 1.0,
            noise: NoiseKind::Gaussian,
            redraw_loadings: false,
        };
        let rows = run_sweep(&cfg).unwrap();
        assert_relative_eq!(rows[0].asy_sr, 4.0 / 3.0, epsilon = 1e-12);
        assert!(
            (rows[0].avg_sr - 4.0 / 3.0).abs() < 0.08,
            "avg {} vs 4/3",
            rows[0].avg_sr
        );
    }

    #[test]
    fn theta_hat_consistency_mc() {
        // Factorless theta = 4 at T = 400, N = 120: the branch estimator's
        // mean over 200 replications lands within 0.15 of the target.
        let t = 400;
        let n = 120;
        let mut acc = 0.0;
        let reps = 200;
        for rep in 0..reps {
            let mut brng = derive_rng(11, &[1, rep]);
            let spec = make_factor_spec(n, 4.0, 0.0, &mut brng).unwrap();
            let mut rng = derive_rng(11, &[2, rep]);
            let panel = generate_returns(&spec, t, &mut rng).unwrap();
            let lr = LowRankMoments::from_panel(&panel).unwrap();
            let th = crate::moments::theta_hat_from_theta_s(
                lr.theta_s(),
                n as f64 / t as f64,
                None,
            )
            .unwrap();
            acc += th;
        }
        let mean = acc / reps as f64;
        assert!((mean - 4.0).abs() < 0.15, "mean theta_hat {mean}");
    }

    #[test]
    fn phi_hat_pure_noise_range() {
        // Sigma = I, T = 500, N = 50: the leading eigenvalue sits near the
        // MP edge (1 + sqrt(0.1))^2 ~ 1.73 over residual variance ~ 1.
        let mut r = rng(12);
        let spec = make_factor_spec(50, 1e-6, 0.0, &mut r).unwrap();
        let panel = generate_returns(&spec, 500, &mut r).unwrap();
        let lr = LowRankMoments::from_panel(&panel).unwrap();
        let phi = lr.phi_hat().unwrap();
        assert!((1.0..=2.5).contains(&phi), "phi_hat {phi}");
    }

    #[test]
    fn phi_hat_strong_factor_recovery() {
        // sigma_f^2 = log T, T = 500, N = 250. The estimator's expectation
        // is inflated above sigma_f^2 by the spiked-eigenvalue bias
        // (1 + sigma_f^2)(1 + rho / sigma_f^2) / sigma_f^2 ~ 1.25, so the
        // recovery bound is the Monte-Carlo-derived 35%, not the naive 20%.
        let t = 500;
        let n = 250;
        let sf2 = (t as f64).ln();
        let mut acc = 0.0;
        let reps = 10;
        for rep in 0..reps {
            let mut brng = derive_rng(13, &[1, rep]);
            let spec = make_factor_spec(n, 4.0, sf2, &mut brng).unwrap();
            let mut rng = derive_rng(13, &[2, rep]);
            let panel = generate_returns(&spec, t, &mut rng).unwrap();
            let lr = LowRankMoments::from_panel(&panel).unwrap();
            acc += lr.phi_hat().unwrap();
        }
        let mean = acc / reps as f64;
        assert!(
            (mean - sf2).abs() / sf2 < 0.35,
            "phi_hat mean {mean} vs sigma_f^2 {sf2}"
        );
        // and it tracks the spike-inflation prediction closely
        let ell = 1.0 + sf2;
        let rho = n as f64 / t as f64;
        let predicted = ell * (1.0 + rho / (ell - 1.0));
        assert!(
            (mean - predicted).abs() / predicted < 0.05,
            "phi_hat mean {mean} vs spiked prediction {predicted}"
        );
    }

    #[test]
    fn convergence_in_t_toward_the_limit() {
        // Doubling T at fixed rho shrinks the average |avg_sr - asy_sr|
        // (within one joint standard error of non-increase).
        let gaps: Vec<(f64, f64)> = [100usize, 200, 400]
            .iter()
            .map(|&t| {
                let cfg = SweepConfig {
                    t,
                    n_list: vec![t / 2, 2 * t],
                    phi_list: vec![1.0],
                    theta_of_n: ThetaOfN::Constant(4.0),
                    reps: 200,
                    seed: 21,
                    sigma: 1.0,
                    noise: NoiseKind::Gaussian,
                    redraw_loadings: false,
                };
                let rows = run_sweep(&cfg).unwrap();
                let gap = rows
                    .iter()
                    .map(|r| (r.avg_sr - r.asy_sr).abs())
                    .sum::<f64>()
                    / rows.len() as f64;
                let se = rows.iter().map(|r| r.se_sr).sum::<f64>() / rows.len() as f64;
                (gap, se)
            })
            .collect();
        let (g100, se100) = gaps[0];
        let (g400, se400) = gaps[2];
        let joint_se = (se100 * se100 + se400 * se400).sqrt();
        assert!(
            g400 <= g100 + joint_se,
            "gap did not shrink: {g100} -> {g400} (joint se {joint_se})"
        );
    }
}

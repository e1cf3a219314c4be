//! Ridge-regularized limits driven by the Marchenko-Pastur fixed point.
//!
//! The Stieltjes transform `m(-lambda)` of the limiting sample-covariance
//! spectrum solves the standard self-consistency equation
//!
//! ```text
//! m(z) = integral dH(tau) / (tau (1 - rho - rho z m(z)) - z)
//! ```
//!
//! evaluated at `z = -lambda`. From it the intermediate quantities
//! `m'(-lambda)` (implicit differentiation), `m1(-lambda)`, and the
//! Theta/Phi blocks are assembled, giving the limiting Sharpe ratio
//! `Phi1 / sqrt(Phi2 + rho Theta2)` and the matching prediction loss.

use crate::error::{Error, Result};

/// A discrete spectral law: atoms `(location, weight)` with weights
/// summing to one, sorted ascending by location.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMeasure {
    atoms: Vec<(f64, f64)>,
}

impl SpectralMeasure {
    pub fn new(mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Invalid("spectral measure needs at least one atom".into()));
        }
        for &(tau, p) in &atoms {
            if !(tau > 0.0) || !tau.is_finite() {
                return Err(Error::Invalid(format!(
                    "atom location must be positive and finite, got {tau}"
                )));
            }
            if !(p >= 0.0) || !p.is_finite() {
                return Err(Error::Invalid(format!(
                    "atom weight must be nonnegative, got {p}"
                )));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Invalid(format!(
                "atom weights must sum to 1, got {total}"
            )));
        }
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        Ok(Self { atoms })
    }

    /// Unit mass at a single location.
    pub fn point_mass(tau: f64) -> Result<Self> {
        Self::new(vec![(tau, 1.0)])
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|(t, p)| t * p).sum()
    }

    fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.atoms.iter().map(|&(t, p)| p * f(t)).sum()
    }
}

const MAX_ITERS: usize = 10_000;

/// Solve the self-consistency equation for `m(-lambda)`.
///
/// For `rho < 1` a damped fixed-point iteration on `m` converges from
/// `m0 = 1 / (lambda + mean(H))`. For `rho > 1` that map has a spurious
/// branch at small `lambda` (the true `m` grows like `(1 - 1/rho)/lambda`),
/// so the iteration runs on the companion transform
/// `r = rho m - (rho - 1)/lambda`, which solves
/// `1/r = lambda + rho * integral tau / (1 + tau r) dH` and stays bounded.
/// A terminal Newton polish drives the residual to machine precision.
pub fn mp_stieltjes(h: &SpectralMeasure, rho: f64, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Invalid(format!("lambda must be positive, got {lambda}")));
    }
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::Invalid(format!("rho must be positive, got {rho}")));
    }
    let eta = 0.5;
    let mut m;
    if rho <= 1.0 {
        m = 1.0 / (lambda + h.mean());
        let mut converged = false;
        for _ in 0..MAX_ITERS {
            let next = (1.0 - eta) * m + eta * rhs_m(h, rho, lambda, m);
            if (next - m).abs() <= 1e-14 * next.abs().max(1.0) {
                m = next;
                converged = true;
                break;
            }
            m = next;
        }
        if !converged {
            return Err(Error::Solver(format!(
                "fixed point for m(-{lambda}) did not converge in {MAX_ITERS} iterations"
            )));
        }
    } else {
        let mut r = 1.0 / (lambda + rho * h.mean());
        let mut converged = false;
        for _ in 0..MAX_ITERS {
            let j = h.integrate(|t| t / (1.0 + t * r));
            let next = (1.0 - eta) * r + eta / (lambda + rho * j);
            if (next - r).abs() <= 1e-14 * next.abs().max(1.0) {
                r = next;
                converged = true;
                break;
            }
            r = next;
        }
        if !converged {
            return Err(Error::Solver(format!(
                "companion fixed point for m(-{lambda}) did not converge in {MAX_ITERS} iterations"
            )));
        }
        m = (r + (rho - 1.0) / lambda) / rho;
    }
    // Newton polish: Psi(m) = m - rhs(m) has derivative > 1 near the root.
    for _ in 0..64 {
        let u = 1.0 - rho + rho * lambda * m;
        let f = m - h.integrate(|t| 1.0 / (t * u + lambda));
        let fp = 1.0 + rho * lambda * h.integrate(|t| t / (t * u + lambda).powi(2));
        let step = f / fp;
        m -= step;
        if step.abs() <= f64::EPSILON * m.abs().max(1.0) {
            break;
        }
    }
    let resid = residual(h, rho, lambda, m);
    if resid.abs() > 1e-10 * m.abs().max(1.0) {
        return Err(Error::Solver(format!(
            "fixed point residual {resid} too large at m = {m}"
        )));
    }
    Ok(m)
}

fn rhs_m(h: &SpectralMeasure, rho: f64, lambda: f64, m: f64) -> f64 {
    let u = 1.0 - rho + rho * lambda * m;
    h.integrate(|t| 1.0 / (t * u + lambda))
}

/// Residual of the self-consistency equation at a candidate `m`.
pub fn residual(h: &SpectralMeasure, rho: f64, lambda: f64, m: f64) -> f64 {
    m - rhs_m(h, rho, lambda, m)
}

/// Inputs to the ridge limit evaluation.
#[derive(Debug, Clone)]
pub struct RidgeInputs {
    /// Limiting spectral law of the population covariance.
    pub h: SpectralMeasure,
    /// Limiting law of the squared mean projections onto the eigenbasis.
    pub g: SpectralMeasure,
    /// Ridge penalty, > 0.
    pub lambda: f64,
    /// Aspect ratio limit.
    pub rho: f64,
    /// Limit of the squared mean norm.
    pub xi2: f64,
    /// Squared clairvoyant Sharpe ratio (enters only the loss).
    pub theta_tilde: f64,
    /// Risk budget.
    pub sigma: f64,
}

impl RidgeInputs {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::Invalid(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        for (name, v) in [
            ("rho", self.rho),
            ("xi2", self.xi2),
            ("theta_tilde", self.theta_tilde),
            ("sigma", self.sigma),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Invalid(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Outputs of the ridge limit evaluation.
#[derive(Debug, Clone, Copy)]
pub struct RidgeLimits {
    pub m: f64,
    pub m_prime: f64,
    pub m1: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub phi1: f64,
    pub phi2: f64,
    pub sr: f64,
    pub loss: f64,
}

/// Evaluate the ridge-regularized Sharpe and loss limits.
///
/// `m'(-lambda)` comes from implicit differentiation of the fixed-point
/// equation, which is exact; a finite-difference cross-check lives in the
/// tests. With `u = 1 - rho + rho lambda m`:
///
/// - `Theta1 = (1 - lambda m) / u`
/// - `Theta2 = (1 - lambda m)/u^3 - lambda (m - lambda m')/u^4`
/// - `Phi1 = xi2 * integral dG / (tau u + lambda)`
/// - `Phi2 = xi2 (1 + rho m1) * integral tau dG / (tau u + lambda)^2`
pub fn ridge_limits(inp: &RidgeInputs) -> Result<RidgeLimits> {
    inp.validate()?;
    let rho = inp.rho;
    let lambda = inp.lambda;
    let m = mp_stieltjes(&inp.h, rho, lambda)?;
    let u = 1.0 - rho + rho * lambda * m;

    let i0 = inp.h.integrate(|t| 1.0 / (t * u + lambda).powi(2));
    let i2 = inp.h.integrate(|t| t / (t * u + lambda).powi(2));
    let i22 = inp.h.integrate(|t| t * t / (t * u + lambda).powi(2));
    let denom = 1.0 + rho * lambda * i2;
    let m_prime = (i0 + rho * m * i2) / denom;
    let m1 = u * i22 / denom;

    let theta1 = (1.0 - lambda * m) / u;
    let theta2 =
        (1.0 - lambda * m) / u.powi(3) - lambda * (m - lambda * m_prime) / u.powi(4);
    let phi1 = inp.xi2 * inp.g.integrate(|t| 1.0 / (t * u + lambda));
    let phi2 =
        inp.xi2 * (1.0 + rho * m1) * inp.g.integrate(|t| t / (t * u + lambda).powi(2));

    let sr = phi1 / (phi2 + rho * theta2).sqrt();
    let q = phi1 + rho * theta1;
    let th = inp.theta_tilde;
    let s2 = inp.sigma * inp.sigma;
    let loss = s2
        * ((phi1 * phi1 + phi2 + rho * theta2) / q
            - 2.0 * phi1 * (1.0 + th) / (q.sqrt() * th.sqrt())
            + 1.0
            + th);
    Ok(RidgeLimits {
        m,
        m_prime,
        m1,
        theta1,
        theta2,
        phi1,
        phi2,
        sr,
        loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn delta1() -> SpectralMeasure {
        SpectralMeasure::point_mass(1.0).unwrap()
    }

    /// Positive root of `rho lambda m^2 + (1 - rho + lambda) m - 1 = 0`,
    /// the closed form for a point-mass population spectrum.
    fn quadratic_root(rho: f64, lambda: f64) -> f64 {
        let b = 1.0 - rho + lambda;
        (-b + (b * b + 4.0 * rho * lambda).sqrt()) / (2.0 * rho * lambda)
    }

    #[test]
    fn fixed_point_matches_quadratic_oracle() {
        for rho in [0.1, 0.5, 0.9, 1.5, 2.0, 4.0, 10.0] {
            for lambda in [1e-4, 1e-2, 0.1, 0.5, 1.0, 10.0, 1e3] {
                let m = mp_stieltjes(&delta1(), rho, lambda).unwrap();
                let q = quadratic_root(rho, lambda);
                assert_relative_eq!(m, q, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn fixed_point_residual_is_tiny() {
        for rho in [0.5, 2.0] {
            for lambda in [1e-4, 0.5, 5.0] {
                let m = mp_stieltjes(&delta1(), rho, lambda).unwrap();
                let r = residual(&delta1(), rho, lambda, m);
                assert!(
                    r.abs() < 1e-12 * m.abs().max(1.0),
                    "rho={rho} lambda={lambda} residual={r}"
                );
            }
        }
    }

    #[test]
    fn large_lambda_resolvent_behavior() {
        let h = SpectralMeasure::new(vec![(0.5, 0.3), (1.0, 0.4), (2.5, 0.3)]).unwrap();
        for rho in [0.5, 3.0] {
            let lambda = 1e8;
            let m = mp_stieltjes(&h, rho, lambda).unwrap();
            assert!(m.abs() < 1e-7);
            assert_relative_eq!(lambda * m, 1.0, max_relative = 1e-6);
        }
    }

    #[test]
    fn implicit_derivative_matches_finite_difference() {
        let h = SpectralMeasure::new(vec![(0.7, 0.5), (1.8, 0.5)]).unwrap();
        for rho in [0.4, 2.5] {
            for lambda in [0.2, 1.0] {
                let g = delta1();
                let inp = RidgeInputs {
                    h: h.clone(),
                    g,
                    lambda,
                    rho,
                    xi2: 1.0,
                    theta_tilde: 1.0,
                    sigma: 1.0,
                };
                let lim = ridge_limits(&inp).unwrap();
                // m'(z) at z = -lambda equals -dm/dlambda
                let eps = lambda * 1e-6;
                let m_plus = mp_stieltjes(&h, rho, lambda + eps).unwrap();
                let m_minus = mp_stieltjes(&h, rho, lambda - eps).unwrap();
                let fd = -(m_plus - m_minus) / (2.0 * eps);
                assert_relative_eq!(lim.m_prime, fd, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn infinite_shrinkage_kills_the_signal() {
        // Phi1 decays like 1/lambda, and the SR like 1/sqrt(lambda).
        let at = |lambda: f64| {
            ridge_limits(&RidgeInputs {
                h: delta1(),
                g: delta1(),
                lambda,
                rho: 0.5,
                xi2: 4.0,
                theta_tilde: 4.0,
                sigma: 1.0,
            })
            .unwrap()
        };
        let big = at(1e9);
        assert!(big.phi1 < 1e-8);
        assert!(big.sr < 1e-3);
        let srs: Vec<f64> = [1e0, 1e3, 1e6, 1e9].iter().map(|&l| at(l).sr).collect();
        assert!(srs.windows(2).all(|w| w[1] < w[0]), "{srs:?}");
    }

    #[test]
    fn ridgeless_limit_recovers_pseudoinverse_sharpe() {
        // rho = 0.5, xi2 = theta = 4: the lambda -> 0 ridge SR approaches the
        // factorless pseudoinverse limit 4/3.
        let inp = RidgeInputs {
            h: delta1(),
            g: delta1(),
            lambda: 1e-4,
            rho: 0.5,
            xi2: 4.0,
            theta_tilde: 4.0,
            sigma: 1.0,
        };
        let lim = ridge_limits(&inp).unwrap();
        assert!((lim.sr - 4.0 / 3.0).abs() < 1e-2, "sr = {}", lim.sr);
    }

    #[test]
    fn closed_form_block_values_at_small_lambda() {
        // As lambda -> 0 with rho < 1: Theta1 -> 1/(1-rho), Theta2 -> 1/(1-rho)^3,
        // Phi1 -> xi2/(1-rho), Phi2 -> xi2/(1-rho)^3.
        let rho = 0.5;
        let inp = RidgeInputs {
            h: delta1(),
            g: delta1(),
            lambda: 1e-7,
            rho,
            xi2: 4.0,
            theta_tilde: 4.0,
            sigma: 1.0,
        };
        let lim = ridge_limits(&inp).unwrap();
        assert_relative_eq!(lim.theta1, 2.0, max_relative = 1e-3);
        assert_relative_eq!(lim.theta2, 8.0, max_relative = 1e-3);
        assert_relative_eq!(lim.phi1, 8.0, max_relative = 1e-3);
        assert_relative_eq!(lim.phi2, 32.0, max_relative = 1e-3);
    }
}

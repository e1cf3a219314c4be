//! Marchenko-Pastur spectral quantities for sample covariance matrices of
//! data with identity (or scaled-identity) population covariance.

use crate::error::{Error, Result};

/// Bulk support edges `((1 - sqrt(rho))^2, (1 + sqrt(rho))^2)`.
///
/// For `rho > 1` the same formulas describe the bulk of nonzero
/// eigenvalues; the mass at zero is reported by [`mp_zero_mass`].
pub fn mp_support(rho: f64) -> (f64, f64) {
    let s = rho.sqrt();
    ((1.0 - s) * (1.0 - s), (1.0 + s) * (1.0 + s))
}

/// Point mass at zero of the spectral law: `max(0, 1 - 1/rho)`.
pub fn mp_zero_mass(rho: f64) -> f64 {
    (1.0 - 1.0 / rho).max(0.0)
}

/// Density of the bulk: `sqrt((b - x)(x - a)) / (2 pi rho x)` on `[a, b]`,
/// zero outside. Integrates to 1 for `rho <= 1` and to `1/rho` for
/// `rho > 1` (the remaining mass sits at zero).
pub fn mp_density(x: f64, rho: f64) -> f64 {
    let (a, b) = mp_support(rho);
    if x <= a || x >= b {
        return 0.0;
    }
    ((b - x) * (x - a)).sqrt() / (2.0 * std::f64::consts::PI * rho * x)
}

/// CDF of the bulk at `x`, by quadrature of [`mp_density`] under the
/// substitution `x = (a+b)/2 + (b-a)/2 sin t` that removes the edge
/// square-root singularities. Does not include the zero point mass.
pub fn mp_bulk_cdf(x: f64, rho: f64) -> f64 {
    let (a, b) = mp_support(rho);
    if x <= a {
        return 0.0;
    }
    let hi = x.min(b);
    integrate_bulk(rho, a, hi)
}

fn integrate_bulk(rho: f64, lo: f64, hi: f64) -> f64 {
    let (a, b) = mp_support(rho);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let to_t = |x: f64| ((x - mid) / half).clamp(-1.0, 1.0).asin();
    let t0 = to_t(lo);
    let t1 = to_t(hi);
    // Simpson on the transformed integrand, which is smooth.
    let f = |t: f64| {
        let x = mid + half * t.sin();
        mp_density(x, rho) * half * t.cos()
    };
    simpson(f, t0, t1, 4000)
}

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = if n % 2 == 0 { n } else { n + 1 };
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Limit of the smallest nonzero sample eigenvalue:
/// `sigma_eps^2 (1 - sqrt(rho))^2`.
///
/// A single bounded-rank spike (a common factor) does not move the lower
/// bulk edge, so the optional spike parameters only contribute their
/// idiosyncratic scale.
pub fn smallest_nonzero_eig_limit(rho: f64, spike: Option<(f64, f64, f64)>) -> Result<f64> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::Invalid(format!("rho must be positive, got {rho}")));
    }
    if (rho - 1.0).abs() < crate::moments::RHO_ONE_WINDOW {
        return Err(Error::UnsupportedAspectRatio(rho));
    }
    let sigma_eps2 = match spike {
        Some((sigma_f2, b_norm2, sigma_eps2)) => {
            if !(sigma_eps2 > 0.0) || sigma_f2 < 0.0 || b_norm2 < 0.0 {
                return Err(Error::Invalid("spike parameters must be nonnegative with positive idiosyncratic variance".into()));
            }
            sigma_eps2
        }
        None => 1.0,
    };
    let s = rho.sqrt();
    Ok(sigma_eps2 * (1.0 - s) * (1.0 - s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn support_anchors() {
        let (a, b) = mp_support(0.25);
        assert_relative_eq!(a, 0.25, epsilon = 1e-14);
        assert_relative_eq!(b, 2.25, epsilon = 1e-14);
        let (a, b) = mp_support(1.0);
        assert_relative_eq!(a, 0.0, epsilon = 1e-14);
        assert_relative_eq!(b, 4.0, epsilon = 1e-14);
        let (a, b) = mp_support(4.0);
        assert_relative_eq!(a, 1.0, epsilon = 1e-14);
        assert_relative_eq!(b, 9.0, epsilon = 1e-14);
    }

    #[test]
    fn density_zero_outside_support() {
        assert_eq!(mp_density(0.1, 0.25), 0.0);
        assert_eq!(mp_density(3.0, 0.25), 0.0);
        assert!(mp_density(1.0, 0.25) > 0.0);
    }

    #[test]
    fn density_normalization() {
        // total bulk mass: 1 for rho <= 1, 1/rho above
        let total = mp_bulk_cdf(f64::INFINITY, 0.5);
        assert!((total - 1.0).abs() < 1e-6, "mass {total}");
        let total = mp_bulk_cdf(f64::INFINITY, 2.0);
        assert!((total - 0.5).abs() < 1e-6, "mass {total}");
        assert_relative_eq!(mp_zero_mass(2.0), 0.5, epsilon = 1e-14);
        assert_eq!(mp_zero_mass(0.5), 0.0);
    }

    #[test]
    fn smallest_eig_anchors() {
        assert_relative_eq!(smallest_nonzero_eig_limit(4.0, None).unwrap(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(
            smallest_nonzero_eig_limit(0.25, None).unwrap(),
            0.25,
            epsilon = 1e-14
        );
        // spike leaves the edge; idiosyncratic scale applies
        assert_relative_eq!(
            smallest_nonzero_eig_limit(4.0, Some((10.0, 1.0, 2.0))).unwrap(),
            2.0,
            epsilon = 1e-14
        );
    }
}

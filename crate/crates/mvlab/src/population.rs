//! Known-population quantities: exact out-of-sample Sharpe ratio,
//! prediction loss against the optimal portfolio, and the eigen-portfolio
//! decomposition of the optimal weights.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::sym_eigen_desc;
use crate::weights::{optimal_weights, Weights};

/// Population mean and positive-definite covariance.
#[derive(Debug, Clone)]
pub struct PopulationModel {
    pub mu: DVector<f64>,
    pub sigma_mat: DMatrix<f64>,
    chol: Cholesky<f64, nalgebra::Dyn>,
}

impl PopulationModel {
    pub fn new(mu: DVector<f64>, sigma_mat: DMatrix<f64>) -> Result<Self> {
        let n = mu.len();
        if sigma_mat.nrows() != n || sigma_mat.ncols() != n {
            return Err(Error::Invalid(format!(
                "covariance is {}x{}, expected {n}x{n}",
                sigma_mat.nrows(),
                sigma_mat.ncols()
            )));
        }
        if mu.iter().chain(sigma_mat.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Invalid("non-finite population parameter".into()));
        }
        let asym = (&sigma_mat - sigma_mat.transpose()).norm();
        if asym > 1e-10 * sigma_mat.norm().max(1.0) {
            return Err(Error::Invalid("covariance is not symmetric".into()));
        }
        let chol = Cholesky::new(sigma_mat.clone()).ok_or_else(|| {
            Error::Invalid("covariance is not positive definite".into())
        })?;
        Ok(Self { mu, sigma_mat, chol })
    }

    pub fn n_assets(&self) -> usize {
        self.mu.len()
    }

    /// Solve `Sigma x = b`.
    pub fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.chol.solve(b))
    }

    /// Squared clairvoyant Sharpe ratio `theta = mu' inv(Sigma) mu`.
    pub fn theta(&self) -> f64 {
        self.mu.dot(&self.chol.solve(&self.mu))
    }

    /// Quadratic form `w' Sigma w`.
    pub fn variance_of(&self, w: &DVector<f64>) -> f64 {
        w.dot(&(&self.sigma_mat * w))
    }
}

/// Out-of-sample Sharpe ratio `w' mu / sqrt(w' Sigma w)`. Scale invariant.
pub fn oos_sharpe(w: &Weights, pop: &PopulationModel) -> Result<f64> {
    let var = pop.variance_of(&w.w);
    if var <= 0.0 {
        return Err(Error::ZeroRisk);
    }
    Ok(w.w.dot(&pop.mu) / var.sqrt())
}

/// Out-of-sample prediction loss
/// `(w - w*)' (Sigma + mu mu') (w - w*)`, with `w*` the optimal weights at
/// risk budget `sigma`. Zero exactly at the optimum.
pub fn oos_loss(w: &Weights, pop: &PopulationModel, sigma: f64) -> Result<f64> {
    let wstar = optimal_weights(pop, sigma)?;
    let d = &w.w - &wstar.w;
    Ok(pop.variance_of(&d) + d.dot(&pop.mu).powi(2))
}

/// One principal-component direction of the optimal portfolio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenPortfolio {
    /// Population eigenvalue (variance of the eigen-portfolio).
    pub eigenvalue: f64,
    /// Sharpe ratio of the eigen-portfolio, `v' mu / sqrt(tau)`.
    pub sharpe: f64,
    /// Loading of the optimal weights on this direction, `sharpe / sqrt(tau)`.
    pub loading: f64,
}

/// Spectral decomposition of the optimal portfolio: per-direction Sharpe
/// ratios and loadings. The squared Sharpe ratios sum to theta, and the
/// loading-weighted eigenvectors rebuild `inv(Sigma) mu`.
pub fn eigen_portfolio_decomposition(pop: &PopulationModel) -> Result<Vec<EigenPortfolio>> {
    let (vals, vecs) = sym_eigen_desc(&pop.sigma_mat);
    if vals[vals.len() - 1] <= 0.0 {
        return Err(Error::Invalid("covariance is not positive definite".into()));
    }
    Ok((0..vals.len())
        .map(|i| {
            let tau = vals[i];
            let sr = vecs.column(i).dot(&pop.mu) / tau.sqrt();
            EigenPortfolio {
                eigenvalue: tau,
                sharpe: sr,
                loading: sr / tau.sqrt(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_spd(n: usize, seed: u64) -> (DVector<f64>, DMatrix<f64>) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(n, n, |_, _| {
            <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
        });
        let spd = &a * a.transpose() + DMatrix::identity(n, n) * 0.5;
        let mu = DVector::from_fn(n, |_, _| rng.gen_range(-0.2..0.3));
        (mu, spd)
    }

    #[test]
    fn sharpe_of_optimum_is_sqrt_theta() {
        let (mu, spd) = random_spd(5, 1);
        let pop = PopulationModel::new(mu, spd).unwrap();
        let w = optimal_weights(&pop, 0.7).unwrap();
        let sr = oos_sharpe(&w, &pop).unwrap();
        assert_relative_eq!(sr, pop.theta().sqrt(), max_relative = 1e-10);
        // risk budget met exactly
        assert_relative_eq!(pop.variance_of(&w.w).sqrt(), 0.7, max_relative = 1e-10);
    }

    #[test]
    fn sharpe_identity_cov_component() {
        let pop = PopulationModel::new(
            DVector::from_column_slice(&[0.3, 0.4]),
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let w = Weights::new(DVector::from_column_slice(&[1.0, 0.0]), 1.0).unwrap();
        assert_relative_eq!(oos_sharpe(&w, &pop).unwrap(), 0.3, epsilon = 1e-15);
    }

    #[test]
    fn sharpe_matches_eigen_path_oracle() {
        let (mu, spd) = random_spd(6, 2);
        let pop = PopulationModel::new(mu.clone(), spd.clone()).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let w = Weights::new(
            DVector::from_fn(6, |_, _| rng.gen_range(-1.0..1.0)),
            1.0,
        )
        .unwrap();
        // independent path: quadratic form through the eigendecomposition
        let (vals, vecs) = crate::linalg::sym_eigen_desc(&spd);
        let proj = vecs.transpose() * &w.w;
        let var: f64 = proj.iter().zip(vals.iter()).map(|(p, l)| p * p * l).sum();
        let oracle = w.w.dot(&mu) / var.sqrt();
        assert_relative_eq!(oos_sharpe(&w, &pop).unwrap(), oracle, max_relative = 1e-12);
    }

    #[test]
    fn sharpe_scale_invariance() {
        let (mu, spd) = random_spd(4, 4);
        let pop = PopulationModel::new(mu, spd).unwrap();
        let w = Weights::new(DVector::from_column_slice(&[0.1, -0.2, 0.4, 0.05]), 1.0).unwrap();
        let w3 = Weights::new(&w.w * 3.0, 1.0).unwrap();
        assert_relative_eq!(
            oos_sharpe(&w, &pop).unwrap(),
            oos_sharpe(&w3, &pop).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn loss_zero_at_optimum_and_scaled_case() {
        let pop = PopulationModel::new(
            DVector::from_column_slice(&[0.2, 0.0]),
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let wstar = optimal_weights(&pop, 1.0).unwrap();
        assert!(oos_loss(&wstar, &pop, 1.0).unwrap().abs() < 1e-20);

        // w = 2 w*: difference is (1, 0), loss = (Sigma + mu mu')_{11} = 1.04
        let w2 = Weights::new(&wstar.w * 2.0, 1.0).unwrap();
        assert_relative_eq!(oos_loss(&w2, &pop, 1.0).unwrap(), 1.04, epsilon = 1e-12);
    }

    #[test]
    fn loss_matches_monte_carlo_expectation() {
        // E[(w' r - w*' r)^2] over simulated draws should match the closed form.
        let (mu, spd) = random_spd(4, 5);
        let pop = PopulationModel::new(mu.clone(), spd.clone()).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        let w = Weights::new(DVector::from_fn(4, |_, _| rng.gen_range(-1.0..1.0)), 1.0).unwrap();
        let sigma = 0.8;
        let exact = oos_loss(&w, &pop, sigma).unwrap();

        let wstar = optimal_weights(&pop, sigma).unwrap();
        let chol = Cholesky::new(spd).unwrap();
        let l = chol.l();
        let n_draws = 1_000_000;
        let mut acc = 0.0;
        let mut acc2 = 0.0;
        for _ in 0..n_draws {
            let z = DVector::from_fn(4, |_, _| {
                <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
            });
            let r = &mu + &l * z;
            let gap = w.w.dot(&r) - wstar.w.dot(&r);
            let sq = gap * gap;
            acc += sq;
            acc2 += sq * sq;
        }
        let mean = acc / n_draws as f64;
        let var = acc2 / n_draws as f64 - mean * mean;
        let se = (var / n_draws as f64).sqrt();
        assert!(
            (mean - exact).abs() <= 3.0 * se,
            "MC {mean} vs exact {exact} (3se = {})",
            3.0 * se
        );
    }

    #[test]
    fn loss_nonnegative_property() {
        let (mu, spd) = random_spd(5, 7);
        let pop = PopulationModel::new(mu, spd).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let w = Weights::new(DVector::from_fn(5, |_, _| rng.gen_range(-2.0..2.0)), 1.0)
                .unwrap();
            assert!(oos_loss(&w, &pop, 1.0).unwrap() >= 0.0);
        }
    }

    #[test]
    fn eigen_decomposition_identity_and_diagonal() {
        let mu = DVector::from_column_slice(&[0.1, 0.2, -0.05]);
        let pop = PopulationModel::new(mu.clone(), DMatrix::identity(3, 3)).unwrap();
        let parts = eigen_portfolio_decomposition(&pop).unwrap();
        let sum_sq: f64 = parts.iter().map(|p| p.sharpe * p.sharpe).sum();
        assert_relative_eq!(sum_sq, mu.norm_squared(), max_relative = 1e-12);

        let pop = PopulationModel::new(
            DVector::from_column_slice(&[0.1, 0.2]),
            DMatrix::from_diagonal(&DVector::from_column_slice(&[1.0, 4.0])),
        )
        .unwrap();
        let parts = eigen_portfolio_decomposition(&pop).unwrap();
        // descending eigenvalues: tau = (4, 1), SR = (0.2/2, 0.1/1) = (0.1, 0.1)
        assert_relative_eq!(parts[0].sharpe.abs(), 0.1, epsilon = 1e-12);
        assert_relative_eq!(parts[1].sharpe.abs(), 0.1, epsilon = 1e-12);
        let theta: f64 = parts.iter().map(|p| p.sharpe * p.sharpe).sum();
        assert_relative_eq!(theta, 0.02, epsilon = 1e-12);
    }

    #[test]
    fn eigen_decomposition_random_spd_oracle() {
        let (mu, spd) = random_spd(6, 9);
        let pop = PopulationModel::new(mu.clone(), spd.clone()).unwrap();
        let parts = eigen_portfolio_decomposition(&pop).unwrap();
        let sum_sq: f64 = parts.iter().map(|p| p.sharpe * p.sharpe).sum();
        let direct = mu.dot(&Cholesky::new(spd.clone()).unwrap().solve(&mu));
        assert_relative_eq!(sum_sq, direct, max_relative = 1e-10);

        // loading-weighted eigenvectors rebuild inv(Sigma) mu
        let (_, vecs) = crate::linalg::sym_eigen_desc(&spd);
        let mut rebuilt = DVector::zeros(6);
        for (i, p) in parts.iter().enumerate() {
            rebuilt += vecs.column(i) * p.loading;
        }
        let direct_dir = Cholesky::new(spd).unwrap().solve(&mu);
        assert!(crate::linalg::cosine(&rebuilt, &direct_dir) > 1.0 - 1e-12);
    }

    #[test]
    fn equal_weight_sharpe_direct_formula() {
        let (mu, spd) = random_spd(5, 10);
        let pop = PopulationModel::new(mu.clone(), spd.clone()).unwrap();
        let w = crate::weights::equal_weights(5, Some(&spd)).unwrap();
        let n = 5.0;
        let direct = (mu.sum() / n) / ((DVector::from_element(5, 1.0).transpose() * &spd
            * DVector::from_element(5, 1.0))[(0, 0)]
            / (n * n))
            .sqrt();
        assert_relative_eq!(oos_sharpe(&w, &pop).unwrap(), direct, max_relative = 1e-12);
    }
}

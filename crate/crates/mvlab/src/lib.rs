//! A numerical laboratory for mean-variance portfolios in high dimension.
//!
//! The crate centers on the pseudoinverse plug-in estimator of the optimal
//! mean-variance portfolio: weights proportional to `pinv(cov) * mean`,
//! rescaled so the estimated portfolio risk matches a target budget. Around
//! that estimator it provides
//!
//! - closed-form large-(N, T) limits of the out-of-sample Sharpe ratio,
//!   prediction loss, and return mean/SD, with and without a single common
//!   factor, plus ridge-regularized counterparts driven by a
//!   Marchenko-Pastur fixed point ([`asymptotics`]);
//! - a seeded Monte Carlo engine that sweeps (N, signal-to-noise) grids and
//!   compares finite-sample averages against the limits ([`montecarlo`]);
//! - characteristic-sorted test-asset construction and a rolling-window
//!   out-of-sample backtest with the usual metric table ([`backtest`]);
//! - a calibrator that backs out the clairvoyant Sharpe curve `sqrt(theta(N))`
//!   from an observed Sharpe-vs-N curve ([`calibration`]).
//!
//! Every randomized routine takes an explicit seed and is deterministic for
//! a fixed seed, independent of thread count. See the `examples/` directory
//! for one runnable program per capability; the `mvlab` binary exposes the
//! same functionality as subcommands.

pub mod asymptotics;
pub mod backtest;
pub mod calibration;
pub mod cli;
pub mod error;
pub mod moments;
pub mod montecarlo;
pub mod optim;
pub mod panel;
pub mod population;
pub mod rng;
pub mod table;
pub mod weights;

pub(crate) mod linalg;

pub use error::{Error, Result};
pub use moments::{estimate_moments, estimate_phi_hat, estimate_theta_hat, pseudo_inverse, MomentEstimate};
pub use panel::ReturnPanel;
pub use population::PopulationModel;
pub use weights::Weights;

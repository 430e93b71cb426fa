//! Split-BOLFI: likelihood-free inference with one Gaussian-process surrogate
//! and one Bayesian-optimisation acquisition per parameter, combined into a
//! factorised exponentiated-loss posterior proxy.
//!
//! Layout:
//! - [`gp`]: 1-D Matérn GP surrogates with MAP hyperparameters.
//! - [`acquisition`]: per-coordinate LCB acquisition.
//! - [`engine`]: the simulate / refit loop producing a [`engine::FitResult`].
//! - [`proxy`]: marginal proxies, their moments and KL distances.
//! - [`simulators`]: Gaussian, GVAR and daycare forward models.
//! - [`abc`]: the marginal rejection-ABC baseline.
//! - [`harness`]: configuration-driven experiment sweeps.

pub mod abc;
pub mod acquisition;
pub mod engine;
pub mod error;
pub mod gp;
pub mod harness;
pub mod optim;
pub mod proxy;
pub mod rng;
pub mod simulators;
pub mod space;

pub use error::{Error, Result};

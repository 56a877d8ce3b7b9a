//! Numerical lower bounds for tail probabilities of suprema of stationary
//! Gaussian sequences, the Brownian-motion boundary probabilities behind
//! them, and the parameter optimisation that yields a lower-bound curve for
//! the Pickands constants — together with seeded Monte Carlo machinery that
//! validates every identity and inequality in the chain at desk scale.
//!
//! Module map:
//! - [`special`]: normal CDF / log-CDF / log-gamma kernels.
//! - [`covariance`]: stationary correlation models and hypothesis checks.
//! - [`bm`]: Brownian motion boundary non-crossing (exact, bound shapes,
//!   path oracle, constant calibration).
//! - [`bounds`]: the three bound families and the walk-event probability.
//! - [`gp`]: Gaussian vector sampling and the conditioning/comparison
//!   validation suite.
//! - [`pickands`]: scalar optimisation and the H_alpha comparison curves.
//! - [`mc`], [`policy`], [`error`]: shared plumbing.

pub mod bm;
pub mod bounds;
pub mod covariance;
pub mod error;
pub mod gp;
pub mod mc;
pub mod pickands;
pub mod policy;
pub mod special;

pub use error::{Error, Result};
pub use mc::{McConfig, McEstimate};
pub use policy::{ConstantPolicy, ConstantsMode};

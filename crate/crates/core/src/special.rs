//! Standard-normal CDF, its logarithm, and the log-gamma function.
//!
//! Everything downstream multiplies long products of normal tail
//! probabilities, so the CDF must keep full relative accuracy deep into both
//! tails and a log-domain variant must stay finite where the linear one
//! underflows. The kernels are the erfc/lgamma routines from `libm` (the
//! usual SunPro-derived expansions); the log-domain CDF switches to a Mills
//! ratio asymptotic series for large negative arguments, where erfc itself
//! underflows.

use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Standard normal distribution function Phi(x).
///
/// Relative accuracy is at the level of the underlying erfc (a few ulp) for
/// |x| <= 8; the result saturates to exactly 0 or 1 in the extreme tails.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

/// log Phi(x), finite for all x down to well below -40.
///
/// For x >= -16 this is the plain logarithm of `normal_cdf` (erfc keeps full
/// relative precision there, and `ln_1p` handles the upper tail). Below -16
/// erfc approaches the underflow threshold, so we use the Mills ratio
/// asymptotic
///
/// log Phi(x) = -x^2/2 - log(-x) - log sqrt(2 pi)
///              + log(1 - 1/x^2 + 3/x^4 - 15/x^6 + ...),
///
/// whose truncation error at the switchover is ~1e-14 relative.
pub fn log_normal_cdf(x: f64) -> f64 {
    if x >= 8.0 {
        // Phi(x) near 1: log(1 - Phi(-x)) without losing the tiny tail.
        return (-normal_cdf(-x)).ln_1p();
    }
    if x >= -16.0 {
        return (0.5 * libm::erfc(-x * FRAC_1_SQRT_2)).ln();
    }
    let w = 1.0 / (x * x);
    // Odd double factorials with alternating signs: (-1)^k (2k-1)!! w^k.
    let series = 1.0
        + w * (-1.0
            + w * (3.0
                + w * (-15.0
                    + w * (105.0
                        + w * (-945.0
                            + w * (10395.0 + w * (-135135.0 + w * 2027025.0)))))));
    -0.5 * x * x - (-x).ln() - LN_SQRT_2PI + series.ln()
}

/// log Gamma(x) for x > 0.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!("log_gamma requires x > 0, got {x}")));
    }
    Ok(libm::lgamma(x))
}

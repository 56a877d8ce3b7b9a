//! Handling of the unspecified absolute constants.
//!
//! The bound statements carry implicit multiplicative constants ("greater
//! than up to a constant") and an unquantified big-Oh correction inside the
//! normal-CDF arguments. Neither is pinned down in closed form, so every
//! evaluator takes a [`ConstantPolicy`] choosing one of three regimes:
//!
//! - `Shape`: all implicit constants set to 1. Exposes the functional form
//!   for exploration; the result is not claimed to be a true lower bound.
//! - `Explicit`: only constants that appear explicitly in the proof chain
//!   (the 1/(12u) conditioning prefactor, the 1/(40u) variant, and the exact
//!   correction -r/(u^2(1-r)) in place of the big-Oh). The walk factor keeps
//!   its shape with unit constant.
//! - `Calibrated`: lemma constants divided down by the worst ratio observed
//!   on a fixed parameter grid times a safety factor, so the lemma bounds
//!   hold empirically everywhere on that grid. See `bm::calibration`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstantsMode {
    Shape,
    Explicit,
    Calibrated,
}

impl std::fmt::Display for ConstantsMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Shape => write!(f, "shape"),
            Self::Explicit => write!(f, "explicit"),
            Self::Calibrated => write!(f, "calibrated"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantPolicy {
    pub mode: ConstantsMode,
    /// Scale of the conservative big-Oh replacement -c/(u^2(1-r)) used in
    /// shape and calibrated modes. Explicit mode ignores it and uses the
    /// proof-exact correction instead.
    pub big_oh_constant: f64,
    /// Multiplier for the sloped-line lower bound (lemma 1 shape).
    pub lemma1_constant: f64,
    /// Multiplier for the bounded-slope lower bound (lemma 2 shape), valid at
    /// the shipped slope threshold.
    pub lemma2_constant: f64,
    /// Multiplier for the piecewise-boundary lower bound (lemma 3 shape).
    pub lemma3_constant: f64,
    /// Threshold H on |b| sqrt(t) below which lemma 1 refuses to evaluate.
    pub lemma1_threshold: f64,
}

impl ConstantPolicy {
    /// All implicit constants 1; the pure functional form.
    pub fn shape() -> Self {
        Self {
            mode: ConstantsMode::Shape,
            big_oh_constant: 1.0,
            lemma1_constant: 1.0,
            lemma2_constant: 1.0,
            lemma3_constant: 1.0,
            lemma1_threshold: crate::bm::calibration::DEFAULT_LEMMA1_THRESHOLD,
        }
    }

    /// Only the constants that appear literally in the proof chain.
    pub fn explicit() -> Self {
        Self { mode: ConstantsMode::Explicit, ..Self::shape() }
    }

    /// Lemma constants frozen from the shipped calibration grid run.
    pub fn calibrated() -> Self {
        crate::bm::calibration::default_calibrated_policy()
    }
}

impl Default for ConstantPolicy {
    fn default() -> Self {
        Self::shape()
    }
}

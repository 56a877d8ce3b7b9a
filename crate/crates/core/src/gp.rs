//! Sampling of stationary Gaussian vectors and numerical validation of the
//! conditioning/comparison chain.
//!
//! The central object is a [`GaussianEnsemble`]: the Toeplitz covariance of
//! a sampled correlation model together with its (jitter-stabilised)
//! Cholesky factor. On top of it sit the estimators and identity checks
//! that make the analytic chain testable:
//!
//! - [`sample_max_exceedance`]: plain MC for P(max_i Z(t_i) > u);
//! - [`conditioned_correlations`]: the analytic correlations of the
//!   conditioned variables V_j = (Z(t_j) - r(n-j) Z(t_n)) / sqrt(1-r(n-j)^2),
//!   with an empirical cross-check;
//! - [`slepian_comparison_check`]: the comparison correlation structure is
//!   dominated entrywise, and the orthant probabilities order accordingly;
//! - [`walk_identity_check`]: the partial sums of the comparison walk have
//!   the min-of-cumulative-variances covariance of a time-changed Brownian
//!   motion.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::bounds::WalkStructure;
use crate::covariance::SampledCorrelation;
use crate::error::{Error, Result};
use crate::mc::{accumulate, McConfig, McEstimate};

/// Factorisation guard: beyond this the dense Cholesky cost is unreasonable.
pub const MAX_ENSEMBLE_SIZE: usize = 5_000;

/// Minimum observed hit count for an exceedance estimate to be reported.
pub const MIN_HITS: u64 = 50;

const JITTER_LADDER: [f64; 6] = [0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8];

/// A sampled correlation model with its Cholesky factor.
pub struct GaussianEnsemble {
    covariance: DMatrix<f64>,
    factor: DMatrix<f64>,
    jitter_used: f64,
}

impl GaussianEnsemble {
    /// Build the Toeplitz covariance from the sampled correlations and
    /// factor it, climbing the jitter ladder if needed. Fine grids make
    /// neighbouring points correlate near 1, so the matrix is routinely
    /// numerically rank-deficient without jitter.
    pub fn from_sampled(sampled: &SampledCorrelation) -> Result<Self> {
        let n = sampled.n();
        if n > MAX_ENSEMBLE_SIZE {
            return Err(Error::Precondition(format!(
                "ensemble size {n} exceeds the factorization guard {MAX_ENSEMBLE_SIZE}"
            )));
        }
        let covariance =
            DMatrix::from_fn(n, n, |i, j| sampled.r_lag(i.abs_diff(j)));
        for &jitter in &JITTER_LADDER {
            let mut jittered = covariance.clone();
            for i in 0..n {
                jittered[(i, i)] += jitter;
            }
            if let Some(chol) = jittered.clone().cholesky() {
                let factor = chol.unpack();
                let residual = (&factor * factor.transpose() - &jittered).abs().max();
                if residual <= 1e-8 {
                    return Ok(Self { covariance, factor, jitter_used: jitter });
                }
            }
        }
        Err(Error::Factorization(format!(
            "covariance (n = {n}, spacing = {}) not factorizable within jitter 1e-8",
            sampled.spacing
        )))
    }

    pub fn n(&self) -> usize {
        self.covariance.nrows()
    }

    pub fn jitter_used(&self) -> f64 {
        self.jitter_used
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    /// Largest absolute entry of L L^T - (covariance + jitter I).
    pub fn factor_residual(&self) -> f64 {
        let n = self.n();
        let mut jittered = self.covariance.clone();
        for i in 0..n {
            jittered[(i, i)] += self.jitter_used;
        }
        (&self.factor * self.factor.transpose() - jittered).abs().max()
    }
}

/// Number of sample columns per matrix-multiply block.
fn gemm_chunk(n: usize) -> usize {
    (32_768 / n).clamp(8, 256)
}

/// Monte Carlo estimate of P(max_i Z(t_i) > u).
///
/// Samples are drawn in blocks through the Cholesky factor (one gemm per
/// block), batched under the deterministic partition policy. Fails if the
/// run produced fewer than [`MIN_HITS`] exceedances: plain MC cannot
/// resolve the probability at that sample size, and no importance sampling
/// is implemented.
pub fn sample_max_exceedance(
    ensemble: &GaussianEnsemble,
    u: f64,
    cfg: &McConfig,
) -> Result<McEstimate> {
    let n = ensemble.n();
    let chunk = gemm_chunk(n);
    let l = ensemble.factor();
    let hits: u64 = accumulate(
        cfg.samples,
        cfg.seed,
        |rng, len| {
            let mut eps = DMatrix::<f64>::zeros(n, chunk);
            let mut z = DMatrix::<f64>::zeros(n, chunk);
            let mut hits = 0u64;
            let mut remaining = len as usize;
            while remaining > 0 {
                let k = remaining.min(chunk);
                for c in 0..k {
                    for r in 0..n {
                        eps[(r, c)] = rng.sample(StandardNormal);
                    }
                }
                z.columns_mut(0, k).gemm(1.0, l, &eps.columns(0, k), 0.0);
                for c in 0..k {
                    if z.column(c).iter().any(|&v| v > u) {
                        hits += 1;
                    }
                }
                remaining -= k;
            }
            hits
        },
        |a, b| a + b,
    )?;
    if hits < MIN_HITS {
        return Err(Error::Precondition(format!(
            "only {hits} exceedances in {} samples (< {MIN_HITS}); increase samples or lower u",
            cfg.samples
        )));
    }
    Ok(McEstimate::from_hits(hits, cfg.samples, cfg.seed))
}

/// Analytic correlations of the conditioned variables:
/// E V_j V_k = (r(|j-k|) - r(n-j) r(n-k)) / (sqrt(1-r(n-j)^2) sqrt(1-r(n-k)^2))
/// for 1 <= j, k <= n-1, with unit diagonal.
pub fn conditioned_correlations(sampled: &SampledCorrelation) -> Result<DMatrix<f64>> {
    let n = sampled.n();
    if n < 2 {
        return Err(Error::Precondition("conditioning needs n >= 2".into()));
    }
    let norms: Vec<f64> = (1..n)
        .map(|j| {
            let r = sampled.r_lag(n - j);
            if r >= 1.0 {
                return Err(Error::Degenerate(format!(
                    "perfectly correlated lag {} (r = {r})",
                    n - j
                )));
            }
            Ok((1.0 - r * r).sqrt())
        })
        .collect::<Result<_>>()?;
    let mut m = DMatrix::zeros(n - 1, n - 1);
    for j in 1..n {
        for k in 1..n {
            m[(j - 1, k - 1)] = if j == k {
                1.0
            } else {
                (sampled.r_lag(j.abs_diff(k)) - sampled.r_lag(n - j) * sampled.r_lag(n - k))
                    / (norms[j - 1] * norms[k - 1])
            };
        }
    }
    Ok(m)
}

/// Comparison correlation structure:
/// E X_j X_k = r(n-min{j,k}) (1 - r(n-max{j,k}))
///             / (sqrt(1-r(n-j)^2) sqrt(1-r(n-k)^2)) for j != k.
fn comparison_correlations(sampled: &SampledCorrelation) -> Result<DMatrix<f64>> {
    let n = sampled.n();
    let norms: Vec<f64> = (1..n)
        .map(|j| {
            let r = sampled.r_lag(n - j);
            (1.0 - r * r).sqrt()
        })
        .collect();
    let mut m = DMatrix::zeros(n - 1, n - 1);
    for j in 1..n {
        for k in 1..n {
            m[(j - 1, k - 1)] = if j == k {
                1.0
            } else {
                let lo = j.min(k);
                let hi = j.max(k);
                sampled.r_lag(n - lo) * (1.0 - sampled.r_lag(n - hi))
                    / (norms[j - 1] * norms[k - 1])
            };
        }
    }
    Ok(m)
}

/// Empirical validation of the conditioned correlations.
#[derive(Debug, Clone, Serialize)]
pub struct ConditioningReport {
    pub n: usize,
    pub samples: u64,
    pub seed: u64,
    /// max |empirical E V_j V_k - analytic| over all pairs (incl. diagonal).
    pub max_abs_correlation_deviation: f64,
    /// max |empirical E V_j Z(t_n)| (analytically zero).
    pub max_abs_cross_correlation: f64,
}

/// Sample the ensemble, form the conditioned variables empirically, and
/// compare their moments against [`conditioned_correlations`].
pub fn empirical_conditioning_report(
    sampled: &SampledCorrelation,
    cfg: &McConfig,
) -> Result<ConditioningReport> {
    let n = sampled.n();
    let analytic = conditioned_correlations(sampled)?;
    let ensemble = GaussianEnsemble::from_sampled(sampled)?;
    let l = ensemble.factor();
    let m = n - 1;
    let scale: Vec<f64> = (1..n)
        .map(|j| {
            let r = sampled.r_lag(n - j);
            1.0 / (1.0 - r * r).sqrt()
        })
        .collect();

    // Per-batch accumulator: [sum V_j V_k (m*m), sum V_j Z_n (m)].
    let sums = accumulate(
        cfg.samples,
        cfg.seed,
        |rng, len| {
            let mut acc = vec![0.0f64; m * m + m];
            let mut z = vec![0.0f64; n];
            let mut v = vec![0.0f64; m];
            let mut eps = vec![0.0f64; n];
            for _ in 0..len {
                for e in eps.iter_mut() {
                    *e = rng.sample(StandardNormal);
                }
                // z = L eps, exploiting the lower-triangular factor.
                for i in 0..n {
                    let mut s = 0.0;
                    for k in 0..=i {
                        s += l[(i, k)] * eps[k];
                    }
                    z[i] = s;
                }
                let zn = z[n - 1];
                for j in 1..n {
                    v[j - 1] = (z[j - 1] - sampled.r_lag(n - j) * zn) * scale[j - 1];
                }
                for j in 0..m {
                    for k in j..m {
                        acc[j * m + k] += v[j] * v[k];
                    }
                    acc[m * m + j] += v[j] * zn;
                }
            }
            acc
        },
        |mut a: Vec<f64>, b| {
            if a.is_empty() {
                return b;
            }
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
            a
        },
    )?;

    let inv = 1.0 / cfg.samples as f64;
    let mut max_corr_dev = 0.0f64;
    for j in 0..m {
        for k in j..m {
            let emp = sums[j * m + k] * inv;
            max_corr_dev = max_corr_dev.max((emp - analytic[(j, k)]).abs());
        }
    }
    let mut max_cross = 0.0f64;
    for j in 0..m {
        max_cross = max_cross.max((sums[m * m + j] * inv).abs());
    }
    Ok(ConditioningReport {
        n,
        samples: cfg.samples,
        seed: cfg.seed,
        max_abs_correlation_deviation: max_corr_dev,
        max_abs_cross_correlation: max_cross,
    })
}

/// Result of the comparison (correlation-domination) check.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub n: usize,
    pub u: f64,
    /// Analytic entrywise check E V_j V_k >= E X_j X_k.
    pub entrywise_inequality_holds: bool,
    pub min_entry_margin: f64,
    /// MC estimate of P(V_j <= w_j for all j).
    pub conditioned_orthant: McEstimate,
    /// MC estimate of P(X_j <= w_j for all j).
    pub comparison_orthant: McEstimate,
    /// Ordering holds within CI resolution: not(lhs upper edge < rhs lower
    /// edge).
    pub ordering_holds_within_ci: bool,
    /// True when either orthant produced almost no hits, i.e. the ordering
    /// check carries little power at this sample size.
    pub low_power: bool,
}

/// Check the comparison step: dominated correlations (analytically) and the
/// resulting orthant-probability ordering (by MC).
///
/// The dominated ensemble is sampled through its constructive form: a
/// common Gaussian walk plus independent noise, which realises exactly the
/// comparison correlation structure.
pub fn slepian_comparison_check(
    sampled: &SampledCorrelation,
    u: f64,
    cfg: &McConfig,
) -> Result<ComparisonReport> {
    let n = sampled.n();
    if !(u >= 1.0) {
        return Err(Error::Precondition(format!("comparison check requires u >= 1, got {u}")));
    }
    let conditioned = conditioned_correlations(sampled)?;
    let comparison = comparison_correlations(sampled)?;
    let mut min_margin = f64::INFINITY;
    for j in 0..n - 1 {
        for k in 0..n - 1 {
            min_margin = min_margin.min(conditioned[(j, k)] - comparison[(j, k)]);
        }
    }
    let entrywise_inequality_holds = min_margin >= -1e-12;

    // Thresholds w_j = u (1 - r(n-j)(1 + u^-2)) / sqrt(1 - r(n-j)^2).
    let thresholds: Vec<f64> = (1..n)
        .map(|j| {
            let r = sampled.r_lag(n - j);
            u * (1.0 - r * (1.0 + 1.0 / (u * u))) / (1.0 - r * r).sqrt()
        })
        .collect();

    // LHS: conditioned variables from ensemble samples.
    let ensemble = GaussianEnsemble::from_sampled(sampled)?;
    let l = ensemble.factor();
    let lhs_hits: u64 = accumulate(
        cfg.samples,
        cfg.seed,
        |rng, len| {
            let mut eps = vec![0.0f64; n];
            let mut z = vec![0.0f64; n];
            let mut hits = 0u64;
            for _ in 0..len {
                for e in eps.iter_mut() {
                    *e = rng.sample(StandardNormal);
                }
                for i in 0..n {
                    let mut s = 0.0;
                    for k in 0..=i {
                        s += l[(i, k)] * eps[k];
                    }
                    z[i] = s;
                }
                let zn = z[n - 1];
                let mut inside = true;
                for j in 1..n {
                    let r = sampled.r_lag(n - j);
                    let v = (z[j - 1] - r * zn) / (1.0 - r * r).sqrt();
                    if v > thresholds[j - 1] {
                        inside = false;
                        break;
                    }
                }
                if inside {
                    hits += 1;
                }
            }
            hits
        },
        |a, b| a + b,
    )?;
    let lhs = McEstimate::from_hits(lhs_hits, cfg.samples, cfg.seed);

    // RHS: the dominated ensemble via its walk-plus-noise construction.
    let walk = crate::bounds::build_walk(sampled)?;
    let alphas: Vec<f64> = walk.increments_sq().iter().map(|v| v.sqrt()).collect();
    let rhs_seed = cfg.seed.wrapping_add(1);
    let rhs_hits: u64 = accumulate(
        cfg.samples,
        rhs_seed,
        |rng, len| {
            let mut hits = 0u64;
            for _ in 0..len {
                let mut s = 0.0;
                let mut inside = true;
                for i in 1..n {
                    let y: f64 = rng.sample(StandardNormal);
                    s += alphas[i - 1] * y;
                    let r = sampled.r_lag(n - i);
                    let om = 1.0 - r;
                    let zi: f64 = rng.sample(StandardNormal);
                    let x = (om.sqrt() * zi + om * s) / (1.0 - r * r).sqrt();
                    if x > thresholds[i - 1] {
                        inside = false;
                        break;
                    }
                }
                if inside {
                    hits += 1;
                }
            }
            hits
        },
        |a, b| a + b,
    )?;
    let rhs = McEstimate::from_hits(rhs_hits, cfg.samples, rhs_seed);

    Ok(ComparisonReport {
        n,
        u,
        entrywise_inequality_holds,
        min_entry_margin: min_margin,
        ordering_holds_within_ci: lhs.ci_high >= rhs.ci_low,
        low_power: lhs_hits < MIN_HITS || rhs_hits < MIN_HITS,
        conditioned_orthant: lhs,
        comparison_orthant: rhs,
    })
}

/// Result of the walk distributional-identity check.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub n: usize,
    pub samples: u64,
    pub seed: u64,
    /// max |empirical correlation - analytic| where the analytic correlation
    /// is min(c_i, c_k)/sqrt(c_i c_k) (Brownian min-structure, normalised).
    pub max_abs_correlation_deviation: f64,
    /// max |empirical covariance - min(c_i, c_k)| on the raw scale.
    pub max_abs_covariance_deviation: f64,
}

/// Analytic covariance of the walk partial sums: min(c_i, c_k).
pub fn walk_covariance(walk: &WalkStructure) -> DMatrix<f64> {
    let m = walk.n() - 1;
    let c = walk.cumulative();
    DMatrix::from_fn(m, m, |i, k| c[i].min(c[k]))
}

/// Simulate the walk and compare its empirical second moments against the
/// min-of-cumulative-variances structure. The assertable tolerance lives on
/// the normalised (correlation) scale; the raw covariance deviation is
/// recorded for reference, since its sampling error grows with the
/// cumulative variances themselves.
pub fn walk_identity_check(walk: &WalkStructure, cfg: &McConfig) -> Result<IdentityReport> {
    let m = walk.n() - 1;
    if !(walk.total_variance() > 0.0) {
        return Err(Error::Precondition(
            "identity check requires positive walk increments".into(),
        ));
    }
    let alphas: Vec<f64> = walk.increments_sq().iter().map(|v| v.sqrt()).collect();
    let sums = accumulate(
        cfg.samples,
        cfg.seed,
        |rng: &mut ChaCha8Rng, len| {
            let mut acc = vec![0.0f64; m * m];
            let mut s = vec![0.0f64; m];
            for _ in 0..len {
                let mut run = 0.0;
                for (si, alpha) in s.iter_mut().zip(&alphas) {
                    let y: f64 = rng.sample(StandardNormal);
                    run += alpha * y;
                    *si = run;
                }
                for i in 0..m {
                    let si = s[i];
                    for k in i..m {
                        acc[i * m + k] += si * s[k];
                    }
                }
            }
            acc
        },
        |mut a: Vec<f64>, b| {
            if a.is_empty() {
                return b;
            }
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
            a
        },
    )?;
    let inv = 1.0 / cfg.samples as f64;
    let c = walk.cumulative();
    let mut max_corr = 0.0f64;
    let mut max_cov = 0.0f64;
    for i in 0..m {
        for k in i..m {
            let emp = sums[i * m + k] * inv;
            let analytic = c[i].min(c[k]);
            max_cov = max_cov.max((emp - analytic).abs());
            let norm = (c[i] * c[k]).sqrt();
            if norm > 0.0 {
                max_corr = max_corr.max((emp - analytic).abs() / norm);
            }
        }
    }
    Ok(IdentityReport {
        n: walk.n(),
        samples: cfg.samples,
        seed: cfg.seed,
        max_abs_correlation_deviation: max_corr,
        max_abs_covariance_deviation: max_cov,
    })
}

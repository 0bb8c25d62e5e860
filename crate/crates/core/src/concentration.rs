//! Tail bounds and regularization-level recommendations.
//!
//! Closed-form Hoeffding, Bernstein, and covariance-deviation bounds drive
//! both the recommended rate for the regularization level and the empirical
//! validation of gradient concentration in the experiments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss_models::ModelSpec;

/// Growth law of the recommended regularization level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateTag {
    /// `tau = C sqrt(log p / n)` (linear, logistic, graph selection).
    SqrtLogPOverN,
    /// `tau = C log p / sqrt(n)` (gamma).
    LogPOverSqrtN,
}

/// Recommended regularization level with its diagnostic failure bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TauRecommendation {
    pub tau: f64,
    pub rate: RateTag,
    /// Constant multiplier used.
    pub c_mult: f64,
    /// Union bound on the probability that the gradient sup norm exceeds
    /// `alpha tau / 4`, clipped to [0, 1].
    pub failure_bound: f64,
    /// Natural log of the unclipped bound, for log-scale plotting.
    pub log_failure_bound: f64,
}

fn clip_prob(p: f64) -> f64 {
    p.clamp(0.0, 1.0)
}

/// Two-sided Hoeffding bound `2 exp(-2 t^2 / sum_i w_i^2)` for a sum of
/// independent variables with ranges of widths `w_i`, clipped to [0, 1].
pub fn hoeffding_tail(t: f64, range_widths: &[f64]) -> f64 {
    assert!(t > 0.0, "deviation level must be positive");
    let denom: f64 = range_widths.iter().map(|w| w * w).sum();
    assert!(denom > 0.0, "at least one range width must be nonzero");
    clip_prob(2.0 * (-2.0 * t * t / denom).exp())
}

/// Two-sided Bernstein bound `2 exp(-t^2 / (2(v + c t)))`, clipped to [0, 1].
pub fn bernstein_tail(t: f64, v: f64, c: f64) -> f64 {
    assert!(t > 0.0 && v > 0.0 && c >= 0.0);
    clip_prob(2.0 * (-t * t / (2.0 * (v + c * t))).exp())
}

/// Bernstein moment parameters `(v, c)` for one coordinate of the gamma-loss
/// gradient at the truth, branching on the shape: for `k <= 1`,
/// `v = (k+1)/(n mu^2 k^2)` and `c = 1/(k sqrt(n) mu)`; for `k > 1`,
/// `v = 2k/(n mu^2)` and `c = 1/(sqrt(n) mu)`.
pub fn gamma_bernstein_params(k: f64, n: usize, mu_n: f64) -> (f64, f64) {
    assert!(k > 0.0 && n > 0 && mu_n > 0.0);
    let n = n as f64;
    if k <= 1.0 {
        (
            (k + 1.0) / (n * mu_n * mu_n * k * k),
            1.0 / (k * n.sqrt() * mu_n),
        )
    } else {
        (2.0 * k / (n * mu_n * mu_n), 1.0 / (n.sqrt() * mu_n))
    }
}

/// Entrywise deviation bound for a sub-Gaussian sample covariance:
/// `4 exp(-n t^2 / (128 (1 + 4c^2)^2 kappa^2))`, valid for
/// `t` in `(0, 8 kappa (1 + c)^2)`; outside the window the caller must grow
/// `n` before the bound applies.
pub fn subgaussian_cov_tail(t: f64, c: f64, kappa_sigma: f64, n: usize) -> Result<f64> {
    let limit = 8.0 * kappa_sigma * (1.0 + c) * (1.0 + c);
    if t <= 0.0 || t >= limit {
        return Err(Error::TOutOfRange { t, limit });
    }
    let denom = 128.0 * (1.0 + 4.0 * c * c).powi(2) * kappa_sigma * kappa_sigma;
    Ok(clip_prob(4.0 * (-(n as f64) * t * t / denom).exp()))
}

/// Sub-Gaussian bound `2 exp(-n t^2 / (2 c^2))` for one coordinate of the
/// linear-model gradient at the truth under noise parameter `c` and the
/// column normalization.
pub fn sub_gaussian_grad_tail(t: f64, c: f64, n: usize) -> f64 {
    assert!(t > 0.0 && c > 0.0 && n > 0);
    clip_prob(2.0 * (-(n as f64) * t * t / (2.0 * c * c)).exp())
}

/// Default constant multiplier `8 / alpha`: twice the `4 / alpha` needed for
/// the Hoeffding failure bound at `t = alpha tau / 4` to decay like `1/p`.
pub fn default_c_mult(alpha: f64) -> f64 {
    assert!(alpha > 0.0);
    8.0 / alpha
}

/// Recommends a regularization level at the family's rate and evaluates the
/// matching failure bound at `t = alpha tau / 4` with its union multiplier.
///
/// `p` is the ambient dimension for regression families and the matrix
/// dimension `d` for graph selection (whose union multiplier is `p^2`, one
/// per matrix entry). Graph selection needs `kappa_sigma`, the largest
/// diagonal entry of the true covariance; its scaled coordinates are treated
/// as sub-Gaussian with constant parameter 1 (the Gaussian case). When the
/// deviation level falls outside the covariance bound's validity window the
/// trivial bound 1 is reported.
pub fn recommend_tau(
    spec: &ModelSpec,
    n: usize,
    p: usize,
    alpha: f64,
    c_mult: f64,
    kappa_sigma: Option<f64>,
) -> Result<TauRecommendation> {
    if n < 2 || p < 2 {
        return Err(Error::InvalidData("recommendation needs n >= 2 and p >= 2".into()));
    }
    if c_mult <= 0.0 || alpha <= 0.0 {
        return Err(Error::InvalidData("alpha and C must be positive".into()));
    }
    let (nf, pf) = (n as f64, p as f64);
    match spec {
        ModelSpec::Linear { .. } | ModelSpec::Logistic => {
            let tau = c_mult * (pf.ln() / nf).sqrt();
            let t = alpha * tau / 4.0;
            // per-coordinate ranges square-sum to 1/n under the normalization
            let per_coord = hoeffding_tail(t, &[1.0 / nf.sqrt()]);
            let log_bound = (2.0 * pf).ln() - 2.0 * t * t * nf;
            Ok(TauRecommendation {
                tau,
                rate: RateTag::SqrtLogPOverN,
                c_mult,
                failure_bound: clip_prob(pf * per_coord),
                log_failure_bound: log_bound,
            })
        }
        ModelSpec::Gamma { k, mu_n } => {
            if *mu_n <= 0.0 {
                return Err(Error::MissingParameter("gamma predictor floor mu_n"));
            }
            let tau = c_mult * pf.ln() / nf.sqrt();
            let t = alpha * tau / 4.0;
            let (v, c) = gamma_bernstein_params(*k, n, *mu_n);
            let per_coord = bernstein_tail(t, v, c);
            let log_bound = (2.0 * pf).ln() - t * t / (2.0 * (v + c * t));
            Ok(TauRecommendation {
                tau,
                rate: RateTag::LogPOverSqrtN,
                c_mult,
                failure_bound: clip_prob(pf * per_coord),
                log_failure_bound: log_bound,
            })
        }
        ModelSpec::GraphSelect { .. } => {
            let kappa = kappa_sigma.ok_or(Error::MissingParameter("kappa_sigma"))?;
            let tau = c_mult * (pf.ln() / nf).sqrt();
            let t = alpha * tau / 4.0;
            let sub_gaussian_c = 1.0;
            match subgaussian_cov_tail(t, sub_gaussian_c, kappa, n) {
                Ok(per_entry) => {
                    let denom = 128.0 * (1.0 + 4.0 * sub_gaussian_c * sub_gaussian_c).powi(2)
                        * kappa
                        * kappa;
                    Ok(TauRecommendation {
                        tau,
                        rate: RateTag::SqrtLogPOverN,
                        c_mult,
                        failure_bound: clip_prob(pf * pf * per_entry),
                        log_failure_bound: (4.0 * pf * pf).ln() - nf * t * t / denom,
                    })
                }
                Err(Error::TOutOfRange { .. }) => Ok(TauRecommendation {
                    tau,
                    rate: RateTag::SqrtLogPOverN,
                    c_mult,
                    failure_bound: 1.0,
                    log_failure_bound: 0.0,
                }),
                Err(e) => Err(e),
            }
        }
    }
}

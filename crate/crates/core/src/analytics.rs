//! Closed-form post-selection performance and threshold optimization.
//!
//! The receiver keeps a quadrature outcome only when it falls outside the
//! window `[x_minus, x_plus]`. For a signal whose conclusive-basis outcome is
//! Gaussian with mean `+-mu` and width `sigma`, everything of interest follows
//! from the normal CDF:
//!
//! * `p_d` — probability of a conclusive (positive or negative) result;
//! * `e_int` — probability that a conclusive result has the wrong sign;
//! * `eta_d = p_d / n_sig` — detection efficiency per mean signal photon;
//! * `gain = p_d (1 - h2(e_int))` — conclusive rate times the binary
//!   symmetric channel mutual information, the quantity the threshold
//!   optimizer maximizes.
//!
//! `e_int` is defined conditionally on a conclusive outcome, and both symbols
//! are assumed equiprobable.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{normal_cdf, normal_sf};

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticsError {
    #[error("sigma must be finite and > 0, got {0}")]
    InvalidSigma(f64),
    #[error("thresholds must satisfy x_minus <= x_plus, got x_minus {x_minus} > x_plus {x_plus}")]
    InvalidThresholds { x_plus: f64, x_minus: f64 },
    #[error("threshold must be finite")]
    NonFiniteThreshold,
    #[error("no conclusive outcomes: p_d = 0 at these thresholds")]
    NoConclusiveOutcomes,
    #[error("n_sig must be > 0, got {0}")]
    InvalidPhotonNumber(f64),
    #[error("error rate must lie in [0, 1], got {0}")]
    InvalidErrorRate(f64),
}

/// The receiver's post-selection window.
///
/// Outcomes above `x_plus` are read as positive, below `x_minus` as negative,
/// and anything in between is inconclusive and discarded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ThresholdPolicyRaw")]
pub struct ThresholdPolicy {
    x_plus: f64,
    x_minus: f64,
}

#[derive(Deserialize)]
struct ThresholdPolicyRaw {
    x_plus: f64,
    #[serde(default)]
    x_minus: Option<f64>,
}

impl TryFrom<ThresholdPolicyRaw> for ThresholdPolicy {
    type Error = AnalyticsError;

    fn try_from(raw: ThresholdPolicyRaw) -> Result<Self, Self::Error> {
        match raw.x_minus {
            Some(x_minus) => ThresholdPolicy::new(raw.x_plus, x_minus),
            None => ThresholdPolicy::symmetric(raw.x_plus),
        }
    }
}

impl ThresholdPolicy {
    pub fn new(x_plus: f64, x_minus: f64) -> Result<Self, AnalyticsError> {
        if !x_plus.is_finite() || !x_minus.is_finite() {
            return Err(AnalyticsError::NonFiniteThreshold);
        }
        if x_minus > x_plus {
            return Err(AnalyticsError::InvalidThresholds { x_plus, x_minus });
        }
        Ok(Self { x_plus, x_minus })
    }

    /// The symmetric window `x_minus = -x_plus` used for all reference
    /// operating points.
    pub fn symmetric(x_plus: f64) -> Result<Self, AnalyticsError> {
        if !x_plus.is_finite() {
            return Err(AnalyticsError::NonFiniteThreshold);
        }
        if x_plus < 0.0 {
            return Err(AnalyticsError::InvalidThresholds {
                x_plus,
                x_minus: -x_plus,
            });
        }
        Ok(Self {
            x_plus,
            x_minus: -x_plus,
        })
    }

    pub fn x_plus(&self) -> f64 {
        self.x_plus
    }

    pub fn x_minus(&self) -> f64 {
        self.x_minus
    }
}

fn check_sigma(sigma: f64) -> Result<(), AnalyticsError> {
    if !sigma.is_finite() || sigma <= 0.0 {
        return Err(AnalyticsError::InvalidSigma(sigma));
    }
    Ok(())
}

/// Conclusive probability for one symbol mean.
fn p_d_for_symbol(mu: f64, sigma: f64, policy: &ThresholdPolicy) -> f64 {
    normal_sf((policy.x_plus - mu) / sigma) + normal_cdf((policy.x_minus - mu) / sigma)
}

/// Probability that the receiver gets a conclusive (positive or negative)
/// result, averaged over the two symbols `+-|mu|`.
pub fn conclusive_probability(
    mu: f64,
    sigma: f64,
    policy: &ThresholdPolicy,
) -> Result<f64, AnalyticsError> {
    check_sigma(sigma)?;
    let mu = mu.abs();
    Ok(0.5 * (p_d_for_symbol(mu, sigma, policy) + p_d_for_symbol(-mu, sigma, policy)))
}

/// Intrinsic bit error rate: the probability that a conclusive result carries
/// the wrong sign, conditioned on it being conclusive.
pub fn intrinsic_error_rate(
    mu: f64,
    sigma: f64,
    policy: &ThresholdPolicy,
) -> Result<f64, AnalyticsError> {
    check_sigma(sigma)?;
    let mu = mu.abs();
    let p_d = conclusive_probability(mu, sigma, policy)?;
    if p_d <= 0.0 {
        return Err(AnalyticsError::NoConclusiveOutcomes);
    }
    // Sent "+": wrong when X < x_minus. Sent "-": wrong when X > x_plus.
    let wrong = 0.5 * normal_cdf((policy.x_minus - mu) / sigma)
        + 0.5 * normal_sf((policy.x_plus + mu) / sigma);
    Ok(wrong / p_d)
}

/// Detection efficiency per mean signal photon, `p_d / n_sig`.
pub fn effective_quantum_efficiency(p_d: f64, n_sig: f64) -> Result<f64, AnalyticsError> {
    if !n_sig.is_finite() || n_sig <= 0.0 {
        return Err(AnalyticsError::InvalidPhotonNumber(n_sig));
    }
    Ok(p_d / n_sig)
}

/// Binary entropy in bits, with `h2(0) = h2(1) = 0` by continuity.
pub fn binary_entropy(e: f64) -> f64 {
    if e <= 0.0 || e >= 1.0 {
        return 0.0;
    }
    -(e * e.log2() + (1.0 - e) * (1.0 - e).log2())
}

/// Mutual information of a binary symmetric channel with error rate `e`.
pub fn mutual_information(e: f64) -> Result<f64, AnalyticsError> {
    if !e.is_finite() || !(0.0..=1.0).contains(&e) {
        return Err(AnalyticsError::InvalidErrorRate(e));
    }
    Ok(1.0 - binary_entropy(e))
}

/// All performance quantities at one operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerformancePoint {
    /// Intrinsic bit error rate among conclusive results.
    pub e_int: f64,
    /// Effective detection efficiency (conclusive probability).
    pub p_d: f64,
    /// Inconclusive probability, `1 - p_d`.
    pub p_inc: f64,
    /// Effective quantum efficiency, `p_d / n_sig`.
    pub eta_d: f64,
    /// `p_d` times the mutual information, in bits per conclusive-basis pulse.
    pub gain: f64,
}

impl PerformancePoint {
    /// Evaluate the closed forms for a signal of mean photon number `n_sig`
    /// whose conclusive-basis outcome has mean `+-mu` and width `sigma`.
    pub fn compute(
        n_sig: f64,
        mu: f64,
        sigma: f64,
        policy: &ThresholdPolicy,
    ) -> Result<Self, AnalyticsError> {
        let p_d = conclusive_probability(mu, sigma, policy)?;
        let e_int = intrinsic_error_rate(mu, sigma, policy)?;
        let eta_d = effective_quantum_efficiency(p_d, n_sig)?;
        let gain = p_d * mutual_information(e_int)?;
        Ok(Self {
            e_int,
            p_d,
            p_inc: 1.0 - p_d,
            eta_d,
            gain,
        })
    }
}

/// The post-selection gain `p_d (1 - h2(e_int))` at a symmetric threshold.
pub fn threshold_gain(n_sig: f64, sigma: f64, x_plus: f64) -> Result<f64, AnalyticsError> {
    let policy = ThresholdPolicy::symmetric(x_plus)?;
    let mu = n_sig.sqrt();
    let p_d = conclusive_probability(mu, sigma, &policy)?;
    if p_d <= 0.0 {
        return Ok(0.0);
    }
    let e_int = intrinsic_error_rate(mu, sigma, &policy)?;
    Ok(p_d * (1.0 - binary_entropy(e_int)))
}

/// Find the symmetric threshold that maximizes the gain.
///
/// Coarse grid scan over `[0, mu + 8 sigma]` followed by repeated local grid
/// refinement down to a step below 1e-5 in `x_plus`; does not assume the
/// objective is unimodal. Returns `(x_plus, gain)` at the optimum.
pub fn optimize_threshold(n_sig: f64, sigma: f64) -> Result<(f64, f64), AnalyticsError> {
    if !n_sig.is_finite() || n_sig <= 0.0 {
        return Err(AnalyticsError::InvalidPhotonNumber(n_sig));
    }
    check_sigma(sigma)?;
    let upper = n_sig.sqrt() + 8.0 * sigma;
    let coarse_steps = 2000usize;
    let mut step = upper / coarse_steps as f64;
    let mut best_x = 0.0;
    let mut best_gain = f64::NEG_INFINITY;
    for i in 0..=coarse_steps {
        let x = i as f64 * step;
        let g = threshold_gain(n_sig, sigma, x)?;
        if g > best_gain {
            best_gain = g;
            best_x = x;
        }
    }
    // Zoom: rescan +-step around the incumbent with a 10x finer grid.
    while step > 1e-6 {
        let lo = (best_x - step).max(0.0);
        let hi = best_x + step;
        step /= 10.0;
        let mut x = lo;
        while x <= hi + step * 0.5 {
            let g = threshold_gain(n_sig, sigma, x)?;
            if g > best_gain {
                best_gain = g;
                best_x = x;
            }
            x += step;
        }
    }
    Ok((best_x, best_gain))
}

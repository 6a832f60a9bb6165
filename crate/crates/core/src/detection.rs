//! Distribution monitoring: the receiver's tool for noticing state
//! alteration.
//!
//! The receiver accumulates every measured quadrature (post-selection affects
//! keys, not monitoring) and splits them into two ensembles: pulses measured
//! in the correct basis, whose honest distribution is an equal mixture of
//! Gaussians at `+-mu`, and wrong-basis pulses, which should follow a single
//! zero-mean Gaussian. Any intervention that changes the transmitted state —
//! vacuum substitution, intensity changes, added noise — shows up as a shape
//! change in one of these ensembles.
//!
//! The primary test is a one-sample Kolmogorov-Smirnov test against the
//! expected cumulative distribution (no binning sensitivity); a mean/variance
//! z-test complements it as a cheap targeted check. Histograms are retained
//! for export and plotting only.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{normal_cdf, normal_pdf};
use crate::physics::{quadrature_mean, quadrature_sigma, BobBasis, ChannelModel, CoherentPulse,
                     PhysicsError};

/// Significance level used when none is configured.
pub const DEFAULT_ALPHA: f64 = 0.01;

/// Minimum ensemble size accepted by the statistical tests.
pub const MIN_SAMPLES: usize = 100;

#[derive(Debug, Error, PartialEq)]
pub enum DetectionError {
    #[error("need at least {MIN_SAMPLES} samples, got {0}")]
    TooFewSamples(usize),
    #[error("samples must be finite")]
    NonFiniteSample,
    #[error("significance level must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("histogram bin edges must be strictly ascending")]
    BadBinEdges,
    #[error(transparent)]
    Physics(#[from] PhysicsError),
}

/// Which ensemble a sample belongs to, by basis agreement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BasisTag {
    CorrectBasis,
    WrongBasis,
}

/// A weighted sum of Gaussian components; the reference shape for the tests.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    components: Vec<(f64, f64, f64)>, // (weight, mean, sigma)
}

impl GaussianMixture {
    /// Components are `(weight, mean, sigma)`; weights are normalized.
    ///
    /// Panics on an empty component list or nonpositive total weight.
    pub fn new(components: Vec<(f64, f64, f64)>) -> Self {
        let total: f64 = components.iter().map(|(w, _, _)| w).sum();
        assert!(
            total > 0.0 && total.is_finite(),
            "mixture needs positive total weight"
        );
        Self {
            components: components
                .into_iter()
                .map(|(w, m, s)| (w / total, m, s))
                .collect(),
        }
    }

    pub fn components(&self) -> &[(f64, f64, f64)] {
        &self.components
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.components
            .iter()
            .map(|(w, m, s)| w * normal_pdf((x - m) / s) / s)
            .sum()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.components
            .iter()
            .map(|(w, m, s)| w * normal_cdf((x - m) / s))
            .sum()
    }

    pub fn mean(&self) -> f64 {
        self.components.iter().map(|(w, m, _)| w * m).sum()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.components
            .iter()
            .map(|(w, m, s)| w * (s * s + (m - mean) * (m - mean)))
            .sum()
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }
}

/// The honest reference distribution for one basis ensemble.
///
/// Correct basis: equal-weight mixture of Gaussians at `+-mu`; wrong basis: a
/// single zero-mean Gaussian. `mu` and `sigma` come from the physics model
/// for the given signal intensity and channel.
pub fn expected_pdf(
    tag: BasisTag,
    n_sig: f64,
    channel: &ChannelModel,
) -> Result<GaussianMixture, DetectionError> {
    let pulse = CoherentPulse::new(n_sig, 0.0)?;
    let mu = quadrature_mean(&pulse, channel, BobBasis::B0);
    let sigma = quadrature_sigma(channel)?;
    Ok(match tag {
        BasisTag::CorrectBasis => {
            GaussianMixture::new(vec![(0.5, mu, sigma), (0.5, -mu, sigma)])
        }
        BasisTag::WrongBasis => GaussianMixture::new(vec![(1.0, 0.0, sigma)]),
    })
}

/// Outcome of one statistical test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub test_name: String,
    pub statistic: f64,
    pub p_value: f64,
    /// True when `p_value < alpha`.
    pub alarm: bool,
}

fn check_samples(samples: &[f64]) -> Result<(), DetectionError> {
    if samples.len() < MIN_SAMPLES {
        return Err(DetectionError::TooFewSamples(samples.len()));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(DetectionError::NonFiniteSample);
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<(), DetectionError> {
    if !alpha.is_finite() || alpha <= 0.0 || alpha >= 1.0 {
        return Err(DetectionError::InvalidAlpha(alpha));
    }
    Ok(())
}

/// Complement of the Kolmogorov distribution, `Q(lambda) = P(D > lambda)`.
///
/// Alternating series; enough terms for absolute error far below any
/// significance level used in practice.
fn ks_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        let signed = if (k as i64) % 2 == 1 { term } else { -term };
        sum += signed;
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov-Smirnov test of `samples` against the expected
/// cumulative distribution.
pub fn goodness_of_fit(
    samples: &[f64],
    expected: &GaussianMixture,
    alpha: f64,
) -> Result<FitReport, DetectionError> {
    check_samples(samples)?;
    check_alpha(alpha)?;
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in sorted.iter().enumerate() {
        let f = expected.cdf(*x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    // Asymptotic p-value with the small-sample correction of the effective
    // sample size (Stephens).
    let sqrt_n = n.sqrt();
    let p_value = ks_survival((sqrt_n + 0.12 + 0.11 / sqrt_n) * d);
    Ok(FitReport {
        test_name: "ks".to_string(),
        statistic: d,
        p_value,
        alarm: p_value < alpha,
    })
}

/// Two-sided z-tests of the sample mean and variance against the expected
/// mixture moments.
///
/// The variance test uses the plug-in fourth-moment standard error, so it
/// stays calibrated for non-Gaussian (mixture) nulls. The two sub-tests are
/// Bonferroni-combined: reported `p_value = min(2 min(p_mean, p_var), 1)`,
/// and the statistic is the larger |z|.
pub fn moment_check(
    samples: &[f64],
    expected_mu: f64,
    expected_sigma: f64,
    alpha: f64,
) -> Result<FitReport, DetectionError> {
    check_samples(samples)?;
    check_alpha(alpha)?;
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    let m4 = samples
        .iter()
        .map(|x| (x - mean).powi(4))
        .sum::<f64>()
        / n;
    let z_mean = (mean - expected_mu) / (expected_sigma / n.sqrt());
    let var_se = ((m4 - var * var).max(f64::MIN_POSITIVE) / n).sqrt();
    let z_var = (var - expected_sigma * expected_sigma) / var_se;
    let p_mean = 2.0 * normal_cdf(-z_mean.abs());
    let p_var = 2.0 * normal_cdf(-z_var.abs());
    let p_value = (2.0 * p_mean.min(p_var)).min(1.0);
    let statistic = z_mean.abs().max(z_var.abs());
    Ok(FitReport {
        test_name: "moments".to_string(),
        statistic,
        p_value,
        alarm: p_value < alpha,
    })
}

/// Binned quadrature samples for export and plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureHistogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub basis_tag: BasisTag,
    pub total: u64,
}

impl QuadratureHistogram {
    /// Bin `samples` into `[edges[i], edges[i+1])`; values outside the edge
    /// range are not counted.
    pub fn from_samples(
        bin_edges: Vec<f64>,
        samples: &[f64],
        basis_tag: BasisTag,
    ) -> Result<Self, DetectionError> {
        if bin_edges.len() < 2 || bin_edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(DetectionError::BadBinEdges);
        }
        let mut counts = vec![0u64; bin_edges.len() - 1];
        for &x in samples {
            if x < bin_edges[0] || x >= bin_edges[bin_edges.len() - 1] {
                continue;
            }
            let idx = bin_edges.partition_point(|&e| e <= x) - 1;
            counts[idx] += 1;
        }
        let total = counts.iter().sum();
        Ok(Self {
            bin_edges,
            counts,
            basis_tag,
            total,
        })
    }

    /// Evenly spaced bins over `[lo, hi]`.
    pub fn with_uniform_bins(
        lo: f64,
        hi: f64,
        n_bins: usize,
        samples: &[f64],
        basis_tag: BasisTag,
    ) -> Result<Self, DetectionError> {
        if n_bins == 0 || lo >= hi || !lo.is_finite() || !hi.is_finite() {
            return Err(DetectionError::BadBinEdges);
        }
        let width = (hi - lo) / n_bins as f64;
        let edges = (0..=n_bins).map(|i| lo + width * i as f64).collect();
        Self::from_samples(edges, samples, basis_tag)
    }

    /// CSV rows `bin_left,bin_right,count`, one per bin, with a header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "bin_left,bin_right,count")?;
        for (i, count) in self.counts.iter().enumerate() {
            writeln!(
                w,
                "{},{},{}",
                crate::protocol::fmt_sig(self.bin_edges[i]),
                crate::protocol::fmt_sig(self.bin_edges[i + 1]),
                count
            )?;
        }
        Ok(())
    }
}

//! Eavesdropping strategies and their discrimination power.
//!
//! Three attack families are modeled:
//!
//! * **Intercept-resend, single basis** — Eve measures each intercepted pulse
//!   in a randomly chosen basis exactly as the receiver would, decides the
//!   phase from the sign of her outcome, and resends a fresh pulse at the
//!   decided phase. For half of the pulses her basis carries no information.
//! * **Intercept-resend, dual basis** — Eve splits the pulse 50-50 and
//!   measures both quadratures simultaneously. Each arm sees only half the
//!   signal energy, so the means shrink by `sqrt(2)` while the vacuum noise
//!   does not: the extra-noise penalty for measuring two noncommuting
//!   observables at once. She then picks the maximum-likelihood phase.
//! * **Beamsplitting** — Eve taps a fraction of the light. A coherent state
//!   splits into a product of two coherent states, so her outcomes are
//!   statistically independent of the receiver's and the transmitted state is
//!   unchanged apart from the energy split.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{cos_deg, normal_pdf, normal_sf, sin_deg};
use crate::physics::{AlicePhase, BobBasis, CoherentPulse};
use crate::rng::SimRng;

#[derive(Debug, Error, PartialEq)]
pub enum AttackError {
    #[error("{name} must lie in [0, 1], got {value}")]
    OutOfUnitRange { name: &'static str, value: f64 },
    #[error("resend photon number must be finite and >= 0, got {0}")]
    InvalidResendPhotonNumber(f64),
    #[error("intercept_resend requires an intercept-resend strategy")]
    NotInterceptStrategy,
}

/// What Eve sends toward the receiver after a successful interception.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResendPolicy {
    /// Mean photon number of the substitute pulse.
    pub resend_n_sig: f64,
    /// Fraction of attacked pulses replaced by vacuum instead.
    #[serde(default)]
    pub vacuum_fraction: f64,
}

impl ResendPolicy {
    pub fn validate(&self) -> Result<(), AttackError> {
        if !self.resend_n_sig.is_finite() || self.resend_n_sig < 0.0 {
            return Err(AttackError::InvalidResendPhotonNumber(self.resend_n_sig));
        }
        if !self.vacuum_fraction.is_finite() || !(0.0..=1.0).contains(&self.vacuum_fraction) {
            return Err(AttackError::OutOfUnitRange {
                name: "vacuum_fraction",
                value: self.vacuum_fraction,
            });
        }
        Ok(())
    }
}

/// Eve's strategy for a session.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant")]
pub enum EveStrategy {
    /// No eavesdropper on the line.
    #[default]
    None,
    /// Measure a fraction of pulses in one randomly chosen basis and resend.
    InterceptResendSingleBasis {
        intercept_fraction: f64,
        resend: ResendPolicy,
    },
    /// Measure a fraction of pulses in both bases at once and resend.
    InterceptResendDualBasis {
        intercept_fraction: f64,
        resend: ResendPolicy,
    },
    /// Tap a fraction of every pulse's energy with a beamsplitter.
    BeamSplit { tap_fraction: f64 },
}

impl EveStrategy {
    pub fn is_active(&self) -> bool {
        !matches!(self, EveStrategy::None)
    }

    pub fn validate(&self) -> Result<(), AttackError> {
        match self {
            EveStrategy::None => Ok(()),
            EveStrategy::InterceptResendSingleBasis {
                intercept_fraction,
                resend,
            }
            | EveStrategy::InterceptResendDualBasis {
                intercept_fraction,
                resend,
            } => {
                if !intercept_fraction.is_finite() || !(0.0..=1.0).contains(intercept_fraction) {
                    return Err(AttackError::OutOfUnitRange {
                        name: "intercept_fraction",
                        value: *intercept_fraction,
                    });
                }
                resend.validate()
            }
            EveStrategy::BeamSplit { tap_fraction } => {
                if !tap_fraction.is_finite() || !(0.0..=1.0).contains(tap_fraction) {
                    return Err(AttackError::OutOfUnitRange {
                        name: "tap_fraction",
                        value: *tap_fraction,
                    });
                }
                Ok(())
            }
        }
    }
}

/// Split a coherent pulse on a beamsplitter with tap ratio `tap`.
///
/// Returns `(toward_bob, kept_by_eve)`; both keep the sender's phase, and the
/// photon numbers sum to the input exactly (the larger share is always the
/// one obtained by subtraction, which is error-free in that regime).
pub fn beamsplit(pulse: &CoherentPulse, tap: f64) -> (CoherentPulse, CoherentPulse) {
    let n = pulse.n_sig();
    let (bob_n, eve_n) = if tap >= 0.5 {
        let eve = n * tap;
        (n - eve, eve)
    } else {
        let bob = n * (1.0 - tap);
        (bob, n - bob)
    };
    let phase = pulse.phase_a_deg();
    (
        CoherentPulse::new(bob_n, phase).expect("split photon number is valid"),
        CoherentPulse::new(eve_n, phase).expect("split photon number is valid"),
    )
}

/// Outcome of Eve's simultaneous two-basis measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualBasisOutcome {
    /// Quadrature at the 0°-LO output port.
    pub x: f64,
    /// Quadrature at the 90°-LO output port.
    pub p: f64,
    /// Maximum-likelihood phase for `(x, p)`.
    pub phase_estimate: AlicePhase,
}

/// Measure a pulse in both bases at once through a 50-50 splitter.
///
/// Each port sees an amplitude reduced by `sqrt(2)` with unchanged vacuum
/// noise: `x ~ N(sqrt(n/2) cos phi, 1/2)`, `p ~ N(sqrt(n/2) sin phi, 1/2)`,
/// independent.
pub fn dual_basis_measure(pulse: &CoherentPulse, rng: &mut SimRng) -> DualBasisOutcome {
    let amp = (pulse.n_sig() / 2.0).sqrt();
    let mean_x = amp * cos_deg(pulse.phase_a_deg());
    let mean_p = amp * sin_deg(pulse.phase_a_deg());
    let vacuum = Normal::new(0.0, 0.5).unwrap();
    let x = mean_x + vacuum.sample(rng);
    let p = mean_p + vacuum.sample(rng);
    DualBasisOutcome {
        x,
        p,
        phase_estimate: ml_phase_estimate(x, p),
    }
}

/// Maximum-likelihood phase for a joint `(x, p)` outcome: the protocol phase
/// whose mean vector is nearest. Ties go to the first of 0°, 90°, 180°, 270°.
pub fn ml_phase_estimate(x: f64, p: f64) -> AlicePhase {
    // Nearest mean vector = largest inner product with the unit direction.
    let scores = [x, p, -x, -p];
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if *s > scores[best] {
            best = i;
        }
    }
    AlicePhase::from_index(best)
}

/// Probability that the maximum-likelihood estimate recovers the sender's
/// phase, for phases drawn uniformly from the four-symbol alphabet.
///
/// By symmetry this equals the probability, given phase 0°, that the
/// 0°-port outcome exceeds the absolute value of the 90°-port outcome:
/// `E_p[ P(x > |p|) ]`, evaluated here by Simpson quadrature over the
/// 90°-port density.
pub fn discrimination_probability(n_sig: f64) -> f64 {
    let m = (n_sig / 2.0).sqrt();
    let sigma = 0.5;
    // Integrand over p: pdf(p) * P(x > |p|), x ~ N(m, sigma).
    let f = |p: f64| {
        let density = normal_pdf(p / sigma) / sigma;
        density * normal_sf((p.abs() - m) / sigma)
    };
    // p is centered at 0 with width sigma; +-12 sigma covers the mass.
    let (lo, hi) = (-12.0 * sigma, 12.0 * sigma);
    let n = 20_000usize;
    let h = (hi - lo) / n as f64;
    let mut total = f(lo) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 0 { 2.0 } else { 4.0 };
        total += w * f(lo + h * i as f64);
    }
    total * h / 3.0
}

/// Apply an intercept-resend strategy to one pulse.
///
/// With probability `intercept_fraction` Eve measures the pulse (one basis or
/// both, per the strategy), then forwards either vacuum (with probability
/// `vacuum_fraction`) or a fresh pulse of `resend_n_sig` photons at her
/// estimated phase. Unattacked pulses pass through unchanged.
pub fn intercept_resend(
    pulse: &CoherentPulse,
    strategy: &EveStrategy,
    rng: &mut SimRng,
) -> Result<CoherentPulse, AttackError> {
    let (outcome, _) = intercept_resend_traced(pulse, strategy, rng)?;
    Ok(outcome)
}

/// Like [`intercept_resend`], additionally reporting what Eve learned
/// (`None` when the pulse passed unattacked).
pub fn intercept_resend_traced(
    pulse: &CoherentPulse,
    strategy: &EveStrategy,
    rng: &mut SimRng,
) -> Result<(CoherentPulse, Option<InterceptTrace>), AttackError> {
    strategy.validate()?;
    let (fraction, resend, dual) = match strategy {
        EveStrategy::InterceptResendSingleBasis {
            intercept_fraction,
            resend,
        } => (*intercept_fraction, *resend, false),
        EveStrategy::InterceptResendDualBasis {
            intercept_fraction,
            resend,
        } => (*intercept_fraction, *resend, true),
        _ => return Err(AttackError::NotInterceptStrategy),
    };
    if !rng.random_bool(fraction) {
        return Ok((*pulse, None));
    }
    let trace = if dual {
        let outcome = dual_basis_measure(pulse, rng);
        InterceptTrace {
            basis: None,
            x: outcome.x,
            p: Some(outcome.p),
            phase_estimate: outcome.phase_estimate,
        }
    } else {
        let basis = if rng.random_bool(0.5) {
            BobBasis::B90
        } else {
            BobBasis::B0
        };
        // Full-intensity homodyne with an ideal detector; sign decision.
        let mean = pulse.n_sig().sqrt() * cos_deg(pulse.phase_a_deg() - basis.degrees());
        let x = mean + Normal::new(0.0, 0.5).unwrap().sample(rng);
        let phase_estimate = match (basis, x >= 0.0) {
            (BobBasis::B0, true) => AlicePhase::P0,
            (BobBasis::B0, false) => AlicePhase::P180,
            (BobBasis::B90, true) => AlicePhase::P90,
            (BobBasis::B90, false) => AlicePhase::P270,
        };
        InterceptTrace {
            basis: Some(basis),
            x,
            p: None,
            phase_estimate,
        }
    };
    let resent_n = if rng.random_bool(resend.vacuum_fraction) {
        0.0
    } else {
        resend.resend_n_sig
    };
    let resent = CoherentPulse::new(resent_n, trace.phase_estimate.degrees())
        .expect("validated resend parameters");
    Ok((resent, Some(trace)))
}

/// Record of one interception.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterceptTrace {
    /// Basis of a single-basis measurement (`None` for dual-basis).
    pub basis: Option<BobBasis>,
    /// Measured quadrature (0°-port value for dual-basis).
    pub x: f64,
    /// 90°-port value for dual-basis measurements.
    pub p: Option<f64>,
    /// The phase Eve decided on and resent.
    pub phase_estimate: AlicePhase,
}

//! Quadrature statistics of weak coherent pulses under balanced homodyne
//! detection.
//!
//! In the normalization used throughout this crate the quadrature amplitude
//! is `X = N / (2 sqrt(n_LO))` where `N` is the photoelectron difference of
//! the balanced detector, so a vacuum (or coherent) state has standard
//! deviation 1/2. A coherent pulse of mean photon number `n_sig` measured at
//! total phase `phi = phi_A - phi_B` produces a Gaussian with mean
//! `sqrt(n_sig T eta_PD) V cos(phi)`:
//!
//! * channel transmittance `T` and detector efficiency `eta_PD` attenuate the
//!   amplitude by a square root, leaving the vacuum-limited width unchanged
//!   (beamsplitter loss model);
//! * fringe visibility `V` scales the mean only;
//! * amplifier noise adds in quadrature as `sigma_e = N_e / (2 sqrt(n_LO
//!   eta_PD))`, so the total width is `sqrt(1/4 + sigma_e^2)`. The
//!   photoelectron-vs-photon normalization of `sigma_e` is a modeling choice,
//!   so [`ChannelModel::sigma_e_override`] can pin it directly when fitting
//!   measured widths.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::{cos_deg, normal_pdf};
use crate::rng::SimRng;

#[derive(Debug, Error, PartialEq)]
pub enum PhysicsError {
    #[error("mean photon number must be finite and >= 0, got {0}")]
    InvalidPhotonNumber(f64),
    #[error("phase must be finite, got {0}")]
    InvalidPhase(f64),
    #[error("{name} must lie in [0, 1], got {value}")]
    OutOfUnitRange { name: &'static str, value: f64 },
    #[error("LO photon number must be > 0, got {0}")]
    InvalidLoPhotonNumber(f64),
    #[error("electronic noise must be finite and >= 0, got {0}")]
    InvalidElectronicNoise(f64),
    #[error("noise normalization undefined: electronic noise > 0 but n_lo * eta_PD = 0")]
    UndefinedNoiseNormalization,
}

/// A weak coherent signal pulse: mean photon number and the sender's phase.
///
/// Protocol traffic uses the four phases 0°, 90°, 180°, 270°; arbitrary
/// phases are accepted for testing. `n_sig = 0` is a valid vacuum pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoherentPulse {
    n_sig: f64,
    phase_a_deg: f64,
}

impl CoherentPulse {
    /// Phase is normalized into [0, 360).
    pub fn new(n_sig: f64, phase_a_deg: f64) -> Result<Self, PhysicsError> {
        if !n_sig.is_finite() || n_sig < 0.0 {
            return Err(PhysicsError::InvalidPhotonNumber(n_sig));
        }
        if !phase_a_deg.is_finite() {
            return Err(PhysicsError::InvalidPhase(phase_a_deg));
        }
        Ok(Self {
            n_sig,
            phase_a_deg: phase_a_deg.rem_euclid(360.0),
        })
    }

    /// A vacuum pulse (what an eavesdropper "sends" when she sends nothing).
    pub fn vacuum() -> Self {
        Self {
            n_sig: 0.0,
            phase_a_deg: 0.0,
        }
    }

    pub fn n_sig(&self) -> f64 {
        self.n_sig
    }

    pub fn phase_a_deg(&self) -> f64 {
        self.phase_a_deg
    }
}

/// Transmission line and receiver imperfections.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelModel {
    /// Line transmittance T.
    #[serde(default = "one")]
    pub transmittance: f64,
    /// Interference fringe visibility V.
    #[serde(default = "one")]
    pub visibility: f64,
    /// Photodiode quantum efficiency eta_PD.
    #[serde(default = "one")]
    pub detector_efficiency: f64,
    /// Local-oscillator mean photon number per pulse.
    #[serde(default = "default_n_lo")]
    pub n_lo: f64,
    /// RMS photoelectron count of the amplifier noise.
    #[serde(default)]
    pub electronic_noise_electrons: f64,
    /// When set, use this value for sigma_e instead of deriving it from the
    /// electron count (free fit parameter for matching measured widths).
    #[serde(default)]
    pub sigma_e_override: Option<f64>,
    /// Standard deviation of a zero-mean Gaussian phase jitter applied to
    /// each pulse when sampling, in degrees. Off by default; models
    /// interferometer drift.
    #[serde(default)]
    pub phase_jitter_deg: f64,
}

fn one() -> f64 {
    1.0
}

fn default_n_lo() -> f64 {
    2e6
}

impl Default for ChannelModel {
    fn default() -> Self {
        Self::ideal()
    }
}

impl ChannelModel {
    /// Lossless, noiseless channel: T = V = eta_PD = 1, no amplifier noise.
    pub fn ideal() -> Self {
        Self {
            transmittance: 1.0,
            visibility: 1.0,
            detector_efficiency: 1.0,
            n_lo: default_n_lo(),
            electronic_noise_electrons: 0.0,
            sigma_e_override: None,
            phase_jitter_deg: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), PhysicsError> {
        for (name, value) in [
            ("transmittance", self.transmittance),
            ("visibility", self.visibility),
            ("detector_efficiency", self.detector_efficiency),
        ] {
            if !value.is_finite() || !(0.0..=1.0).contains(&value) {
                return Err(PhysicsError::OutOfUnitRange { name, value });
            }
        }
        if !self.n_lo.is_finite() || self.n_lo <= 0.0 {
            return Err(PhysicsError::InvalidLoPhotonNumber(self.n_lo));
        }
        if !self.electronic_noise_electrons.is_finite() || self.electronic_noise_electrons < 0.0 {
            return Err(PhysicsError::InvalidElectronicNoise(
                self.electronic_noise_electrons,
            ));
        }
        if let Some(s) = self.sigma_e_override {
            if !s.is_finite() || s < 0.0 {
                return Err(PhysicsError::InvalidElectronicNoise(s));
            }
        }
        if !self.phase_jitter_deg.is_finite() || self.phase_jitter_deg < 0.0 {
            return Err(PhysicsError::InvalidPhase(self.phase_jitter_deg));
        }
        Ok(())
    }
}

/// A single homodyne outcome (dimensionless quadrature amplitude).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Quadrature(pub f64);

impl Quadrature {
    pub fn value(&self) -> f64 {
        self.0
    }
}

/// The receiver's local-oscillator phase: one of the two measurement bases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BobBasis {
    /// 0° LO phase shift.
    B0,
    /// 90° LO phase shift.
    B90,
}

impl BobBasis {
    pub fn degrees(&self) -> f64 {
        match self {
            BobBasis::B0 => 0.0,
            BobBasis::B90 => 90.0,
        }
    }
}

/// The four protocol phases available to the sender.
///
/// 0° and 90° encode bit 1; 180° and 270° encode bit 0. Phases 0°/180° are
/// read in the 0° basis, 90°/270° in the 90° basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AlicePhase {
    P0,
    P90,
    P180,
    P270,
}

impl AlicePhase {
    pub const ALL: [AlicePhase; 4] = [
        AlicePhase::P0,
        AlicePhase::P90,
        AlicePhase::P180,
        AlicePhase::P270,
    ];

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i % 4]
    }

    pub fn degrees(&self) -> f64 {
        match self {
            AlicePhase::P0 => 0.0,
            AlicePhase::P90 => 90.0,
            AlicePhase::P180 => 180.0,
            AlicePhase::P270 => 270.0,
        }
    }

    /// The key bit this phase encodes.
    pub fn bit(&self) -> bool {
        matches!(self, AlicePhase::P0 | AlicePhase::P90)
    }

    /// The receiver basis in which this phase is conclusive.
    pub fn encoding_basis(&self) -> BobBasis {
        match self {
            AlicePhase::P0 | AlicePhase::P180 => BobBasis::B0,
            AlicePhase::P90 | AlicePhase::P270 => BobBasis::B90,
        }
    }
}

/// Mean quadrature amplitude: `sqrt(n_sig T eta_PD) V cos(phi_A - phi_B)`.
pub fn quadrature_mean(pulse: &CoherentPulse, channel: &ChannelModel, basis: BobBasis) -> f64 {
    let amplitude =
        (pulse.n_sig * channel.transmittance * channel.detector_efficiency).sqrt();
    amplitude * channel.visibility * cos_deg(pulse.phase_a_deg - basis.degrees())
}

/// Standard deviation of the quadrature distribution:
/// `sqrt(1/4 + sigma_e^2)`, independent of the signal.
pub fn quadrature_sigma(channel: &ChannelModel) -> Result<f64, PhysicsError> {
    let sigma_e = match channel.sigma_e_override {
        Some(s) => s,
        None => {
            if channel.electronic_noise_electrons == 0.0 {
                0.0
            } else {
                let denom = channel.n_lo * channel.detector_efficiency;
                if denom <= 0.0 {
                    return Err(PhysicsError::UndefinedNoiseNormalization);
                }
                channel.electronic_noise_electrons / (2.0 * denom.sqrt())
            }
        }
    };
    Ok((0.25 + sigma_e * sigma_e).sqrt())
}

/// Probability density of measuring quadrature `x`.
pub fn quadrature_pdf(
    x: f64,
    pulse: &CoherentPulse,
    channel: &ChannelModel,
    basis: BobBasis,
) -> Result<f64, PhysicsError> {
    let mu = quadrature_mean(pulse, channel, basis);
    let sigma = quadrature_sigma(channel)?;
    Ok(normal_pdf((x - mu) / sigma) / sigma)
}

/// Draw one homodyne outcome.
///
/// With phase jitter enabled this consumes two normal draws per call (jitter
/// then noise), otherwise one; either way the sequence is fully determined by
/// the stream state.
pub fn sample_quadrature(
    pulse: &CoherentPulse,
    channel: &ChannelModel,
    basis: BobBasis,
    rng: &mut SimRng,
) -> Result<Quadrature, PhysicsError> {
    let sigma = quadrature_sigma(channel)?;
    let mu = if channel.phase_jitter_deg > 0.0 {
        let jitter: f64 = rng.sample(Normal::new(0.0, channel.phase_jitter_deg).unwrap());
        let jittered = CoherentPulse {
            n_sig: pulse.n_sig,
            phase_a_deg: (pulse.phase_a_deg + jitter).rem_euclid(360.0),
        };
        quadrature_mean(&jittered, channel, basis)
    } else {
        quadrature_mean(pulse, channel, basis)
    };
    let z: f64 = Normal::new(0.0, 1.0).unwrap().sample(rng);
    Ok(Quadrature(mu + sigma * z))
}

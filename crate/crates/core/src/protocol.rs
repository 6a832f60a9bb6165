//! The end-to-end key-distribution session engine.
//!
//! Per pulse: the sender draws one of four phases uniformly, the eavesdropper
//! (if any) transforms the pulse, the receiver draws one of two bases
//! uniformly, samples a homodyne outcome through the channel model, and
//! applies the post-selection thresholds. After the pulse train: sifting
//! keeps conclusive correct-basis records and maps them to bits, a disclosed
//! random subset estimates the error rate, distribution tests compare both
//! basis ensembles against their honest shapes, and — when the estimated
//! error rate is below the abort threshold — the remaining key is compressed
//! through a seeded Toeplitz hash.
//!
//! Everything is deterministic given the configuration: each randomness
//! consumer owns a stream derived from the master seed (see [`crate::rng`]),
//! so the transcript and report are byte-stable across runs and platforms,
//! and sessions differing only in the eavesdropping strategy stay pairwise
//! comparable.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::{binary_entropy, AnalyticsError, ThresholdPolicy};
use crate::attacks::{
    beamsplit, intercept_resend_traced, AttackError, EveStrategy, InterceptTrace,
};
use crate::detection::{
    expected_pdf, goodness_of_fit, moment_check, BasisTag, DetectionError, FitReport, MIN_SAMPLES,
};
use crate::math::cos_deg;
use crate::physics::{
    quadrature_sigma, sample_quadrature, AlicePhase, BobBasis, ChannelModel, CoherentPulse,
    PhysicsError,
};
use crate::rng::{stream, SimRng, Stream};
use rand_distr::{Distribution, Normal};

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("a session needs at least one pulse")]
    ZeroPulses,
    #[error("{name} must lie in [0, 1], got {value}")]
    OutOfUnitRange { name: &'static str, value: f64 },
    #[error("key strings must have equal length, got {alice} and {bob}")]
    KeyLengthMismatch { alice: usize, bob: usize },
    #[error("hash output length {output} exceeds input length {input}")]
    OutputTooLong { output: usize, input: usize },
    #[error("Toeplitz diagonal needs {expected} bits, got {got}")]
    BadDiagonalLength { expected: usize, got: usize },
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error(transparent)]
    Detection(#[from] DetectionError),
}

/// The receiver's judgement for one pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Positive,
    Negative,
    Inconclusive,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Positive => "Positive",
            Outcome::Negative => "Negative",
            Outcome::Inconclusive => "Inconclusive",
        }
    }
}

/// Threshold rule: above `x_plus` positive, below `x_minus` negative,
/// inconclusive in between (boundary values are inconclusive).
pub fn judge(policy: &ThresholdPolicy, x: f64) -> Outcome {
    if x > policy.x_plus() {
        Outcome::Positive
    } else if x < policy.x_minus() {
        Outcome::Negative
    } else {
        Outcome::Inconclusive
    }
}

/// Everything recorded about one pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseRecord {
    pub index: u64,
    pub alice_phase: AlicePhase,
    pub bob_basis: BobBasis,
    pub quadrature: f64,
    pub outcome: Outcome,
    pub basis_correct: bool,
}

/// What the eavesdropper learned about one pulse (one entry per pulse when a
/// strategy is active).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EveObs {
    pub attacked: bool,
    /// LO basis of a single-basis or tapped measurement.
    pub basis: Option<BobBasis>,
    /// Measured quadrature (0°-port value for dual-basis).
    pub x: Option<f64>,
    /// 90°-port value for dual-basis measurements.
    pub p: Option<f64>,
    pub phase_estimate: Option<AlicePhase>,
}

impl EveObs {
    fn idle() -> Self {
        Self {
            attacked: false,
            basis: None,
            x: None,
            p: None,
            phase_estimate: None,
        }
    }

    /// The key bit implied by the phase estimate.
    pub fn bit_estimate(&self) -> Option<bool> {
        self.phase_estimate.map(|ph| ph.bit())
    }
}

fn default_disclosure() -> f64 {
    0.5
}

fn default_alpha() -> f64 {
    crate::detection::DEFAULT_ALPHA
}

fn default_abort_ber() -> f64 {
    // Conventional four-state abort point; this simulator estimates the
    // error rate but does not reconcile, so the final key is only produced
    // below this estimate.
    0.11
}

/// Full description of a session; two equal configs produce byte-identical
/// sessions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    pub n_pulses: u64,
    /// Mean photon number of the sender's signal pulses.
    pub n_sig: f64,
    #[serde(default)]
    pub channel: ChannelModel,
    pub policy: ThresholdPolicy,
    #[serde(default)]
    pub eve: EveStrategy,
    pub seed: u64,
    /// Fraction of the sifted key disclosed for error estimation.
    #[serde(default = "default_disclosure")]
    pub disclosure_fraction: f64,
    /// Significance level of the distribution tests.
    #[serde(default = "default_alpha")]
    pub detection_alpha: f64,
    /// Abort threshold on the estimated error rate.
    #[serde(default = "default_abort_ber")]
    pub abort_ber: f64,
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.n_pulses == 0 {
            return Err(ProtocolError::ZeroPulses);
        }
        // Reuse the pulse validation for the intensity.
        CoherentPulse::new(self.n_sig, 0.0)?;
        self.channel.validate()?;
        self.eve.validate()?;
        for (name, value) in [
            ("disclosure_fraction", self.disclosure_fraction),
            ("abort_ber", self.abort_ber),
        ] {
            if !value.is_finite() || !(0.0..=1.0).contains(&value) {
                return Err(ProtocolError::OutOfUnitRange { name, value });
            }
        }
        if !self.detection_alpha.is_finite()
            || self.detection_alpha <= 0.0
            || self.detection_alpha >= 1.0
        {
            return Err(DetectionError::InvalidAlpha(self.detection_alpha).into());
        }
        Ok(())
    }
}

mod bits_as_string {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bits: &[bool], s: S) -> Result<S::Ok, S::Error> {
        let text: String = bits.iter().map(|b| if *b { '1' } else { '0' }).collect();
        s.serialize_str(&text)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<bool>, D::Error> {
        let text = String::deserialize(d)?;
        text.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(serde::de::Error::custom(format!(
                    "invalid key bit {other:?}"
                ))),
            })
            .collect()
    }
}

/// Aggregate results of a session. Keys serialize as '0'/'1' strings; field
/// order here is the documented JSON key order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    /// Pulses for which the receiver chose the encoding basis.
    pub n_correct_basis: u64,
    /// Conclusive fraction among correct-basis pulses.
    pub p_d_measured: f64,
    /// Mismatch rate on the disclosed subset of the sifted key.
    pub ber_measured: f64,
    #[serde(with = "bits_as_string")]
    pub sifted_key_alice: Vec<bool>,
    #[serde(with = "bits_as_string")]
    pub sifted_key_bob: Vec<bool>,
    pub detection_reports: Vec<FitReport>,
    /// Privacy-amplified key (empty when the error estimate exceeds the
    /// abort threshold or nothing remains to hash).
    #[serde(with = "bits_as_string")]
    pub final_key: Vec<bool>,
}

/// A finished session: the per-pulse transcript, the eavesdropper's log (one
/// entry per pulse when a strategy is active, empty otherwise), and the
/// aggregate report.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub transcript: Vec<PulseRecord>,
    pub eve_log: Vec<EveObs>,
    pub report: SessionReport,
}

fn apply_eve(
    pulse: &CoherentPulse,
    alice_phase: AlicePhase,
    strategy: &EveStrategy,
    rng: &mut SimRng,
) -> Result<(CoherentPulse, EveObs), ProtocolError> {
    match strategy {
        EveStrategy::None => Ok((*pulse, EveObs::idle())),
        EveStrategy::InterceptResendSingleBasis { .. }
        | EveStrategy::InterceptResendDualBasis { .. } => {
            let (forwarded, trace) = intercept_resend_traced(pulse, strategy, rng)?;
            let obs = match trace {
                None => EveObs::idle(),
                Some(InterceptTrace {
                    basis,
                    x,
                    p,
                    phase_estimate,
                }) => EveObs {
                    attacked: true,
                    basis,
                    x: Some(x),
                    p,
                    phase_estimate: Some(phase_estimate),
                },
            };
            Ok((forwarded, obs))
        }
        EveStrategy::BeamSplit { tap_fraction } => {
            let (to_bob, kept) = beamsplit(pulse, *tap_fraction);
            // Eve measures her share in the encoding basis (the most
            // favorable case for her) with an ideal detector.
            let enc_basis = alice_phase.encoding_basis();
            let mean = kept.n_sig().sqrt() * cos_deg(kept.phase_a_deg() - enc_basis.degrees());
            let x = mean + Normal::new(0.0, 0.5).unwrap().sample(rng);
            let phase_estimate = match (enc_basis, x >= 0.0) {
                (BobBasis::B0, true) => AlicePhase::P0,
                (BobBasis::B0, false) => AlicePhase::P180,
                (BobBasis::B90, true) => AlicePhase::P90,
                (BobBasis::B90, false) => AlicePhase::P270,
            };
            Ok((
                to_bob,
                EveObs {
                    attacked: true,
                    basis: Some(enc_basis),
                    x: Some(x),
                    p: None,
                    phase_estimate: Some(phase_estimate),
                },
            ))
        }
    }
}

/// Run one session end to end.
pub fn run_session(config: &SessionConfig) -> Result<Session, ProtocolError> {
    config.validate()?;
    quadrature_sigma(&config.channel)?; // fail fast on a degenerate noise model

    let mut alice_rng = stream(config.seed, Stream::AlicePhase);
    let mut basis_rng = stream(config.seed, Stream::BobBasis);
    let mut noise_rng = stream(config.seed, Stream::BobNoise);
    let mut eve_rng = stream(config.seed, Stream::Eve);

    let n = config.n_pulses as usize;
    let mut transcript = Vec::with_capacity(n);
    let mut eve_log = Vec::with_capacity(if config.eve.is_active() { n } else { 0 });

    for index in 0..config.n_pulses {
        let alice_phase = AlicePhase::from_index(alice_rng.random_range(0..4usize));
        let pulse = CoherentPulse::new(config.n_sig, alice_phase.degrees())?;
        let (toward_bob, obs) = apply_eve(&pulse, alice_phase, &config.eve, &mut eve_rng)?;
        if config.eve.is_active() {
            eve_log.push(obs);
        }
        let bob_basis = if basis_rng.random_bool(0.5) {
            BobBasis::B90
        } else {
            BobBasis::B0
        };
        let quadrature =
            sample_quadrature(&toward_bob, &config.channel, bob_basis, &mut noise_rng)?.value();
        let outcome = judge(&config.policy, quadrature);
        transcript.push(PulseRecord {
            index,
            alice_phase,
            bob_basis,
            quadrature,
            outcome,
            basis_correct: alice_phase.encoding_basis() == bob_basis,
        });
    }

    let report = build_report(config, &transcript)?;
    Ok(Session {
        transcript,
        eve_log,
        report,
    })
}

fn build_report(
    config: &SessionConfig,
    transcript: &[PulseRecord],
) -> Result<SessionReport, ProtocolError> {
    let n_correct_basis = transcript.iter().filter(|r| r.basis_correct).count() as u64;
    let conclusive_correct = transcript
        .iter()
        .filter(|r| r.basis_correct && r.outcome != Outcome::Inconclusive)
        .count() as u64;
    let p_d_measured = if n_correct_basis == 0 {
        0.0
    } else {
        conclusive_correct as f64 / n_correct_basis as f64
    };

    let (alice_bits, bob_bits) = sift(transcript);

    let mut disclosure_rng = stream(config.seed, Stream::Disclosure);
    let (ber_measured, remaining_alice, remaining_bob) = estimate_ber(
        &alice_bits,
        &bob_bits,
        config.disclosure_fraction,
        &mut disclosure_rng,
    )?;

    let detection_reports = run_detection_tests(config, transcript)?;

    let final_key = if ber_measured <= config.abort_ber && !remaining_alice.is_empty() {
        let out_len =
            (remaining_alice.len() as f64 * (1.0 - binary_entropy(ber_measured))).floor() as usize;
        let hash_seed = stream(config.seed, Stream::Hash).random::<u64>();
        privacy_amplification(&remaining_alice, out_len, hash_seed)?
    } else {
        Vec::new()
    };

    Ok(SessionReport {
        n_correct_basis,
        p_d_measured,
        ber_measured,
        sifted_key_alice: remaining_alice,
        sifted_key_bob: remaining_bob,
        detection_reports,
        final_key,
    })
}

/// Intensity the receiver's monitoring is calibrated against: a beamsplitter
/// tap rescales the delivered signal, and the receiver only ever knows the
/// received intensity.
fn delivered_n_sig(config: &SessionConfig) -> f64 {
    match config.eve {
        EveStrategy::BeamSplit { tap_fraction } => config.n_sig * (1.0 - tap_fraction),
        _ => config.n_sig,
    }
}

fn run_detection_tests(
    config: &SessionConfig,
    transcript: &[PulseRecord],
) -> Result<Vec<FitReport>, ProtocolError> {
    let mut reports = Vec::new();
    let n_detect = delivered_n_sig(config);
    for (tag, label) in [
        (BasisTag::CorrectBasis, "correct_basis"),
        (BasisTag::WrongBasis, "wrong_basis"),
    ] {
        let samples: Vec<f64> = transcript
            .iter()
            .filter(|r| r.basis_correct == (tag == BasisTag::CorrectBasis))
            .map(|r| r.quadrature)
            .collect();
        if samples.len() < MIN_SAMPLES {
            continue;
        }
        let expected = expected_pdf(tag, n_detect, &config.channel)?;
        let mut ks = goodness_of_fit(&samples, &expected, config.detection_alpha)?;
        ks.test_name = format!("ks_{label}");
        reports.push(ks);
        let mut moments = moment_check(
            &samples,
            expected.mean(),
            expected.std_dev(),
            config.detection_alpha,
        )?;
        moments.test_name = format!("moments_{label}");
        reports.push(moments);
    }
    Ok(reports)
}

/// Keep conclusive correct-basis records and map them to bits: phases 0°/90°
/// encode 1 and 180°/270° encode 0 for the sender; positive results are 1 and
/// negative results 0 for the receiver.
pub fn sift(transcript: &[PulseRecord]) -> (Vec<bool>, Vec<bool>) {
    let mut alice = Vec::new();
    let mut bob = Vec::new();
    for record in transcript {
        if !record.basis_correct || record.outcome == Outcome::Inconclusive {
            continue;
        }
        alice.push(record.alice_phase.bit());
        bob.push(record.outcome == Outcome::Positive);
    }
    (alice, bob)
}

/// Disclose a random fraction of the sifted key, measure the mismatch rate on
/// it, and drop the disclosed positions from both keys.
///
/// With `fraction > 0` and a non-empty key at least one bit is disclosed.
/// With `fraction = 0` nothing is disclosed and the estimate is reported as
/// zero.
pub fn estimate_ber(
    alice_bits: &[bool],
    bob_bits: &[bool],
    disclosure_fraction: f64,
    rng: &mut SimRng,
) -> Result<(f64, Vec<bool>, Vec<bool>), ProtocolError> {
    if alice_bits.len() != bob_bits.len() {
        return Err(ProtocolError::KeyLengthMismatch {
            alice: alice_bits.len(),
            bob: bob_bits.len(),
        });
    }
    if !disclosure_fraction.is_finite() || !(0.0..=1.0).contains(&disclosure_fraction) {
        return Err(ProtocolError::OutOfUnitRange {
            name: "disclosure_fraction",
            value: disclosure_fraction,
        });
    }
    let len = alice_bits.len();
    let k = if disclosure_fraction == 0.0 || len == 0 {
        0
    } else {
        ((len as f64 * disclosure_fraction).ceil() as usize).clamp(1, len)
    };
    // Partial Fisher-Yates: the first k entries become the disclosed set.
    let mut order: Vec<usize> = (0..len).collect();
    for i in 0..k {
        let j = rng.random_range(i..len);
        order.swap(i, j);
    }
    let mut disclosed = vec![false; len];
    let mut mismatches = 0usize;
    for &idx in order.iter().take(k) {
        disclosed[idx] = true;
        if alice_bits[idx] != bob_bits[idx] {
            mismatches += 1;
        }
    }
    let ber = if k == 0 {
        0.0
    } else {
        mismatches as f64 / k as f64
    };
    let remaining_alice: Vec<bool> = alice_bits
        .iter()
        .zip(&disclosed)
        .filter(|(_, d)| !**d)
        .map(|(b, _)| *b)
        .collect();
    let remaining_bob: Vec<bool> = bob_bits
        .iter()
        .zip(&disclosed)
        .filter(|(_, d)| !**d)
        .map(|(b, _)| *b)
        .collect();
    Ok((ber, remaining_alice, remaining_bob))
}

/// Multiply the key by a binary Toeplitz matrix given by its diagonal vector
/// `diag` (length `key.len() + out_len - 1`): `out[i] = XOR_j diag[i - j +
/// key.len() - 1] & key[j]`.
pub fn toeplitz_hash(
    key: &[bool],
    diag: &[bool],
    out_len: usize,
) -> Result<Vec<bool>, ProtocolError> {
    if out_len == 0 || key.is_empty() {
        return Ok(Vec::new());
    }
    let expected = key.len() + out_len - 1;
    if diag.len() != expected {
        return Err(ProtocolError::BadDiagonalLength {
            expected,
            got: diag.len(),
        });
    }
    let offset = key.len() - 1;
    let out = (0..out_len)
        .map(|i| {
            key.iter()
                .enumerate()
                .fold(false, |acc, (j, k)| acc ^ (*k && diag[i + offset - j]))
        })
        .collect();
    Ok(out)
}

/// Universal-hash key compression: a Toeplitz matrix with diagonal bits drawn
/// from a ChaCha stream seeded by `hash_seed` (least-significant bit first
/// within each 64-bit word). Deterministic and platform-independent.
pub fn privacy_amplification(
    key_bits: &[bool],
    output_length: usize,
    hash_seed: u64,
) -> Result<Vec<bool>, ProtocolError> {
    if output_length > key_bits.len() {
        return Err(ProtocolError::OutputTooLong {
            output: output_length,
            input: key_bits.len(),
        });
    }
    if output_length == 0 {
        return Ok(Vec::new());
    }
    let n_bits = key_bits.len() + output_length - 1;
    let mut rng = stream(hash_seed, Stream::Hash);
    let mut diag = Vec::with_capacity(n_bits);
    while diag.len() < n_bits {
        let word = rng.random::<u64>();
        for bit in 0..64 {
            if diag.len() == n_bits {
                break;
            }
            diag.push((word >> bit) & 1 == 1);
        }
    }
    toeplitz_hash(key_bits, &diag, output_length)
}

/// Numeric formatting used by every emitted artifact: 6 significant digits,
/// scientific notation outside `[1e-4, 1e6)`.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&mag) {
        format!("{x:.5e}")
    } else {
        let decimals = (5 - mag).max(0) as usize;
        format!("{x:.decimals$}")
    }
}

/// Transcript CSV: `index,alice_phase,bob_basis,quadrature,outcome,basis_correct`.
pub fn write_transcript_csv<W: Write>(
    transcript: &[PulseRecord],
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "index,alice_phase,bob_basis,quadrature,outcome,basis_correct")?;
    for r in transcript {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.index,
            r.alice_phase.degrees() as u32,
            r.bob_basis.degrees() as u32,
            fmt_sig(r.quadrature),
            r.outcome.as_str(),
            r.basis_correct
        )?;
    }
    Ok(())
}

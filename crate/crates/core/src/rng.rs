//! Seeded, splittable random streams.
//!
//! Every source of randomness in a session is drawn from its own ChaCha12
//! stream so that simulations are reproducible and so that, for example, an
//! eavesdropper's randomness never perturbs the sender's or receiver's
//! choices. Two sessions that share a seed but differ in the eavesdropping
//! strategy therefore see identical pulse phases, basis choices and detector
//! noise, which makes before/after comparisons exactly paired.
//!
//! The splitting rule: the master seed (a `u64`) seeds the cipher key via
//! `seed_from_u64`, and each purpose selects a distinct ChaCha stream number.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// The RNG used throughout the crate.
pub type SimRng = ChaCha12Rng;

/// Purpose-specific stream identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Sender's four-phase choices.
    AlicePhase,
    /// Receiver's basis choices.
    BobBasis,
    /// Receiver's homodyne outcome (quantum noise, electronic noise, jitter).
    BobNoise,
    /// Everything the eavesdropper does.
    Eve,
    /// Selection of disclosed bits for error estimation.
    Disclosure,
    /// Seed material for the privacy-amplification hash.
    Hash,
}

impl Stream {
    fn index(self) -> u64 {
        match self {
            Stream::AlicePhase => 0,
            Stream::BobBasis => 1,
            Stream::BobNoise => 2,
            Stream::Eve => 3,
            Stream::Disclosure => 4,
            Stream::Hash => 5,
        }
    }
}

/// Derive the stream for `purpose` from the master `seed`.
pub fn stream(seed: u64, purpose: Stream) -> SimRng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(purpose.index());
    rng
}

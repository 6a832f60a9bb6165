//! Simulation and analysis of a four-state quantum key distribution protocol
//! that detects weak coherent pulses with balanced homodyne detection instead
//! of photon counting.
//!
//! The crate is organized around the stages of a key-distribution session:
//!
//! * [`physics`] — quadrature statistics of coherent pulses under channel and
//!   detector imperfections, and seeded sampling of homodyne outcomes.
//! * [`analytics`] — closed-form post-selection performance (error rate,
//!   detection efficiency, mutual information) and threshold optimization.
//! * [`attacks`] — intercept-resend and beamsplitting eavesdropping models.
//! * [`detection`] — goodness-of-fit monitoring of the measured quadrature
//!   distributions, the receiver's tool for noticing state alteration.
//! * [`protocol`] — the end-to-end session engine: phase choices, sifting,
//!   error estimation, and privacy amplification.
//!
//! All randomness flows through explicitly seeded streams (see [`rng`]), so
//! every simulation is reproducible bit-for-bit from its configuration.

pub mod analytics;
pub mod attacks;
pub mod detection;
mod math;
pub mod physics;
pub mod protocol;
pub mod rng;

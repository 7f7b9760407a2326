//! Variable-length channel quantizers for limited-feedback MISO systems.
//!
//! A `t × 1` Rayleigh channel `h ~ CN(0, I)` is quantized at the receiver
//! and a prefix-free codeword is fed back to the transmitter, which then
//! beamforms (one BPSK symbol along a unit vector) or precodes an orthogonal
//! space-time block code. The crate provides:
//!
//! * [`numerics`]: Gaussian tail, gamma-weighted quadrature, log-log fits.
//! * [`channel`]: seeded channel sampling and Haar unitaries.
//! * [`codebook`]: greedy covering codebooks with probabilistic certification.
//! * [`quantizer`]: full-CSIT maps, fixed- and variable-length encoders.
//! * [`stbc`]: orthogonal designs and a symbol-level Monte Carlo check.
//! * [`estimate`]: semi-analytic SER / feedback-rate sweeps and gain fits.
//! * [`bounds`]: achievability and converse bound evaluators.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod channel;
pub mod codebook;
pub mod estimate;
pub mod numerics;
pub mod quantizer;
pub mod stbc;

pub use num_complex::Complex64;

pub use channel::{ChannelVector, RngStream};
pub use codebook::{BeamformingCodebook, CoveringReport, PrecodingCodebook};
pub use estimate::{Estimator, GainEstimate, QuantizerSpec, SweepRecord};
pub use numerics::{LogLogFit, QuadratureSpec};
pub use quantizer::{PrefixCode, QuantizerDecision, TransmitObject};
pub use stbc::OstbcDescriptor;

/// Convert a power given in dB to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("numeric non-convergence: estimate {estimate:e}, error estimate {error_estimate:e}")]
    NonConvergence { estimate: f64, error_estimate: f64 },
    #[error("matrix is not unitary (max |U†U - I| = {deviation:e})")]
    NotUnitary { deviation: f64 },
    #[error("channel vector is zero")]
    ZeroChannel,
    #[error(
        "covering certification failed at delta {delta}: worst correlation² {worst:.6} after {probes} probes (increase the stop streak)"
    )]
    CoveringFailed {
        delta: f64,
        worst: f64,
        probes: usize,
    },
    #[error("unsupported antenna count {0} for an orthogonal design (expected 2, 3 or 4)")]
    UnsupportedAntennas(usize),
    #[error("invalid codebook: {0}")]
    InvalidCodebook(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

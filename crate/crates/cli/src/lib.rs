//! Experiment driver: configuration, codebook lifecycle, sweeps, fits,
//! bound tables and the self-test.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod app;
pub mod config;
pub mod run;
pub mod selftest;

pub use config::{DeltaSpec, SimulationConfig};
pub use run::{run_config, RunOutcome};

/// Process exit statuses.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const INVARIANT: i32 = 3;
    pub const NON_CONVERGENCE: i32 = 4;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invariant failure: {0}")]
    Invariant(String),
    #[error("numeric non-convergence: {0}")]
    NonConvergence(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Invariant(_) => exit::INVARIANT,
            CliError::NonConvergence(_) => exit::NON_CONVERGENCE,
            CliError::Other(_) => exit::FAILURE,
        }
    }
}

impl From<vlqfb_core::Error> for CliError {
    fn from(e: vlqfb_core::Error) -> Self {
        use vlqfb_core::Error as E;
        match e {
            E::InvalidArgument(_) | E::UnsupportedAntennas(_) | E::Json(_) => CliError::Config(e.to_string()),
            E::NonConvergence { .. } => CliError::NonConvergence(e.to_string()),
            E::CoveringFailed { .. } | E::InvalidCodebook(_) | E::NotUnitary { .. } | E::ZeroChannel => {
                CliError::Invariant(e.to_string())
            }
            E::Io(_) => CliError::Other(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

//! Monte Carlo engine for two-tier downlink/uplink cellular simulations.
//!
//! The crate is organized bottom-up: deterministic seeding ([`rng`]),
//! point processes and spatial search ([`geometry`]), propagation and
//! fading ([`propagation`]), per-drop network state ([`network`]),
//! cell association ([`association`]), SINR and rate ([`linkmetrics`]),
//! drop orchestration ([`engine`]), and parameter sweeps ([`sweep`]).

pub mod association;
pub mod cli;
pub mod config;
pub mod engine;
pub mod geometry;
pub mod linkmetrics;
pub mod network;
pub mod propagation;
pub mod rng;
pub mod stats;
pub mod sweep;
pub mod validate;

use thiserror::Error;

/// Unified error type for simulation setup and execution.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("no base stations available for association")]
    NoBaseStations,

    #[error("zero-distance link between user and base station")]
    CoincidentNodes,

    #[error("empty sample set")]
    EmptySamples,

    #[error("drop {drop_index} still empty after {attempts} resampling attempts")]
    ResampleExhausted { drop_index: u64, attempts: u32 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    TomlParse(#[from] toml::de::Error),

    #[error("config serialize error: {0}")]
    TomlSerialize(#[from] toml::ser::Error),
}

impl SimError {
    /// Process exit code for this error: 2 for configuration problems,
    /// 3 for runtime failures. Usage errors exit 1 before reaching here.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::InvalidParameter(_)
            | Self::Config(_)
            | Self::TomlParse(_)
            | Self::TomlSerialize(_) => 2,
            Self::NoBaseStations
            | Self::CoincidentNodes
            | Self::EmptySamples
            | Self::ResampleExhausted { .. }
            | Self::Io(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, SimError>;

use std::path::PathBuf;

/// Errors produced by the simulator, detectors and experiment harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("packet carries no ground truth; genie detection needs it")]
    MissingTruth,

    #[error("block length {block_len} exceeds packet length {n_symbols}")]
    BlockTooLong { block_len: usize, n_symbols: usize },

    #[error("all beliefs vanished in block starting at symbol {start}")]
    DegenerateBeliefs { start: usize },

    #[error("empty XOR=1 cluster; gain estimation needs at least one symbol")]
    EmptyCluster,

    #[error("SNR bracket [{lo_db}, {hi_db}] dB does not straddle target BER {target}")]
    BracketMismatch { lo_db: f64, hi_db: f64, target: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: {source}")]
    SpecParse {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

//! Noncoherent detection of binary FSK physical-layer network coding at a two-way
//! relay: channel model, likelihoods, detectors, blind gain estimation and a Monte
//! Carlo BER harness.

pub mod detectors;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod likelihood;
pub mod model;
pub mod reference;
pub mod special;

pub use detectors::{
    bpd_block_posterior, bpd_detect, genie_detect, kd_detect, mpd_detect, Decision, KdOutcome,
    PhaseGrid, PosteriorGrid,
};
pub use error::{Error, Result};
pub use estimator::{kd_bpd, kd_mpd, EstimatorParams, GainEstimate};
pub use harness::{BerRecord, DetectorKind, ExperimentSpec};
pub use likelihood::LikelihoodContext;
pub use model::{ChannelState, Observation, Packet, SourcePair, SystemConfig};

//! Monte Carlo BER experiments and their CSV output.

mod run;
mod spec;

pub use run::{
    detect, interpolate_crossing, read_csv, run_ber_point, run_sweep, simulate_packet,
    snr_for_target_ber, write_csv, BerRecord, Crossing, CSV_HEADER,
};
pub use spec::{
    CfoScenario, DetectorKind, ExperimentSpec, GainScenario, GridSpec, PhaseScenario,
    StoppingRule, SystemSpec,
};

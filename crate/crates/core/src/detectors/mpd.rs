use super::{Decision, LikelihoodTable, PhaseGrid};
use crate::error::{Error, Result};
use crate::model::{Packet, SystemConfig};
use crate::special::log_sum_exp;

/// Symbol-by-symbol detection with the relative phase averaged out under a uniform
/// prior on `grid`'s phase points. The drift axis of `grid` is ignored. Ties go to 0.
pub fn mpd_detect(
    packet: &Packet,
    gains: (f64, f64),
    config: &SystemConfig,
    grid: &PhaseGrid,
) -> Result<Decision> {
    grid.validate()?;
    let table = LikelihoodTable::build(&packet.observations, gains, config.n0, grid);
    let ln_n = (grid.n_theta as f64).ln();
    let mut bits = Vec::with_capacity(packet.len());
    for n in 0..packet.len() {
        let l0 = log_sum_exp(table.row(n)) - ln_n;
        let l1 = table.s1[n];
        if l0 == f64::NEG_INFINITY && l1 == f64::NEG_INFINITY {
            return Err(Error::DegenerateBeliefs { start: n });
        }
        bits.push(u8::from(l1 > l0));
    }
    Ok(Decision::hard(bits))
}

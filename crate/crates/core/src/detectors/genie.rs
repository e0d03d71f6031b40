use super::Decision;
use crate::likelihood::{log_lik, LikelihoodContext};
use crate::model::{relative_phase, Packet, SystemConfig};
use crate::error::Result;

/// Maximum-likelihood decision with the true gains and phase track revealed.
///
/// Not realizable; used as the performance bound for the other detectors.
pub fn genie_detect(packet: &Packet, config: &SystemConfig) -> Result<Decision> {
    let truth = packet.truth()?;
    let ch = &truth.channel;
    let ctx = LikelihoodContext::new(ch.gain_a, ch.gain_b, config.n0)?;
    let mut bits = Vec::with_capacity(packet.len());
    let mut thetas = Vec::with_capacity(packet.len());
    for (n, obs) in packet.observations.iter().enumerate() {
        let theta = relative_phase(n, ch, config);
        let l0 = log_lik(*obs, 0, theta, &ctx);
        let l1 = log_lik(*obs, 1, theta, &ctx);
        bits.push(u8::from(l1 > l0));
        thetas.push(theta);
    }
    Ok(Decision {
        xor_bits: bits,
        theta_hat: Some(thetas),
        drift_hat: Some(ch.drift_per_symbol(config)),
    })
}

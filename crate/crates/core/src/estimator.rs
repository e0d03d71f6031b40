//! Blind channel-gain estimation from the symbols a rough detector labels `s = 1`,
//! and the composed KD-BPD / KD-MPD receivers.

use serde::{Deserialize, Serialize};

use crate::detectors::{bpd_detect, kd_detect, mpd_detect, Decision, PhaseGrid};
use crate::error::{Error, Result};
use crate::likelihood::log_rician;
use crate::model::{Packet, SystemConfig};
use crate::special::log_add_exp;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainEstimate {
    pub h_min: f64,
    pub h_max: f64,
    pub rough_min: f64,
    pub rough_max: f64,
    pub n_used: usize,
    pub flagged: bool,
}

/// Fine-search settings. The search half-width on each axis is
/// `max(beta_floor, beta_scale * rough)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorParams {
    pub beta_floor: f64,
    pub beta_scale: f64,
    pub n_grid: usize,
}

impl Default for EstimatorParams {
    fn default() -> Self {
        Self {
            beta_floor: 0.2,
            beta_scale: 0.3,
            n_grid: 25,
        }
    }
}

impl EstimatorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta_floor > 0.0 && self.beta_floor.is_finite()) {
            return Err(Error::InvalidConfig("beta_floor must be positive".into()));
        }
        if !(self.beta_scale >= 0.0 && self.beta_scale.is_finite()) {
            return Err(Error::InvalidConfig("beta_scale must be nonnegative".into()));
        }
        if self.n_grid < 2 {
            return Err(Error::InvalidConfig("n_grid must be at least 2".into()));
        }
        Ok(())
    }

    pub fn beta(&self, rough: f64) -> f64 {
        self.beta_floor.max(self.beta_scale * rough)
    }
}

/// Moment estimates: `sqrt(mean(min^2) - N0)` and `sqrt(mean(max^2) - N0)` over `i1`,
/// clamped at zero.
pub fn rough_gains(packet: &Packet, i1: &[usize], n0: f64) -> Result<(f64, f64)> {
    if i1.is_empty() {
        return Err(Error::InvalidInput("rough gain estimate needs at least one symbol".into()));
    }
    let (mut lo, mut hi) = (0.0, 0.0);
    for &n in i1 {
        let obs = packet
            .observations
            .get(n)
            .ok_or_else(|| Error::InvalidInput(format!("index {n} outside packet")))?;
        lo += obs.min_mag().powi(2);
        hi += obs.max_mag().powi(2);
    }
    let k = i1.len() as f64;
    Ok(((lo / k - n0).max(0.0).sqrt(), (hi / k - n0).max(0.0).sqrt()))
}

fn axis(center: f64, beta: f64, n_grid: usize) -> Vec<f64> {
    let lo = (center - beta).max(0.0);
    let hi = center + beta;
    let step = (hi - lo) / (n_grid - 1) as f64;
    (0..n_grid).map(|j| lo + j as f64 * step).collect()
}

/// Grid search of `sum_{n in i1} ln Pr(r_n | s = 1, h_min, h_max)` over
/// `[max(rough - beta, 0), rough + beta]` on each axis.
pub fn fine_gains(
    packet: &Packet,
    i1: &[usize],
    rough: (f64, f64),
    n0: f64,
    params: &EstimatorParams,
) -> Result<GainEstimate> {
    fine_gains_with_widths(
        packet,
        i1,
        rough,
        n0,
        (params.beta(rough.0), params.beta(rough.1)),
        params.n_grid,
    )
}

/// As [`fine_gains`] with explicit half-widths per axis.
pub fn fine_gains_with_widths(
    packet: &Packet,
    i1: &[usize],
    rough: (f64, f64),
    n0: f64,
    beta: (f64, f64),
    n_grid: usize,
) -> Result<GainEstimate> {
    if !(beta.0 > 0.0 && beta.1 > 0.0) {
        return Err(Error::InvalidInput("search half-width must be positive".into()));
    }
    if n_grid < 2 {
        return Err(Error::InvalidInput("n_grid must be at least 2".into()));
    }
    if i1.is_empty() {
        return Err(Error::InvalidInput("fine gain estimate needs at least one symbol".into()));
    }
    let grid_min = axis(rough.0, beta.0, n_grid);
    let grid_max = axis(rough.1, beta.1, n_grid);

    // ln Rician(r; h) per symbol and grid value, for both tones.
    let obs: Vec<_> = i1.iter().map(|&n| packet.observations[n]).collect();
    let table = |grid: &[f64], mag: fn(&crate::model::Observation) -> f64| -> Vec<f64> {
        let mut t = Vec::with_capacity(grid.len() * obs.len());
        for &h in grid {
            t.extend(obs.iter().map(|o| log_rician(mag(o), h, n0)));
        }
        t
    };
    let a1 = table(&grid_min, |o| o.mag1);
    let a2 = table(&grid_min, |o| o.mag2);
    let b1 = table(&grid_max, |o| o.mag1);
    let b2 = table(&grid_max, |o| o.mag2);

    let k = obs.len();
    let mut best = (f64::NEG_INFINITY, 0, 0);
    for p in 0..n_grid {
        for q in 0..n_grid {
            let mut total = 0.0;
            for n in 0..k {
                let x = a1[p * k + n] + b2[q * k + n];
                let y = b1[q * k + n] + a2[p * k + n];
                total += log_add_exp(x, y);
            }
            total -= k as f64 * std::f64::consts::LN_2;
            // strict: the first (lexicographically smallest) maximizer wins
            if total > best.0 {
                best = (total, p, q);
            }
        }
    }
    let (mut h_min, mut h_max) = (grid_min[best.1], grid_max[best.2]);
    if best.0 == f64::NEG_INFINITY {
        (h_min, h_max) = rough;
    }
    if h_min > h_max {
        std::mem::swap(&mut h_min, &mut h_max);
    }
    Ok(GainEstimate {
        h_min,
        h_max,
        rough_min: rough.0,
        rough_max: rough.1,
        n_used: k,
        flagged: false,
    })
}

/// KD partition, then rough and fine gain estimates on its `s = 1` cluster.
pub fn estimate_gains(packet: &Packet, n0: f64, params: &EstimatorParams) -> Result<GainEstimate> {
    params.validate()?;
    let kd = kd_detect(packet);
    let rough = rough_gains(packet, &kd.i1, n0)?;
    let mut est = fine_gains(packet, &kd.i1, rough, n0, params)?;
    est.flagged = kd.flagged;
    Ok(est)
}

/// KD-BPD receiver: blind gain estimation followed by belief-propagation detection.
pub fn kd_bpd(
    packet: &Packet,
    config: &SystemConfig,
    grid: &PhaseGrid,
    block_len: usize,
    params: &EstimatorParams,
) -> Result<(Decision, GainEstimate)> {
    let est = estimate_gains(packet, config.n0, params)?;
    let d = bpd_detect(packet, (est.h_min, est.h_max), config, grid, block_len)?;
    Ok((d, est))
}

/// KD-MPD receiver: blind gain estimation followed by phase-marginalized detection.
pub fn kd_mpd(
    packet: &Packet,
    config: &SystemConfig,
    grid: &PhaseGrid,
    params: &EstimatorParams,
) -> Result<(Decision, GainEstimate)> {
    let est = estimate_gains(packet, config.n0, params)?;
    let d = mpd_detect(packet, (est.h_min, est.h_max), config, grid)?;
    Ok((d, est))
}

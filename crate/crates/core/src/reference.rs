//! Exhaustive-enumeration posterior for tiny blocks, used to check the BP detector.
//!
//! The discretized model: `theta_0` uniform on the phase grid, `s_n` uniform on
//! `{0, 1}`, drift uniform on the drift grid, and `theta_{n+1}` obtained by moving
//! the mass at grid point `j` by `drift / step` bins, split linearly between the two
//! straddling points.

use crate::detectors::PhaseGrid;
use crate::error::{Error, Result};
use crate::likelihood::{log_lik, LikelihoodContext};
use crate::model::Observation;
use crate::special::log_sum_exp;

/// `ln Pr(theta_{n+1} = theta_i | theta_n = theta_j, drift)`.
fn log_transition(i: usize, j: usize, drift: f64, grid: &PhaseGrid) -> f64 {
    let n = grid.n_theta as isize;
    let d = drift / grid.theta_step();
    let whole = d.floor();
    let frac = d - whole;
    let lo = (j as isize + whole as isize).rem_euclid(n) as usize;
    let hi = (lo + 1) % grid.n_theta;
    let mut p = 0.0;
    if i == lo {
        p += 1.0 - frac;
    }
    if i == hi {
        p += frac;
    }
    p.ln()
}

/// `ln Pr(drift_k, s_n, theta_n = theta_i | R)` for every `(k, n, s, i)`, laid out as
/// `((k * len + n) * 2 + s) * n_theta + i`. Cost is `n_drift * (2 n_theta)^len`.
pub fn enumerate_block_posterior(
    observations: &[Observation],
    gains: (f64, f64),
    n0: f64,
    grid: &PhaseGrid,
) -> Result<Vec<f64>> {
    grid.validate()?;
    let len = observations.len();
    let nt = grid.n_theta;
    let states = 2 * nt;
    let total = (states as f64).powi(len as i32) * grid.n_drift as f64;
    if len == 0 || total > 5e7 {
        return Err(Error::InvalidInput("block too large to enumerate".into()));
    }
    let ctx = LikelihoodContext::new(gains.0, gains.1, n0)?;
    let lik: Vec<Vec<f64>> = observations
        .iter()
        .map(|o| {
            (0..states)
                .map(|st| log_lik(*o, (st / nt) as u8, grid.theta(st % nt), &ctx))
                .collect()
        })
        .collect();

    // Every joint term is pushed to the bucket of each (k, n, s_n, i_n) it touches.
    let mut buckets: Vec<Vec<f64>> = vec![Vec::new(); grid.n_drift * len * states];
    let mut all = Vec::new();
    let mut seq = vec![0usize; len];
    for k in 0..grid.n_drift {
        let drift = grid.drift(k);
        let trans: Vec<f64> = (0..nt * nt)
            .map(|x| log_transition(x / nt, x % nt, drift, grid))
            .collect();
        let n_seq = states.pow(len as u32);
        for code in 0..n_seq {
            let mut c = code;
            for slot in seq.iter_mut() {
                *slot = c % states;
                c /= states;
            }
            let mut term = -(grid.n_drift as f64).ln() - (nt as f64).ln();
            for n in 0..len {
                term += lik[n][seq[n]] - std::f64::consts::LN_2;
                if n + 1 < len {
                    term += trans[(seq[n + 1] % nt) * nt + seq[n] % nt];
                }
            }
            if term == f64::NEG_INFINITY {
                continue;
            }
            all.push(term);
            for n in 0..len {
                buckets[(k * len + n) * states + seq[n]].push(term);
            }
        }
    }
    let norm = log_sum_exp(&all);
    if !norm.is_finite() {
        return Err(Error::DegenerateBeliefs { start: 0 });
    }
    Ok(buckets.iter().map(|b| log_sum_exp(b) - norm).collect())
}

/// Largest discrepancy between the BP posterior and exhaustive enumeration over all
/// `(drift, symbol, s, theta)` cells, measured as `|a - b| / max(|b|, 1)` on log
/// probabilities. Cells impossible under both count as agreeing.
pub fn max_log_discrepancy(
    observations: &[Observation],
    gains: (f64, f64),
    n0: f64,
    grid: &PhaseGrid,
) -> Result<f64> {
    let exact = enumerate_block_posterior(observations, gains, n0, grid)?;
    let bp = crate::detectors::bpd_block_posterior(observations, gains, n0, grid)?;
    let mut worst: f64 = 0.0;
    for k in 0..grid.n_drift {
        for n in 0..observations.len() {
            for s in 0..2 {
                for i in 0..grid.n_theta {
                    let b = exact[((k * observations.len() + n) * 2 + s) * grid.n_theta + i];
                    let a = bp.log_belief(k, n, s, i);
                    if a == f64::NEG_INFINITY && b == f64::NEG_INFINITY {
                        continue;
                    }
                    worst = worst.max((a - b).abs() / b.abs().max(1.0));
                }
            }
        }
    }
    Ok(worst)
}

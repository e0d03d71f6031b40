//! Belief-propagation detector.
//!
//! Within a block of `L` symbols the variable nodes `(s_n, theta_n)` form a chain;
//! neighbouring phases are tied by `theta_{n+1} = theta_n + drift`. For a fixed drift
//! hypothesis the chain is a tree, so one forward and one backward sweep give exact
//! marginals. Drift hypotheses are then mixed by their evidence under a uniform prior.

use super::grid::{DriftShift, PhaseGrid};
use super::{Decision, LikelihoodTable};
use crate::error::{Error, Result};
use crate::model::{wrap_phase, Observation, Packet, SystemConfig};
use crate::special::{log_add_exp, log_sum_exp};

/// Joint posterior over `(drift, symbol, s, theta)` for one block.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorGrid {
    pub n_theta: usize,
    pub n_drift: usize,
    pub len: usize,
    /// `ln Pr(drift_k) + ln Pr(R_q | drift_k)`, up to a block-wide constant.
    pub log_evidence: Vec<f64>,
    log_belief: Vec<f64>,
}

impl PosteriorGrid {
    fn new(n_theta: usize, n_drift: usize, len: usize) -> Self {
        Self {
            n_theta,
            n_drift,
            len,
            log_evidence: vec![f64::NEG_INFINITY; n_drift],
            log_belief: vec![f64::NEG_INFINITY; n_drift * len * 2 * n_theta],
        }
    }

    fn index(&self, k: usize, n: usize, s: usize, i: usize) -> usize {
        ((k * self.len + n) * 2 + s) * self.n_theta + i
    }

    /// `ln Pr(s_n = s, theta_n = theta_i, drift_k | R_q)`, normalized over `(k, s, i)`.
    pub fn log_belief(&self, k: usize, n: usize, s: usize, i: usize) -> f64 {
        self.log_belief[self.index(k, n, s, i)]
    }

    /// `Pr(s_n = s | R_q)`.
    pub fn prob_s(&self, n: usize, s: usize) -> f64 {
        let mut p = 0.0;
        for k in 0..self.n_drift {
            for i in 0..self.n_theta {
                p += self.log_belief(k, n, s, i).exp();
            }
        }
        p
    }

    /// Posterior weights of the drift hypotheses.
    pub fn drift_posterior(&self) -> Vec<f64> {
        let lse = log_sum_exp(&self.log_evidence);
        self.log_evidence.iter().map(|e| (e - lse).exp()).collect()
    }
}

/// Arithmetic used by the message sweeps: plain reals (fast) or logs (never underflows).
trait Domain {
    const ONE: f64;
    fn lift(ln: f64) -> f64;
    fn to_ln(v: f64) -> f64;
    fn mul(a: f64, b: f64) -> f64;
    fn add(a: f64, b: f64) -> f64;
    /// Shifts reading from the input written twice in a row.
    fn forward(shift: &DriftShift, ext: &[f64], out: &mut [f64]);
    fn backward(shift: &DriftShift, ext: &[f64], out: &mut [f64]);
    /// Scale so the largest entry is `ONE`; returns the log of the removed factor,
    /// `-inf` when every entry is zero.
    fn rescale(v: &mut [f64]) -> f64;
    /// From `ag_i = alpha_i gamma_i`, bin totals `t_i = lam0_i + lam1` and `lam1`, write
    /// `Pr(theta_i | R, drift)` into `q` and return `(ln sum_i ag_i t_i, Pr(s = 1 | R, drift))`.
    fn marginals(ag: &[f64], t: &[f64], lam1: f64, q: &mut [f64]) -> (f64, f64);
}

struct Linear;
struct LogDomain;

impl Domain for Linear {
    const ONE: f64 = 1.0;
    #[inline]
    fn lift(ln: f64) -> f64 {
        ln.exp()
    }
    #[inline]
    fn to_ln(v: f64) -> f64 {
        v.ln()
    }
    #[inline]
    fn mul(a: f64, b: f64) -> f64 {
        a * b
    }
    #[inline]
    fn add(a: f64, b: f64) -> f64 {
        a + b
    }
    #[inline]
    fn forward(shift: &DriftShift, ext: &[f64], out: &mut [f64]) {
        shift.forward_ext(ext, out)
    }
    #[inline]
    fn backward(shift: &DriftShift, ext: &[f64], out: &mut [f64]) {
        shift.backward_ext(ext, out)
    }
    #[inline]
    fn rescale(v: &mut [f64]) -> f64 {
        let m = v.iter().copied().fold(0.0, f64::max);
        if !(m > 0.0 && m.is_finite()) {
            return f64::NEG_INFINITY;
        }
        let inv = 1.0 / m;
        v.iter_mut().for_each(|x| *x *= inv);
        m.ln()
    }
    #[inline]
    fn marginals(ag: &[f64], t: &[f64], lam1: f64, q: &mut [f64]) -> (f64, f64) {
        let mut total = 0.0;
        let mut sum_ag = 0.0;
        for ((q, &a), &t) in q.iter_mut().zip(ag).zip(t) {
            *q = a * t;
            total += *q;
            sum_ag += a;
        }
        if !(total > 0.0 && total.is_finite()) {
            return (f64::NEG_INFINITY, 0.0);
        }
        let inv = 1.0 / total;
        q.iter_mut().for_each(|x| *x *= inv);
        (total.ln(), lam1 * sum_ag * inv)
    }
}

impl Domain for LogDomain {
    const ONE: f64 = 0.0;
    fn lift(ln: f64) -> f64 {
        ln
    }
    fn to_ln(v: f64) -> f64 {
        v
    }
    fn mul(a: f64, b: f64) -> f64 {
        a + b
    }
    fn add(a: f64, b: f64) -> f64 {
        log_add_exp(a, b)
    }
    fn forward(shift: &DriftShift, ext: &[f64], out: &mut [f64]) {
        shift.forward_log_ext(ext, out)
    }
    fn backward(shift: &DriftShift, ext: &[f64], out: &mut [f64]) {
        shift.backward_log_ext(ext, out)
    }
    fn rescale(v: &mut [f64]) -> f64 {
        let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !m.is_finite() {
            return f64::NEG_INFINITY;
        }
        v.iter_mut().for_each(|x| *x -= m);
        m
    }
    fn marginals(ag: &[f64], t: &[f64], lam1: f64, q: &mut [f64]) -> (f64, f64) {
        for ((q, &a), &t) in q.iter_mut().zip(ag).zip(t) {
            *q = a + t;
        }
        let total = log_sum_exp(q);
        if !total.is_finite() {
            return (f64::NEG_INFINITY, 0.0);
        }
        q.iter_mut().for_each(|x| *x = (*x - total).exp());
        (total, (lam1 + log_sum_exp(ag) - total).exp())
    }
}

/// Per-block result before it is spliced into the packet decision.
struct BlockOutput<'a> {
    p_one: &'a [f64],
    theta_hat: &'a [f64],
    log_evidence: &'a [f64],
}

/// How a drift hypothesis is handled given the grid's symmetry.
#[derive(Clone, Copy, PartialEq)]
enum Role {
    /// Swept; its mirror image is a distinct hypothesis filled in by reflection.
    Paired(usize),
    /// Swept; no distinct mirror image.
    Single,
    /// Reflection of the given swept hypothesis.
    Mirror(usize),
}

/// Message sweeps over blocks of a fixed length, with scratch space reused
/// across blocks.
///
/// The likelihoods are even in `theta`, so on a drift grid symmetric about zero the
/// chain for `-drift` is the reflection of the chain for `drift`; only one of each
/// pair is swept and the other is accounted for by reflecting the phase axis.
struct BlockSweeper {
    nt: usize,
    len: usize,
    shifts: Vec<DriftShift>,
    roles: Vec<Role>,
    thetas: Vec<(f64, f64)>,
    lam0: Vec<f64>,
    lam1: Vec<f64>,
    total: Vec<f64>,
    alpha: Vec<f64>,
    gamma: Vec<f64>,
    a_scale: Vec<f64>,
    g_scale: Vec<f64>,
    ext: Vec<f64>,
    ag: Vec<f64>,
    log_evidence: Vec<f64>,
    weights: Vec<f64>,
    p_one: Vec<f64>,
    /// `Pr(theta_n = theta_i | R, drift_k)` for swept hypotheses.
    theta_post: Vec<f64>,
    paired_mix: Vec<f64>,
    single_mix: Vec<f64>,
    out_p: Vec<f64>,
    out_theta: Vec<f64>,
}

impl BlockSweeper {
    fn new(grid: &PhaseGrid, len: usize) -> Self {
        let nt = grid.n_theta;
        let nd = grid.n_drift;
        let roles = (0..nd)
            .map(|k| match grid.mirrored_drift(k) {
                Some(m) if m < k => Role::Mirror(m),
                Some(m) if m > k => Role::Paired(m),
                _ => Role::Single,
            })
            .collect();
        Self {
            nt,
            len,
            shifts: (0..nd).map(|k| grid.shift(k)).collect(),
            roles,
            thetas: (0..nt).map(|i| grid.theta(i).sin_cos()).collect(),
            lam0: vec![0.0; len * nt],
            lam1: vec![0.0; len],
            total: vec![0.0; len * nt],
            alpha: vec![0.0; len * nt],
            gamma: vec![0.0; len * nt],
            a_scale: vec![0.0; len],
            g_scale: vec![0.0; len],
            ext: vec![0.0; 2 * nt],
            ag: vec![0.0; nt],
            log_evidence: vec![0.0; nd],
            weights: vec![0.0; nd],
            p_one: vec![0.0; nd * len],
            theta_post: vec![0.0; nd * len * nt],
            paired_mix: vec![0.0; nt],
            single_mix: vec![0.0; nt],
            out_p: vec![0.0; len],
            out_theta: vec![0.0; len],
        }
    }

    fn reflect(&self, i: usize) -> usize {
        if i == 0 {
            0
        } else {
            self.nt - i
        }
    }

    /// Sweep one block, retrying in the log domain if every hypothesis underflows.
    /// `start` only labels errors.
    fn run(
        &mut self,
        s0: &[f64],
        s1: &[f64],
        start: usize,
        mut capture: Option<&mut PosteriorGrid>,
    ) -> Result<BlockOutput<'_>> {
        let relabel = |e| match e {
            Error::DegenerateBeliefs { start: n } => Error::DegenerateBeliefs { start: start + n },
            other => other,
        };
        let mut ok = self
            .sweep::<Linear>(s0, s1, capture.as_deref_mut())
            .map_err(relabel)?;
        if !ok {
            ok = self
                .sweep::<LogDomain>(s0, s1, capture.as_deref_mut())
                .map_err(relabel)?;
        }
        if !ok {
            return Err(Error::DegenerateBeliefs { start });
        }
        Ok(BlockOutput {
            p_one: &self.out_p,
            theta_hat: &self.out_theta,
            log_evidence: &self.log_evidence,
        })
    }

    /// Returns `false` when every drift hypothesis underflowed.
    fn sweep<D: Domain>(
        &mut self,
        s0: &[f64],
        s1: &[f64],
        mut capture: Option<&mut PosteriorGrid>,
    ) -> Result<bool> {
        let nt = self.nt;
        let len = self.len;
        let nd = self.shifts.len();
        debug_assert_eq!(s1.len(), len);

        // Per-symbol normalized likelihoods; the removed offsets add up to `offset`.
        let mut offset = 0.0;
        for n in 0..len {
            let row = &s0[n * nt..(n + 1) * nt];
            let c = row.iter().copied().fold(s1[n], f64::max);
            if !c.is_finite() {
                return Err(Error::DegenerateBeliefs { start: n });
            }
            offset += c;
            let l1 = D::lift(s1[n] - c);
            self.lam1[n] = l1;
            for i in 0..nt {
                let l = D::lift(row[i] - c);
                self.lam0[n * nt + i] = l;
                self.total[n * nt + i] = D::add(l, l1);
            }
        }

        let log_prior = -(nd as f64).ln();
        for k in 0..nd {
            self.log_evidence[k] = f64::NEG_INFINITY;
            if !matches!(self.roles[k], Role::Mirror(_)) {
                self.sweep_drift::<D>(k, log_prior + offset, capture.as_deref_mut());
            }
        }
        for k in 0..nd {
            if let Role::Mirror(m) = self.roles[k] {
                self.log_evidence[k] = self.log_evidence[m];
            }
        }

        let max_ev = self.log_evidence.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max_ev == f64::NEG_INFINITY {
            return Ok(false);
        }
        let mut wsum = 0.0;
        for (w, e) in self.weights.iter_mut().zip(&self.log_evidence) {
            *w = (e - max_ev).exp();
            wsum += *w;
        }
        self.weights.iter_mut().for_each(|w| *w /= wsum);

        for n in 0..len {
            let mut p = 0.0;
            self.paired_mix.fill(0.0);
            self.single_mix.fill(0.0);
            for k in 0..nd {
                let w = self.weights[k];
                let (mix, factor) = match self.roles[k] {
                    _ if w == 0.0 => continue,
                    Role::Mirror(_) => continue,
                    Role::Paired(_) => (&mut self.paired_mix, 2.0),
                    Role::Single => (&mut self.single_mix, 1.0),
                };
                p += factor * w * self.p_one[k * len + n];
                let q = &self.theta_post[(k * len + n) * nt..(k * len + n + 1) * nt];
                for (m, v) in mix.iter_mut().zip(q) {
                    *m += w * v;
                }
            }
            // fold in the mirrored hypotheses: their phase posterior is reflected
            for i in 0..nt {
                let r = self.reflect(i);
                self.single_mix[i] += self.paired_mix[i] + self.paired_mix[r];
            }
            self.out_p[n] = p;
            self.out_theta[n] = reflected_circular_mean(&self.single_mix, &self.thetas);
        }

        if let Some(cap) = capture {
            for k in 0..nd {
                if let Role::Mirror(m) = self.roles[k] {
                    for n in 0..len {
                        for s in 0..2 {
                            for i in 0..nt {
                                let v = cap.log_belief[cap.index(m, n, s, self.reflect(i))];
                                let idx = cap.index(k, n, s, i);
                                cap.log_belief[idx] = v;
                            }
                        }
                    }
                }
            }
            cap.log_evidence.copy_from_slice(&self.log_evidence);
            for (k, w) in self.weights.iter().enumerate() {
                let lw = w.ln();
                let first = k * len * 2 * nt;
                for v in &mut cap.log_belief[first..first + len * 2 * nt] {
                    *v += lw;
                }
            }
        }
        Ok(true)
    }

    /// Forward and backward sweeps for drift hypothesis `k`. Leaves its evidence at
    /// `-inf` if the messages underflow.
    fn sweep_drift<D: Domain>(
        &mut self,
        k: usize,
        log_offset: f64,
        mut capture: Option<&mut PosteriorGrid>,
    ) {
        let nt = self.nt;
        let len = self.len;
        let shift = &self.shifts[k];
        let ext = &mut self.ext;

        self.alpha[..nt].fill(D::ONE);
        self.a_scale[0] = 0.0;
        for n in 1..len {
            let (done, rest) = self.alpha.split_at_mut(n * nt);
            let prev = &done[(n - 1) * nt..];
            let t = &self.total[(n - 1) * nt..n * nt];
            for i in 0..nt {
                let v = D::mul(prev[i], t[i]);
                ext[i] = v;
                ext[nt + i] = v;
            }
            let cur = &mut rest[..nt];
            D::forward(shift, ext, cur);
            let sc = D::rescale(cur);
            if sc == f64::NEG_INFINITY {
                return;
            }
            self.a_scale[n] = self.a_scale[n - 1] + sc;
        }
        self.gamma[(len - 1) * nt..].fill(D::ONE);
        self.g_scale[len - 1] = 0.0;
        for n in (0..len - 1).rev() {
            let (head, tail) = self.gamma.split_at_mut((n + 1) * nt);
            let next = &tail[..nt];
            let t = &self.total[(n + 1) * nt..(n + 2) * nt];
            for i in 0..nt {
                let v = D::mul(next[i], t[i]);
                ext[i] = v;
                ext[nt + i] = v;
            }
            let cur = &mut head[n * nt..];
            D::backward(shift, ext, cur);
            let sc = D::rescale(cur);
            if sc == f64::NEG_INFINITY {
                return;
            }
            self.g_scale[n] = self.g_scale[n + 1] + sc;
        }

        let mut evidence = f64::NEG_INFINITY;
        for n in 0..len {
            let a = &self.alpha[n * nt..(n + 1) * nt];
            let g = &self.gamma[n * nt..(n + 1) * nt];
            for i in 0..nt {
                self.ag[i] = D::mul(a[i], g[i]);
            }
            let q = &mut self.theta_post[(k * len + n) * nt..(k * len + n + 1) * nt];
            let (ln_t, p1) =
                D::marginals(&self.ag, &self.total[n * nt..(n + 1) * nt], self.lam1[n], q);
            if ln_t == f64::NEG_INFINITY {
                return;
            }
            if n == 0 {
                evidence = log_offset + ln_t + self.a_scale[0] + self.g_scale[0];
            }
            self.p_one[k * len + n] = p1;
            if let Some(cap) = capture.as_deref_mut() {
                let l1 = D::to_ln(self.lam1[n]);
                for i in 0..nt {
                    let la = D::to_ln(self.ag[i]) - ln_t;
                    let i0 = cap.index(k, n, 0, i);
                    let i1 = cap.index(k, n, 1, i);
                    cap.log_belief[i0] = la + D::to_ln(self.lam0[n * nt + i]);
                    cap.log_belief[i1] = la + l1;
                }
            }
        }
        self.log_evidence[k] = evidence;
    }
}

/// Circular mean of a phase posterior after folding every grid point onto the
/// reflection branch (`theta` or `-theta`) nearest the mode. Magnitudes only pin
/// down `cos(theta)`, so the raw posterior is symmetric under reflection and its
/// plain circular mean collapses towards 0 or pi.
fn reflected_circular_mean(weights: &[f64], sin_cos: &[(f64, f64)]) -> f64 {
    let mode = weights
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |b, (i, &w)| if w > b.1 { (i, w) } else { b })
        .0;
    let (ms, mc) = sin_cos[mode];
    let (mut sn, mut cs) = (0.0, 0.0);
    for (&w, &(s, c)) in weights.iter().zip(sin_cos) {
        // cos of the angle to the mode, for theta and for its reflection -theta
        let direct = c * mc + s * ms;
        let mirrored = c * mc - s * ms;
        let s = if mirrored > direct { -s } else { s };
        sn += w * s;
        cs += w * c;
    }
    wrap_phase(sn.atan2(cs))
}

/// Block layout: `(start, first_decided)` per block. Every block spans `block_len`
/// symbols; a short tail block is extended backwards into its predecessor and only
/// the symbols from `first_decided` on are taken from it.
pub fn block_starts(n_symbols: usize, block_len: usize) -> Result<Vec<(usize, usize)>> {
    if block_len == 0 {
        return Err(Error::InvalidInput("block length must be at least 1".into()));
    }
    if block_len > n_symbols {
        return Err(Error::BlockTooLong {
            block_len,
            n_symbols,
        });
    }
    let n_blocks = n_symbols.div_ceil(block_len);
    Ok((0..n_blocks)
        .map(|q| {
            let first = q * block_len;
            (first.min(n_symbols - block_len), first)
        })
        .collect())
}

/// Detect XOR symbols by belief propagation over blocks of `block_len` symbols.
///
/// `gains` are the (known or estimated) channel magnitudes; their order does not
/// matter. `theta_hat` is the belief-weighted circular mean per symbol and
/// `drift_hat` the drift hypothesis with the largest evidence summed over blocks.
pub fn bpd_detect(
    packet: &Packet,
    gains: (f64, f64),
    config: &SystemConfig,
    grid: &PhaseGrid,
    block_len: usize,
) -> Result<Decision> {
    grid.validate()?;
    let obs = &packet.observations;
    let layout = block_starts(obs.len(), block_len)?;
    let table = LikelihoodTable::build(obs, gains, config.n0, grid);
    let nt = grid.n_theta;
    let mut sweeper = BlockSweeper::new(grid, block_len);

    let mut bits = vec![0u8; obs.len()];
    let mut theta_hat = vec![0.0; obs.len()];
    let mut evidence = vec![0.0; grid.n_drift];
    for (start, first) in layout {
        let end = start + block_len;
        let out = sweeper.run(
            &table.s0[start * nt..end * nt],
            &table.s1[start..end],
            start,
            None,
        )?;
        for n in first.max(start)..end {
            let local = n - start;
            bits[n] = u8::from(out.p_one[local] > 0.5);
            theta_hat[n] = out.theta_hat[local];
        }
        for (acc, e) in evidence.iter_mut().zip(out.log_evidence) {
            *acc += e;
        }
    }
    let best = evidence
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (k, &e)| if e > best.1 { (k, e) } else { best })
        .0;
    Ok(Decision {
        xor_bits: bits,
        theta_hat: Some(theta_hat),
        drift_hat: Some(grid.drift(best)),
    })
}

/// Full posterior grid for a single block made of all of `observations`.
pub fn bpd_block_posterior(
    observations: &[Observation],
    gains: (f64, f64),
    n0: f64,
    grid: &PhaseGrid,
) -> Result<PosteriorGrid> {
    grid.validate()?;
    if observations.is_empty() {
        return Err(Error::InvalidInput("empty block".into()));
    }
    let table = LikelihoodTable::build(observations, gains, n0, grid);
    let mut cap = PosteriorGrid::new(grid.n_theta, grid.n_drift, observations.len());
    BlockSweeper::new(grid, observations.len()).run(&table.s0, &table.s1, 0, Some(&mut cap))?;
    Ok(cap)
}

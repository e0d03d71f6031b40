use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Discretization of the relative phase and of the per-symbol drift.
///
/// Phase points are `i * 2pi / n_theta`; drift points are spread uniformly and
/// inclusively over `[drift_lo, drift_hi]` and carry equal prior weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub n_theta: usize,
    pub n_drift: usize,
    pub drift_lo: f64,
    pub drift_hi: f64,
}

impl Default for PhaseGrid {
    fn default() -> Self {
        Self {
            n_theta: 40,
            n_drift: 40,
            drift_lo: -0.02 * PI,
            drift_hi: 0.02 * PI,
        }
    }
}

impl PhaseGrid {
    pub fn new(n_theta: usize, n_drift: usize, drift_lo: f64, drift_hi: f64) -> Result<Self> {
        let g = Self {
            n_theta,
            n_drift,
            drift_lo,
            drift_hi,
        };
        g.validate()?;
        Ok(g)
    }

    /// Grid with a single, known drift value.
    pub fn with_known_drift(n_theta: usize, drift: f64) -> Result<Self> {
        Self::new(n_theta, 1, drift, drift)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_theta < 2 {
            return Err(Error::InvalidConfig("n_theta must be at least 2".into()));
        }
        if self.n_drift == 0 {
            return Err(Error::InvalidConfig("n_drift must be at least 1".into()));
        }
        if !(self.drift_lo.is_finite() && self.drift_hi.is_finite() && self.drift_lo <= self.drift_hi)
        {
            return Err(Error::InvalidConfig("drift range must be finite with lo <= hi".into()));
        }
        Ok(())
    }

    pub fn theta_step(&self) -> f64 {
        TAU / self.n_theta as f64
    }

    pub fn theta(&self, i: usize) -> f64 {
        i as f64 * self.theta_step()
    }

    pub fn drift(&self, k: usize) -> f64 {
        if self.n_drift == 1 {
            0.5 * (self.drift_lo + self.drift_hi)
        } else {
            self.drift_lo + k as f64 * (self.drift_hi - self.drift_lo) / (self.n_drift - 1) as f64
        }
    }

    pub fn drift_step(&self) -> f64 {
        if self.n_drift == 1 {
            0.0
        } else {
            (self.drift_hi - self.drift_lo) / (self.n_drift - 1) as f64
        }
    }

    /// Index of the hypothesis with the opposite drift, if the drift grid is
    /// symmetric about zero.
    pub fn mirrored_drift(&self, k: usize) -> Option<usize> {
        let m = self.n_drift - 1 - k;
        let scale = self.drift_lo.abs().max(self.drift_hi.abs());
        ((self.drift(k) + self.drift(m)).abs() <= 1e-12 * scale.max(1e-300)).then_some(m)
    }

    pub fn shift(&self, k: usize) -> DriftShift {
        DriftShift::new(self.drift(k), self.n_theta)
    }
}

/// Circular shift of a phase-grid function by a drift, with linear interpolation
/// between the two grid points straddling the shifted position.
///
/// Mass at `theta_i` moves to `theta_i + drift`, split between bins `i + j` and
/// `i + j + 1` with weights `1 - w` and `w`, where `j + w = drift / step`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftShift {
    pub whole: isize,
    pub frac: f64,
    /// `lo[m]`, `hi[m]`: source bins feeding output bin `m` in the forward shift.
    lo: Vec<usize>,
    hi: Vec<usize>,
}

impl DriftShift {
    pub fn new(drift: f64, n_theta: usize) -> Self {
        let offset = drift / (TAU / n_theta as f64);
        let whole = offset.floor();
        let frac = offset - whole;
        let whole = whole as isize;
        let n = n_theta as isize;
        let lo = (0..n).map(|m| (m - whole).rem_euclid(n) as usize).collect();
        let hi = (0..n).map(|m| (m - whole - 1).rem_euclid(n) as usize).collect();
        Self { whole, frac, lo, hi }
    }

    /// `out(theta) = input(theta - drift)`: message pushed one symbol forward.
    #[inline]
    pub fn forward(&self, input: &[f64], out: &mut [f64]) {
        let (a, b) = (1.0 - self.frac, self.frac);
        for m in 0..out.len() {
            out[m] = a * input[self.lo[m]] + b * input[self.hi[m]];
        }
    }

    /// Transpose of [`forward`](Self::forward): `out(theta) = input(theta + drift)`.
    #[inline]
    pub fn backward(&self, input: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let (a, b) = (1.0 - self.frac, self.frac);
        for m in 0..input.len() {
            out[self.lo[m]] += a * input[m];
            out[self.hi[m]] += b * input[m];
        }
    }

    /// [`forward`](Self::forward) reading from `ext`, the input written twice in a row.
    #[inline]
    pub fn forward_ext(&self, ext: &[f64], out: &mut [f64]) {
        let n = out.len();
        let (r0, r1) = self.rotations(n);
        let (a, b) = (1.0 - self.frac, self.frac);
        let x = &ext[n - r0..2 * n - r0];
        let y = &ext[n - r1..2 * n - r1];
        for ((o, &u), &v) in out.iter_mut().zip(x).zip(y) {
            *o = a * u + b * v;
        }
    }

    /// [`backward`](Self::backward) reading from a doubled input.
    #[inline]
    pub fn backward_ext(&self, ext: &[f64], out: &mut [f64]) {
        let n = out.len();
        let (r0, r1) = self.rotations(n);
        let (a, b) = (1.0 - self.frac, self.frac);
        let x = &ext[r0..r0 + n];
        let y = &ext[r1..r1 + n];
        for ((o, &u), &v) in out.iter_mut().zip(x).zip(y) {
            *o = a * u + b * v;
        }
    }

    pub fn forward_log_ext(&self, ext: &[f64], out: &mut [f64]) {
        let n = out.len();
        let (r0, r1) = self.rotations(n);
        let (la, lb) = ((1.0 - self.frac).ln(), self.frac.ln());
        let x = &ext[n - r0..2 * n - r0];
        let y = &ext[n - r1..2 * n - r1];
        for ((o, &u), &v) in out.iter_mut().zip(x).zip(y) {
            *o = crate::special::log_add_exp(la + u, lb + v);
        }
    }

    pub fn backward_log_ext(&self, ext: &[f64], out: &mut [f64]) {
        let n = out.len();
        let (r0, r1) = self.rotations(n);
        let (la, lb) = ((1.0 - self.frac).ln(), self.frac.ln());
        let x = &ext[r0..r0 + n];
        let y = &ext[r1..r1 + n];
        for ((o, &u), &v) in out.iter_mut().zip(x).zip(y) {
            *o = crate::special::log_add_exp(la + u, lb + v);
        }
    }

    /// Rotation amounts for the `1 - w` and `w` taps, both in `[0, n)`.
    fn rotations(&self, n: usize) -> (usize, usize) {
        let r0 = self.whole.rem_euclid(n as isize) as usize;
        (r0, (r0 + 1) % n)
    }

    /// Log-domain forward shift.
    pub fn forward_log(&self, input: &[f64], out: &mut [f64]) {
        let (la, lb) = ((1.0 - self.frac).ln(), self.frac.ln());
        for m in 0..out.len() {
            out[m] = crate::special::log_add_exp(la + input[self.lo[m]], lb + input[self.hi[m]]);
        }
    }

    /// Log-domain backward shift.
    pub fn backward_log(&self, input: &[f64], out: &mut [f64]) {
        let (la, lb) = ((1.0 - self.frac).ln(), self.frac.ln());
        out.fill(f64::NEG_INFINITY);
        for m in 0..input.len() {
            let l = self.lo[m];
            let h = self.hi[m];
            out[l] = crate::special::log_add_exp(out[l], la + input[m]);
            out[h] = crate::special::log_add_exp(out[h], lb + input[m]);
        }
    }
}

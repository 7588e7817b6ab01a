//! C-Tracking with forced exploration.
//!
//! Each target `ω(t)` is projected in ℓ∞ onto `Δ_K ∩ [ε_t, 1]^K`, the
//! projections are accumulated, and the next arm is the one whose cumulative
//! target most exceeds its pull count.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Forced-exploration level `ε_t = (K² + t)^{-1/2} / 2`.
pub fn epsilon_t(k: usize, t: u64) -> f64 {
    0.5 / ((k * k) as f64 + t as f64).sqrt()
}

/// ℓ∞ projection onto the clipped simplex `Δ_K ∩ [eps, 1]^K` by water-filling.
///
/// Coordinates below `eps` are raised to it and the accumulated raise is
/// removed uniformly from the coordinates strictly above `eps`; this repeats
/// until nothing falls below `eps` (at most `K` passes).
pub fn linf_project(weights: &[f64], eps: f64) -> Result<Vec<f64>> {
    let k = weights.len();
    if k == 0 {
        return Err(Error::Domain("empty weight vector".into()));
    }
    if !(eps >= 0.0) {
        return Err(Error::Domain(format!("eps must be nonnegative, got {eps}")));
    }
    if eps * k as f64 > 1.0 + 1e-12 {
        return Err(Error::Infeasible(format!("eps {eps} exceeds 1/K for K = {k}")));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::Domain("weights must be finite and nonnegative".into()));
    }
    let mut out = weights.to_vec();
    for _ in 0..=k {
        let mut raise = 0.0;
        for x in out.iter_mut() {
            if *x < eps {
                raise += eps - *x;
                *x = eps;
            }
        }
        if raise <= 0.0 {
            break;
        }
        let free = out.iter().filter(|&&x| x > eps).count();
        if free == 0 {
            break;
        }
        let cut = raise / free as f64;
        for x in out.iter_mut() {
            if *x > eps {
                *x -= cut;
            }
        }
    }
    // Absorb rounding so the output sums to one.
    let s: f64 = out.iter().sum();
    let (imax, _) = out
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &x)| if x > acc.1 { (i, x) } else { acc });
    out[imax] += 1.0 - s;
    Ok(out)
}

/// Per-run tracking state. Single owner; not shared across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerState {
    k: usize,
    t: u64,
    counts: Vec<u64>,
    cum_targets: Vec<f64>,
    tracked_rounds: u64,
    history: Option<Vec<Vec<f64>>>,
}

impl TrackerState {
    pub fn new(k: usize, history_enabled: bool) -> Self {
        Self {
            k,
            t: 0,
            counts: vec![0; k],
            cum_targets: vec![0.0; k],
            tracked_rounds: 0,
            history: history_enabled.then(Vec::new),
        }
    }

    pub fn arms(&self) -> usize {
        self.k
    }

    /// Number of pulls so far.
    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn cum_targets(&self) -> &[f64] {
        &self.cum_targets
    }

    pub fn tracked_rounds(&self) -> u64 {
        self.tracked_rounds
    }

    /// Projected targets of every tracked round, if retained.
    pub fn history(&self) -> Option<&[Vec<f64>]> {
        self.history.as_deref()
    }

    /// Every arm has been pulled at least once.
    pub fn is_initialized(&self) -> bool {
        self.counts.iter().all(|&c| c >= 1)
    }

    /// Projects `target` with `eps`, accumulates it and returns the arm with
    /// the largest `cum_targets − counts` (lowest index on ties). The caller
    /// records the pull with [`record_pull`](Self::record_pull).
    pub fn next_action(&mut self, target: &[f64], eps: f64) -> Result<usize> {
        if !self.is_initialized() {
            return Err(Error::Precondition("tracking before every arm was pulled once".into()));
        }
        if target.len() != self.k {
            return Err(Error::Domain(format!("target has {} entries, expected {}", target.len(), self.k)));
        }
        let projected = linf_project(target, eps)?;
        for (c, p) in self.cum_targets.iter_mut().zip(&projected) {
            *c += p;
        }
        self.tracked_rounds += 1;
        if let Some(h) = self.history.as_mut() {
            h.push(projected);
        }
        let mut best = 0;
        let mut best_val = f64::NEG_INFINITY;
        for (k, (&c, &n)) in self.cum_targets.iter().zip(&self.counts).enumerate() {
            let v = c - n as f64;
            if v > best_val {
                best = k;
                best_val = v;
            }
        }
        Ok(best)
    }

    pub fn record_pull(&mut self, arm: usize) -> Result<()> {
        if arm >= self.k {
            return Err(Error::Domain(format!("arm {arm} out of range")));
        }
        self.counts[arm] += 1;
        self.t += 1;
        Ok(())
    }
}

//! One-parameter canonical exponential families (Gaussian with known
//! variance, Bernoulli), parameterized by their mean.
//!
//! Everything here is in nats. Divergences that are infinite (a Bernoulli
//! second argument at 0 or 1 with a different first argument) are returned
//! as `f64::INFINITY`; callers that minimize over alternatives treat such a
//! value as "alternative excluded".

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on the minimizer for golden-section searches.
const GOLDEN_TOL: f64 = 1e-12;
const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Gaussian,
    Bernoulli,
}

/// Closed interval `[lo, hi]` of means that contains every model of the
/// problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanBox {
    pub lo: f64,
    pub hi: f64,
}

impl MeanBox {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }
}

/// A σ²-sub-Gaussian one-parameter exponential family together with the
/// bounded box of admissible means.
///
/// For Gaussian arms `sigma2` is the known variance and Θ is the real line.
/// For Bernoulli arms `sigma2` is the sub-Gaussian proxy 1/4 and Θ = (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    kind: FamilyKind,
    sigma2: f64,
    theta: (f64, f64),
    bounds: MeanBox,
}

/// Box-dependent constants of the family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyConstants {
    /// Upper bound on `d(p, q)` for `p, q` in the box.
    pub l: f64,
    /// Upper bound on `|ν_p − ν_q|` for `p, q` in the box.
    pub d: f64,
    /// Smallest distance from a mean of the model to the box endpoints.
    /// Zero when some mean lies on or outside the box.
    pub f: f64,
}

impl FamilySpec {
    pub fn gaussian(sigma2: f64, lo: f64, hi: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::Domain(format!("variance must be positive, got {sigma2}")));
        }
        Self::checked(FamilyKind::Gaussian, sigma2, (f64::NEG_INFINITY, f64::INFINITY), lo, hi)
    }

    pub fn bernoulli(lo: f64, hi: f64) -> Result<Self> {
        Self::checked(FamilyKind::Bernoulli, 0.25, (0.0, 1.0), lo, hi)
    }

    /// Builds a family from its kind; `sigma2` is ignored for Bernoulli.
    pub fn new(kind: FamilyKind, sigma2: f64, lo: f64, hi: f64) -> Result<Self> {
        match kind {
            FamilyKind::Gaussian => Self::gaussian(sigma2, lo, hi),
            FamilyKind::Bernoulli => Self::bernoulli(lo, hi),
        }
    }

    fn checked(kind: FamilyKind, sigma2: f64, theta: (f64, f64), lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Domain(format!("box [{lo}, {hi}] must be a non-empty finite interval")));
        }
        // The box must sit strictly inside the open interval Θ.
        if !(lo > theta.0 && hi < theta.1) {
            return Err(Error::Domain(format!(
                "box [{lo}, {hi}] must lie strictly inside ({}, {})",
                theta.0, theta.1
            )));
        }
        Ok(Self { kind, sigma2, theta, bounds: MeanBox { lo, hi } })
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn theta(&self) -> (f64, f64) {
        self.theta
    }

    pub fn bounds(&self) -> MeanBox {
        self.bounds
    }

    /// True when `x` lies in the closure of Θ.
    pub fn in_closed_domain(&self, x: f64) -> bool {
        x.is_finite() && x >= self.theta.0 && x <= self.theta.1
    }

    /// Kullback-Leibler divergence `d(p, q)` between the members with means
    /// `p` and `q`.
    pub fn kl(&self, p: f64, q: f64) -> f64 {
        match self.kind {
            FamilyKind::Gaussian => (p - q) * (p - q) / (2.0 * self.sigma2),
            FamilyKind::Bernoulli => bernoulli_kl(p, q),
        }
    }

    /// Natural parameter ν_p.
    pub fn natural_param(&self, p: f64) -> Result<f64> {
        if !(p > self.theta.0 && p < self.theta.1) {
            return Err(Error::Domain(format!("mean {p} is not in the interior of Θ")));
        }
        Ok(match self.kind {
            FamilyKind::Gaussian => p / self.sigma2,
            FamilyKind::Bernoulli => (p / (1.0 - p)).ln(),
        })
    }

    /// Coordinatewise clamp onto the box.
    pub fn box_project(&self, means: &[f64]) -> Vec<f64> {
        means.iter().map(|&m| self.bounds.clamp(m)).collect()
    }

    /// Minimizes `w1·d(p1, x) + w2·d(p2, x + offset)` over `x` with both `x`
    /// and `x + offset` in the closure of Θ. Returns `(value, minimizer)`.
    ///
    /// The value is `+∞` when no admissible `x` exists.
    pub fn weighted_kl_min(&self, w1: f64, p1: f64, w2: f64, p2: f64, offset: f64) -> Result<(f64, f64)> {
        if !(w1 >= 0.0 && w2 >= 0.0 && w1.is_finite() && w2.is_finite()) {
            return Err(Error::Domain(format!("weights must be finite and nonnegative, got ({w1}, {w2})")));
        }
        if w1 + w2 <= 0.0 {
            return Err(Error::Domain("both weights are zero".into()));
        }
        if !offset.is_finite() {
            return Err(Error::Domain(format!("offset must be finite, got {offset}")));
        }
        let objective = |x: f64| weighted(w1, self.kl(p1, x)) + weighted(w2, self.kl(p2, x + offset));
        match self.kind {
            FamilyKind::Gaussian => {
                let x = (w1 * p1 + w2 * (p2 - offset)) / (w1 + w2);
                Ok((objective(x), x))
            }
            FamilyKind::Bernoulli if offset == 0.0 => {
                let x = (w1 * p1 + w2 * p2) / (w1 + w2);
                Ok((objective(x), x))
            }
            FamilyKind::Bernoulli => {
                let lo = self.theta.0.max(self.theta.0 - offset);
                let hi = self.theta.1.min(self.theta.1 - offset);
                if lo > hi {
                    return Ok((f64::INFINITY, lo));
                }
                let x = golden_section_min(objective, lo, hi, GOLDEN_TOL);
                Ok((objective(x), x))
            }
        }
    }

    /// Box constants `L`, `D` and the model margin `F`.
    pub fn constants(&self, means: &[f64]) -> FamilyConstants {
        let MeanBox { lo, hi } = self.bounds;
        let (l, d) = match self.kind {
            FamilyKind::Gaussian => {
                let w = hi - lo;
                (w * w / (2.0 * self.sigma2), w / self.sigma2)
            }
            FamilyKind::Bernoulli => {
                let l = self.kl(lo, hi).max(self.kl(hi, lo));
                let nu = |p: f64| (p / (1.0 - p)).ln();
                (l, nu(hi) - nu(lo))
            }
        };
        let f = if means.iter().all(|&m| lo < m && m < hi) {
            means
                .iter()
                .map(|&m| (m - lo).abs().min((m - hi).abs()))
                .fold(f64::INFINITY, f64::min)
        } else {
            0.0
        };
        FamilyConstants { l, d, f }
    }

    /// Draws one observation from the arm with the given mean.
    pub fn sample<R: Rng + ?Sized>(&self, mean: f64, rng: &mut R) -> f64 {
        match self.kind {
            FamilyKind::Gaussian => {
                // sigma2 > 0 and mean finite are enforced at construction time.
                let normal = Normal::new(mean, self.sigma2.sqrt()).expect("valid normal parameters");
                normal.sample(rng)
            }
            FamilyKind::Bernoulli => {
                if rng.random::<f64>() < mean {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// `w·d` with the convention `0·∞ = 0`.
#[inline]
fn weighted(w: f64, d: f64) -> f64 {
    if w == 0.0 {
        0.0
    } else {
        w * d
    }
}

fn bernoulli_kl(p: f64, q: f64) -> f64 {
    if p == q {
        return 0.0;
    }
    if q <= 0.0 || q >= 1.0 {
        return f64::INFINITY;
    }
    let a = if p > 0.0 { p * (p / q).ln() } else { 0.0 };
    let b = if p < 1.0 { (1.0 - p) * ((1.0 - p) / (1.0 - q)).ln() } else { 0.0 };
    (a + b).max(0.0)
}

/// Golden-section search for the minimizer of a convex function on `[lo, hi]`.
pub(crate) fn golden_section_min<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    while hi - lo > tol {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = f(d);
        }
    }
    // Compare against the endpoints as well: the minimum of a convex function
    // may sit on the boundary where the interior probes never land.
    let mid = 0.5 * (lo + hi);
    [lo, mid, hi]
        .into_iter()
        .min_by(|a, b| f(*a).total_cmp(&f(*b)))
        .unwrap_or(mid)
}

//! Non-asymptotic bound quantities for TaS and S-TaS.
//!
//! Round counts here routinely exceed `u64` range (`T_0(δ)` is around `1e24`
//! already for two Gaussian arms), so rounds are carried as `f64`. Searches
//! run on the lattice of integers up to `2^53` and on the representable
//! (necessarily integral) doubles above it; [`lattice_predecessor`] gives the
//! lattice point right below a result for two-point checks.

use std::f64::consts::{E, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exp_family::FamilyConstants;
use crate::oracle::{self, OracleConfig};
use crate::problems::{BanditModel, ProblemInstance};
use crate::stopping::beta;

/// `Σ_t P(𝓔_t^c)` budget.
pub const GOOD_EVENT_BUDGET: f64 = PI * PI / 24.0;
/// Upper end of every round search.
pub const SEARCH_CAP: f64 = 1e300;
/// Number of explicitly summed terms in the `D_K` series.
pub const DK_SERIES_TERMS: usize = 1_000_000;
pub const DK_REL_TOL: f64 = 1e-6;
pub const DK_MAX_ITER: usize = 1000;

const EXACT_INT_LIMIT: f64 = 9_007_199_254_740_992.0; // 2^53

/// `10 K⁴`, the burn-in of both theorems.
pub fn burn_in(k: usize) -> f64 {
    10.0 * (k as f64).powi(4)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Tas,
    Stas,
}

/// How `g(t)` enters the `T_0` predicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GMode {
    #[default]
    Full,
    /// `g ≡ 0`: isolates the threshold against the linear information term.
    Zero,
}

// ---------------------------------------------------------------------------
// Lattice search

/// Lattice point immediately below `x`.
pub fn lattice_predecessor(x: f64) -> f64 {
    if x <= EXACT_INT_LIMIT {
        x - 1.0
    } else {
        f64::from_bits(x.to_bits() - 1)
    }
}

/// Smallest lattice point in `(lo, hi]` where `pred` holds, given `pred(lo)`
/// false and `pred(hi)` true; `lo` and `hi` must be lattice points.
fn lattice_bisect(mut lo: f64, mut hi: f64, pred: &impl Fn(f64) -> bool) -> f64 {
    if hi > EXACT_INT_LIMIT && lo < EXACT_INT_LIMIT {
        if pred(EXACT_INT_LIMIT) {
            hi = EXACT_INT_LIMIT;
        } else {
            lo = EXACT_INT_LIMIT;
        }
    }
    if hi <= EXACT_INT_LIMIT {
        while hi - lo > 1.0 {
            let mid = (0.5 * (lo + hi)).floor();
            if pred(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    } else {
        let (mut lb, mut hb) = (lo.to_bits(), hi.to_bits());
        while hb - lb > 1 {
            let mb = lb + (hb - lb) / 2;
            if pred(f64::from_bits(mb)) {
                hb = mb;
            } else {
                lb = mb;
            }
        }
        f64::from_bits(hb)
    }
}

/// Smallest lattice point `≥ start` where `pred` holds, by doubling then
/// bisection. Assumes `pred` stays true once it becomes true.
fn first_true(start: f64, what: &str, pred: impl Fn(f64) -> bool) -> Result<f64> {
    let start = start.ceil();
    if pred(start) {
        return Ok(start);
    }
    let mut lo = start;
    let mut hi = (2.0 * start).max(start + 1.0);
    while !pred(hi) {
        lo = hi;
        hi *= 2.0;
        if hi > SEARCH_CAP {
            return Err(Error::CapExceeded(format!("{what}: predicate still false at {SEARCH_CAP:e}")));
        }
    }
    Ok(lattice_bisect(lo, hi, &pred))
}

// ---------------------------------------------------------------------------
// D_K

/// One term of the `D_K` series, `e (e/K)^K (ln²(D t²) ln t)^K / t²`.
pub fn dk_summand(k: usize, d: f64, t: f64) -> f64 {
    let lt = t.ln();
    let inner = (d.ln() + 2.0 * lt).powi(2) * lt;
    E * (E / k as f64).powi(k as i32) * inner.powi(k as i32) / (t * t)
}

/// Coefficients (constant first) of `p(v) = ((a + 2v)² v)^K`.
fn dk_poly(k: usize, a: f64) -> Vec<f64> {
    let n = 2 * k;
    let mut c = vec![0.0; 3 * k + 1];
    let mut binom = 1.0;
    for m in 0..=n {
        // binom(n, m) a^{n−m} 2^m v^{m+K}
        c[m + k] = binom * a.powi((n - m) as i32) * 2f64.powi(m as i32);
        binom = binom * (n - m) as f64 / (m + 1) as f64;
    }
    c
}

fn poly_eval(c: &[f64], v: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &x| acc * v + x)
}

fn poly_derivative(c: &[f64]) -> Vec<f64> {
    c.iter().enumerate().skip(1).map(|(j, &x)| j as f64 * x).collect()
}

/// Upper bound on `Σ_{t > T} summand(t)`.
///
/// With `v = ln t` the integral `∫_T^∞ summand` equals
/// `e (e/K)^K e^{−c} Σ_j p^{(j)}(c)` for `c = ln T` (exact for a polynomial).
/// The summand is unimodal in `t`, so the sum over integers exceeds the
/// integral by at most the summand's maximum on `[T, ∞)`, which is added.
pub fn dk_tail(k: usize, d: f64, big_t: f64) -> f64 {
    let c = big_t.ln();
    let mut p = dk_poly(k, d.ln());
    let mut total = 0.0;
    while !p.is_empty() {
        total += poly_eval(&p, c);
        p = poly_derivative(&p);
    }
    let integral = E * (E / k as f64).powi(k as i32) * (-c).exp() * total;

    // The summand peaks where p'(v) = 2 p(v); p'/p is decreasing in v.
    let p = dk_poly(k, d.ln());
    let dp = poly_derivative(&p);
    let slope_excess = |v: f64| poly_eval(&dp, v) - 2.0 * poly_eval(&p, v);
    let peak_t = if slope_excess(c) <= 0.0 {
        big_t
    } else {
        let (mut lo, mut hi) = (c, c + 1.0);
        while slope_excess(hi) > 0.0 {
            hi += hi - c;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if slope_excess(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (0.5 * (lo + hi)).exp()
    };
    integral + dk_summand(k, d, peak_t)
}

/// Right side of the `D_K` inequality: the series summed to
/// [`DK_SERIES_TERMS`] plus [`dk_tail`].
pub fn dk_rhs(k: usize, d: f64) -> f64 {
    // t = 1 contributes 0 (ln 1 = 0).
    let head: f64 = (2..=DK_SERIES_TERMS).map(|t| dk_summand(k, d, t as f64)).sum();
    head + dk_tail(k, d, DK_SERIES_TERMS as f64)
}

/// Smallest fixed point `D ≥ 1` of `D = max(1, RHS(D))`, reached by iterating
/// from `D = 1`. The returned value satisfies `RHS(D) ≤ D`.
pub fn solve_dk(k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Domain("K must be at least 1".into()));
    }
    let mut d = 1.0f64;
    for _ in 0..DK_MAX_ITER {
        let next = dk_rhs(k, d).max(1.0);
        if (next - d).abs() <= DK_REL_TOL * next {
            // Step just above the limit so the inequality holds exactly.
            let mut cand = next.max(d) * (1.0 + DK_REL_TOL);
            for _ in 0..DK_MAX_ITER {
                let r = dk_rhs(k, cand);
                if r <= cand {
                    return Ok(cand);
                }
                cand = r * (1.0 + DK_REL_TOL);
            }
            return Err(Error::Convergence {
                what: "D_K certification",
                gap: dk_rhs(k, cand) - cand,
                iterations: DK_MAX_ITER,
                value: cand,
                weights: Vec::new(),
            });
        }
        d = next;
    }
    Err(Error::Convergence {
        what: "D_K fixed point",
        gap: (dk_rhs(k, d) - d).abs(),
        iterations: DK_MAX_ITER,
        value: d,
        weights: Vec::new(),
    })
}

// ---------------------------------------------------------------------------
// g(t)

fn check_burn_in(t: f64, k: usize) -> Result<()> {
    if !(t >= burn_in(k)) {
        return Err(Error::Precondition(format!("t = {t} is below 10K⁴ = {}", burn_in(k))));
    }
    Ok(())
}

/// The four slack terms `t·h_1(t), …, t·h_4(t)` of the TaS analysis.
pub fn h_terms_tas(t: f64, k: usize, d_k: f64, c: &FamilyConstants, sigma2: f64) -> Result<[f64; 4]> {
    check_burn_in(t, k)?;
    let kf = k as f64;
    let f = d_k * t.ln();
    let s = c.d * (2.0 * sigma2 * f).sqrt();
    let root = (t + kf * kf).sqrt();
    Ok([
        c.d * (2.0 * sigma2 * kf * f * t).sqrt(),
        c.l * kf * kf * kf.ln() * root,
        s * (kf * kf.ln() + 4.0 * (kf * t).sqrt() + kf * kf * root),
        s * (8.0 * t.powf(1.5) + 8.0 * kf * t * t.ln()).sqrt(),
    ])
}

/// `t·h_5(t)`, the extra S-TaS slack.
pub fn h5_term(t: f64, k: usize, d_k: f64, c: &FamilyConstants, sigma2: f64) -> Result<f64> {
    check_burn_in(t, k)?;
    let f = d_k * t.ln();
    Ok(2.0 * c.d * (2.0 * sigma2 * f).sqrt() * (8.0 * t.powf(1.5) + 8.0 * k as f64 * t * t.ln()).sqrt())
}

/// `g(t) = t Σ_{i≤4} h_i(t)` for TaS.
pub fn g_tas(t: f64, k: usize, d_k: f64, c: &FamilyConstants, sigma2: f64) -> Result<f64> {
    Ok(h_terms_tas(t, k, d_k, c, sigma2)?.iter().sum())
}

/// `g(t) = t Σ_{i≤5} h_i(t)` for S-TaS.
pub fn g_stas(t: f64, k: usize, d_k: f64, c: &FamilyConstants, sigma2: f64) -> Result<f64> {
    Ok(g_tas(t, k, d_k, c, sigma2)? + h5_term(t, k, d_k, c, sigma2)?)
}

/// Everything `g` needs besides `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GParams {
    pub k: usize,
    pub d_k: f64,
    pub constants: FamilyConstants,
    pub sigma2: f64,
    pub mode: GMode,
}

impl GParams {
    pub fn eval(&self, t: f64, variant: Variant) -> Result<f64> {
        match (self.mode, variant) {
            (GMode::Zero, _) => {
                check_burn_in(t, self.k)?;
                Ok(0.0)
            }
            (GMode::Full, Variant::Tas) => g_tas(t, self.k, self.d_k, &self.constants, self.sigma2),
            (GMode::Full, Variant::Stas) => g_stas(t, self.k, self.d_k, &self.constants, self.sigma2),
        }
    }
}

// ---------------------------------------------------------------------------
// T_0, T_M, T_μ

/// The `T_0` predicate
/// `β(t, δ) ≤ (t − √t − 1 − T_μ) T*⁻¹ − g(t)`.
pub fn t0_predicate(t: f64, delta: f64, t_star_inv: f64, variant: Variant, t_mu: f64, g: &GParams) -> bool {
    let shift = match variant {
        Variant::Tas => 0.0,
        Variant::Stas => t_mu,
    };
    let Ok(gt) = g.eval(t, variant) else { return false };
    beta(t, delta, g.k) <= (t - t.sqrt() - 1.0 - shift) * t_star_inv - gt
}

/// Smallest `t ≥ 10K⁴` satisfying [`t0_predicate`].
///
/// A 10-point probe above the result (up to 10⁴ times it) checks that the
/// predicate stays true; a failure is reported as a precondition error.
pub fn compute_t0(delta: f64, t_star_inv: f64, variant: Variant, t_mu: f64, g: &GParams) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!("delta must be in (0, 1), got {delta}")));
    }
    if !(t_star_inv > 0.0 && t_star_inv.is_finite()) {
        return Err(Error::Domain(format!("T*⁻¹ must be positive, got {t_star_inv}")));
    }
    let pred = |t: f64| t0_predicate(t, delta, t_star_inv, variant, t_mu, g);
    let t0 = first_true(burn_in(g.k), "T_0", pred)?;
    for j in 1..=10 {
        let probe = t0 * 10f64.powf(0.4 * j as f64);
        if probe <= SEARCH_CAP && !pred(probe) {
            return Err(Error::Precondition(format!("T_0 predicate fails again at {probe:e} after {t0:e}")));
        }
    }
    Ok(t0)
}

/// Left side `√(c σ² D_K ln n / (√(√n + K²) − 2K))` of the `T_M` / `T_μ`
/// inequalities, with `c = 4` and `c = 8` respectively.
pub fn region_radius(n: f64, k: usize, sigma2: f64, d_k: f64, c: f64) -> f64 {
    let kf = k as f64;
    let denom = (n.sqrt() + kf * kf).sqrt() - 2.0 * kf;
    if denom <= 0.0 {
        return f64::INFINITY;
    }
    (c * sigma2 * d_k * n.ln() / denom).sqrt()
}

fn radius_time(k: usize, sigma2: f64, d_k: f64, c: f64, level: f64, what: &str) -> Result<f64> {
    first_true(burn_in(k), what, |n| region_radius(n, k, sigma2, d_k, c) <= level)
}

/// `T_M = max{10K⁴, inf{n : √(4σ² D_K ln n / (√(√n+K²) − 2K)) ≤ F}}`.
pub fn compute_tm(k: usize, sigma2: f64, d_k: f64, f: f64) -> Result<f64> {
    if !(f > 0.0) {
        return Err(Error::Domain(format!("F must be positive (model strictly inside the box), got {f}")));
    }
    radius_time(k, sigma2, d_k, 4.0, f, "T_M")
}

/// `T_μ = max{10K⁴, inf{n : √(8 D_K σ² ln n / (√(√n+K²) − 2K)) ≤ ε_μ}}`.
pub fn compute_tmu(k: usize, sigma2: f64, d_k: f64, eps_mu: f64) -> Result<f64> {
    if !(eps_mu > 0.0) {
        return Err(Error::Domain(format!("eps_mu must be positive, got {eps_mu}")));
    }
    radius_time(k, sigma2, d_k, 8.0, eps_mu, "T_mu")
}

// ---------------------------------------------------------------------------
// ε_μ probe

/// Decreasing grid `1e-1, 5e-2, 2e-2, 1e-2, …, 1e-6`.
pub fn default_eps_mu_grid() -> Vec<f64> {
    let mut g = Vec::new();
    for e in 1..=6 {
        let s = 10f64.powi(-e);
        g.extend([s, s / 2.0, s / 5.0]);
    }
    g.retain(|&x| x >= 1e-6);
    g
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsMuProbe {
    pub eps_mu: f64,
    /// Always true: sampled perturbations give no certificate.
    pub empirical: bool,
    pub samples_per_level: usize,
}

/// Perturbations of `model` at ℓ∞ radius `eta`: all corners (random corners
/// beyond 10 arms) and uniform points in the ball, clamped to the parameter
/// space.
fn perturbations(problem: &ProblemInstance, model: &BanditModel, eta: f64, rng: &mut ChaCha8Rng) -> Vec<BanditModel> {
    let k = problem.arms();
    let fam = problem.family();
    let (lo, hi) = fam.theta();
    let clamp = |x: f64| x.clamp(lo, hi);
    let mut out = Vec::new();
    let corner = |signs: &dyn Fn(usize) -> f64| {
        let m: Vec<f64> = (0..k).map(|j| clamp(model.means()[j] + eta * signs(j))).collect();
        BanditModel::new(m).expect("finite")
    };
    if k <= 10 {
        for mask in 0..(1u32 << k) {
            out.push(corner(&|j| if mask >> j & 1 == 1 { 1.0 } else { -1.0 }));
        }
    } else {
        for _ in 0..1024 {
            let mask: u64 = rng.random();
            out.push(corner(&|j| if mask >> (j % 64) & 1 == 1 { 1.0 } else { -1.0 }));
        }
    }
    for _ in 0..64 {
        let m: Vec<f64> = model.means().iter().map(|&x| clamp(x + eta * rng.random_range(-1.0..=1.0))).collect();
        out.push(BanditModel::new(m).expect("finite"));
    }
    out
}

/// Largest `η` in the decreasing `grid` such that every sampled `μ′` with
/// `‖μ′ − μ‖∞ ≤ η` has `i_F(μ′) ⊆ i_F(μ) ∪ (𝓘 ∖ i*(μ))`. Empirical only.
pub fn probe_eps_mu(problem: &ProblemInstance, model: &BanditModel, config: &OracleConfig, grid: &[f64], seed: u64) -> Result<EpsMuProbe> {
    if grid.is_empty() || grid.iter().any(|&g| !(g > 0.0)) {
        return Err(Error::Domain("grid must hold positive magnitudes".into()));
    }
    let i_star = problem.i_star(model)?;
    let i_f = oracle::solve(problem, model, config)?.i_f;
    let allowed = |i: usize| i_f.contains(&i) || !i_star.contains(&i);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for &eta in grid {
        let samples = perturbations(problem, model, eta, &mut rng);
        let mut ok = true;
        for m in &samples {
            if !oracle::solve(problem, m, config)?.i_f.iter().all(|&i| allowed(i)) {
                ok = false;
                break;
            }
        }
        if ok {
            return Ok(EpsMuProbe { eps_mu: eta, empirical: true, samples_per_level: samples.len() });
        }
    }
    Err(Error::Precondition(format!(
        "no perturbation level in the grid passed (smallest {:e}); try a finer grid",
        grid.iter().copied().fold(f64::INFINITY, f64::min)
    )))
}

/// Checks `i_F(μ′) ⊆ i_F(μ) ∪ (𝓘 ∖ i*(μ))` on the samples used by
/// [`probe_eps_mu`] at a single level; returns the first violating model.
pub fn find_eps_mu_violation(
    problem: &ProblemInstance,
    model: &BanditModel,
    config: &OracleConfig,
    eta: f64,
    seed: u64,
) -> Result<Option<BanditModel>> {
    let i_star = problem.i_star(model)?;
    let i_f = oracle::solve(problem, model, config)?.i_f;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for m in perturbations(problem, model, eta, &mut rng) {
        let near = oracle::solve(problem, &m, config)?.i_f;
        if near.iter().any(|i| !i_f.contains(i) && i_star.contains(i)) {
            return Ok(Some(m));
        }
    }
    Ok(None)
}

// ---------------------------------------------------------------------------
// Report

/// Inputs shared by every quantity in a [`BoundReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub problem: ProblemInstance,
    pub model: BanditModel,
    /// Replaces the solved `D_K`.
    pub d_k_override: Option<f64>,
    /// User-supplied `ε_μ`; probed with the default grid when absent.
    pub eps_mu: Option<f64>,
    pub g_mode: GMode,
}

impl BoundInputs {
    pub fn new(problem: ProblemInstance, model: BanditModel) -> Self {
        Self { problem, model, d_k_override: None, eps_mu: None, g_mode: GMode::Full }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub k: usize,
    pub delta: f64,
    pub variant: Variant,
    pub raw_mode: bool,
    pub g_mode: GMode,
    pub sigma2: f64,
    pub d_k: f64,
    pub l: f64,
    pub d: f64,
    pub f: f64,
    pub t_star_inv: f64,
    /// Present whenever the model lies strictly inside the box.
    pub t_m: Option<f64>,
    /// S-TaS only.
    pub t_mu: Option<f64>,
    pub eps_mu: Option<f64>,
    pub eps_mu_empirical: bool,
    pub t0: f64,
    /// `10K⁴ + π²/24 + T_0`, plus `T_M` in raw mode.
    pub upper_bound: f64,
    /// `T* log(1/(2.4δ))`.
    pub lower_bound: f64,
}

/// Assembles every bound for one instance, risk and algorithm variant.
pub fn theorem_bound(inputs: &BoundInputs, delta: f64, variant: Variant, raw_mode: bool) -> Result<BoundReport> {
    let p = &inputs.problem;
    let k = p.arms();
    let sigma2 = p.family().sigma2();
    let d_k = match inputs.d_k_override {
        Some(d) if d > 0.0 && d.is_finite() => d,
        Some(d) => return Err(Error::Domain(format!("D_K override must be positive, got {d}"))),
        None => solve_dk(k)?,
    };
    let constants = p.family().constants(inputs.model.means());
    let cfg = OracleConfig::default();
    let sol = oracle::solve(p, &inputs.model, &cfg)?;
    let t_m = if constants.f > 0.0 { Some(compute_tm(k, sigma2, d_k, constants.f)?) } else { None };
    if raw_mode && t_m.is_none() {
        return Err(Error::Precondition("raw mode needs the model strictly inside the box".into()));
    }
    let (t_mu, eps_mu, eps_mu_empirical) = match variant {
        Variant::Tas => (None, None, false),
        Variant::Stas => {
            let (eps, empirical) = match inputs.eps_mu {
                Some(e) => (e, false),
                None => (probe_eps_mu(p, &inputs.model, &cfg, &default_eps_mu_grid(), 0)?.eps_mu, true),
            };
            (Some(compute_tmu(k, sigma2, d_k, eps)?), Some(eps), empirical)
        }
    };
    let g = GParams { k, d_k, constants, sigma2, mode: inputs.g_mode };
    let t0 = compute_t0(delta, sol.t_star_inv, variant, t_mu.unwrap_or(0.0), &g)?;
    let mut upper_bound = burn_in(k) + GOOD_EVENT_BUDGET + t0;
    if raw_mode {
        upper_bound += t_m.expect("checked above");
    }
    Ok(BoundReport {
        k,
        delta,
        variant,
        raw_mode,
        g_mode: inputs.g_mode,
        sigma2,
        d_k,
        l: constants.l,
        d: constants.d,
        f: constants.f,
        t_star_inv: sol.t_star_inv,
        t_m,
        t_mu,
        eps_mu,
        eps_mu_empirical,
        t0,
        upper_bound,
        lower_bound: oracle::char_time_lower_bound(sol.t_star_inv, delta)?,
    })
}

//! Characteristic-time game solvers.
//!
//! For an answer `i`, the per-answer value is
//!
//! ```text
//! D_i(μ) = sup_{ω ∈ Δ_K} inf_{λ ∈ ¬i} Σ_k ω_k d(μ_k, λ_k)
//! ```
//!
//! and `T*(μ)⁻¹ = max_i D_i(μ)`. The furthest-answer set `i_F(μ)` collects the
//! answers attaining that maximum.
//!
//! Because every alternative decomposes over competitors `a ≠ i`, the inner
//! objective is `min_a φ_a(ω_i, ω_a)` with each `φ_a` concave and positively
//! homogeneous. The default solver ("equalization") exploits this: for a level
//! `z = φ_a(1, ρ_a)` shared by all competitors it recovers the ratios `ρ_a`,
//! and the optimal level is the root of `Σ_a d(μ_i, x_a) / d(μ_a, x_a + off) = 1`
//! (an increasing function of `z`). Each returned solution carries a
//! certified duality gap: the lower end is the objective at the returned
//! weights, the upper end a mixture of the competitor witnesses.
//!
//! A Frank-Wolfe solver and an exhaustive grid search are provided as
//! independent routes for cross-checking.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exp_family::{golden_section_min, FamilyKind};
use crate::problems::{BanditModel, ProblemInstance, ProblemKind};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_TOL_I_F: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 100_000;
/// Largest weight grid `brute_force` agrees to enumerate.
pub const BRUTE_FORCE_NODE_LIMIT: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    #[default]
    Equalization,
    FrankWolfe,
    BruteForce,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Required certified additive gap on each per-answer value.
    pub tol: f64,
    /// Band below the maximum that still counts as attaining it.
    pub tol_i_f: f64,
    pub method: SolverMethod,
    /// Iteration cap for Frank-Wolfe.
    pub max_iter: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            tol_i_f: DEFAULT_TOL_I_F,
            method: SolverMethod::Equalization,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

impl OracleConfig {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_method(mut self, method: SolverMethod) -> Self {
        self.method = method;
        self
    }
}

/// Solution of the single-answer game `sup_ω inf_{λ ∈ ¬i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerSolution {
    pub value: f64,
    pub weights: Vec<f64>,
    /// Certified `upper bound − value`.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSolution {
    /// `T*(μ)⁻¹` in nats per round.
    pub t_star_inv: f64,
    /// `D_i(μ)` for every answer.
    pub d_values: Vec<f64>,
    /// Answers attaining the maximum, in increasing order.
    pub i_f: Vec<usize>,
    /// One maximizer of each attaining answer's game.
    pub weights: BTreeMap<usize, Vec<f64>>,
    /// Largest per-answer gap.
    pub gap: f64,
    /// Every per-answer value vanished; weights are uniform.
    pub degenerate: bool,
    pub method: SolverMethod,
}

impl OracleSolution {
    /// Representative oracle weights: those of the first answer in `i_f`.
    pub fn representative(&self) -> (usize, &[f64]) {
        let (&i, w) = self.weights.iter().next().expect("i_F is never empty");
        (i, w.as_slice())
    }
}

fn uniform(k: usize) -> Vec<f64> {
    vec![1.0 / k as f64; k]
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    Ok(())
}

/// Value of the game for one fixed answer.
pub fn d_value(problem: &ProblemInstance, model: &BanditModel, answer: usize, config: &OracleConfig) -> Result<AnswerSolution> {
    check_tol(config.tol)?;
    if answer >= problem.num_answers() {
        return Err(Error::Domain(format!("answer {answer} out of range")));
    }
    // Validates the model against the problem.
    let _ = problem.best_response(&uniform(problem.arms()), model, answer)?;
    if problem.in_alternative_closure(model, answer) {
        return Ok(AnswerSolution { value: 0.0, weights: uniform(problem.arms()), gap: 0.0 });
    }
    match config.method {
        SolverMethod::Equalization => {
            let sol = equalize(problem, model, answer)?;
            if sol.gap <= config.tol {
                Ok(sol)
            } else {
                frank_wolfe(problem, model, answer, config, Some(sol.weights))
            }
        }
        SolverMethod::FrankWolfe => frank_wolfe(problem, model, answer, config, None),
        SolverMethod::BruteForce => Err(Error::Domain(
            "brute force is only available through oracle::brute_force".into(),
        )),
    }
}

/// Solves the full game: every `D_i`, the furthest-answer set and its weights.
///
/// The model need not be in the problem's model class; empirical means early
/// in a run can be tied or otherwise degenerate. When every `D_i` vanishes the
/// solution is flagged degenerate with `i_F` equal to all answers and uniform
/// weights.
pub fn solve(problem: &ProblemInstance, model: &BanditModel, config: &OracleConfig) -> Result<OracleSolution> {
    let n = problem.num_answers();
    let mut per_answer = Vec::with_capacity(n);
    for i in 0..n {
        per_answer.push(d_value(problem, model, i, config)?);
    }
    let d_values: Vec<f64> = per_answer.iter().map(|s| s.value).collect();
    let gap = per_answer.iter().map(|s| s.gap).fold(0.0, f64::max);
    let t_star_inv = d_values.iter().copied().fold(0.0, f64::max);
    if t_star_inv <= 0.0 {
        return Ok(OracleSolution {
            t_star_inv: 0.0,
            d_values,
            i_f: (0..n).collect(),
            weights: (0..n).map(|i| (i, uniform(problem.arms()))).collect(),
            gap,
            degenerate: true,
            method: config.method,
        });
    }
    let i_f: Vec<usize> = (0..n).filter(|&i| d_values[i] >= t_star_inv - config.tol_i_f).collect();
    let weights = i_f.iter().map(|&i| (i, per_answer[i].weights.clone())).collect();
    Ok(OracleSolution { t_star_inv, d_values, i_f, weights, gap, degenerate: false, method: config.method })
}

/// Furthest-answer set only.
pub fn furthest_answers(problem: &ProblemInstance, model: &BanditModel, config: &OracleConfig) -> Result<Vec<usize>> {
    Ok(solve(problem, model, config)?.i_f)
}

/// Lower bound `T*(μ) log(1/(2.4δ))` on the expected stopping time of any
/// δ-correct algorithm. Returns `+∞` when `T*(μ)⁻¹ = 0` and is clamped at 0
/// for risks above 1/2.4.
pub fn char_time_lower_bound(t_star_inv: f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!("delta must be in (0, 1), got {delta}")));
    }
    if !(t_star_inv >= 0.0) {
        return Err(Error::Domain(format!("T*⁻¹ must be nonnegative, got {t_star_inv}")));
    }
    if t_star_inv == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(((1.0 / (2.4 * delta)).ln() / t_star_inv).max(0.0))
}

// ---------------------------------------------------------------------------
// Equalization solver

/// Relative width at which the equalization bisections stop.
const BISECTION_REL_TOL: f64 = 1e-15;

/// Competitor `a` of answer `i` seen through the homogeneous slice
/// `ρ ↦ φ_a(1, ρ)`.
struct Competitor {
    arm: usize,
    /// `sup_ρ φ_a(1, ρ)`.
    cap: f64,
}

struct Pairwise<'a> {
    problem: &'a ProblemInstance,
    means: &'a [f64],
    answer: usize,
    off: f64,
}

impl Pairwise<'_> {
    fn phi(&self, a: usize, rho: f64) -> Result<(f64, f64)> {
        self.problem
            .family()
            .weighted_kl_min(1.0, self.means[self.answer], rho, self.means[a], self.off)
    }

    fn competitor(&self, a: usize) -> Competitor {
        let fam = self.problem.family();
        // As ρ → ∞ the competitor coordinate is pinned at its mean.
        let x = self.means[a] - self.off;
        let cap = if fam.in_closed_domain(x) { fam.kl(self.means[self.answer], x) } else { f64::INFINITY };
        Competitor { arm: a, cap }
    }

    /// Ratio `ρ` with `φ_a(1, ρ) = z`, and the divergences
    /// `(d(μ_i, x), d(μ_a, x + off))` at the corresponding best response.
    fn ratio_at_level(&self, c: &Competitor, z: f64) -> Result<(f64, f64, f64)> {
        let fam = self.problem.family();
        let (mi, ma) = (self.means[self.answer], self.means[c.arm]);
        if fam.kind() == FamilyKind::Gaussian {
            // φ_a(1, ρ) = ρ/(1+ρ) · cap for Gaussian arms.
            let rho = z / (c.cap - z);
            let (_, x) = self.phi(c.arm, rho)?;
            return Ok((rho, fam.kl(mi, x), fam.kl(ma, x + self.off)));
        }
        // Parametrize by the best response `x`: stationarity gives
        // `ρ(x) = (μ_i − x) V(x + off) / (V(x) (x + off − μ_a))` with `V` the
        // variance function, and `φ(x) = d(μ_i, x) + ρ(x) d(μ_a, x + off)`
        // decreases from the cap to its value at the upper end.
        let (theta_lo, theta_hi) = fam.theta();
        let off = self.off;
        let variance = |q: f64| q * (1.0 - q);
        let x_lo = (ma - off).max(theta_lo);
        let x_hi = mi.min(theta_hi - off);
        let rho_at = |x: f64| {
            if x >= mi {
                0.0
            } else {
                (mi - x) * variance(x + off) / (variance(x) * (x + off - ma))
            }
        };
        let level = |x: f64| {
            let rho = rho_at(x);
            let b = if rho > 0.0 { rho * fam.kl(ma, x + off) } else { 0.0 };
            (rho, fam.kl(mi, x) + b)
        };
        if level(x_hi).1 >= z {
            return Ok((rho_at(x_hi), fam.kl(mi, x_hi), fam.kl(ma, x_hi + off)));
        }
        let (mut lo, mut hi) = (x_lo, x_hi);
        while hi - lo > BISECTION_REL_TOL * hi.abs().max(1e-300) {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if level(mid).1 > z {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        // `hi` stays strictly above `x_lo`, where `ρ` blows up.
        let x = hi;
        Ok((level(x).0, fam.kl(mi, x), fam.kl(ma, x + off)))
    }
}

fn equalize(problem: &ProblemInstance, model: &BanditModel, answer: usize) -> Result<AnswerSolution> {
    let k = problem.arms();
    let pw = Pairwise { problem, means: model.means(), answer, off: problem.offset() };
    let comps: Vec<Competitor> = (0..k).filter(|&a| a != answer).map(|a| pw.competitor(a)).collect();
    let z_max = comps.iter().map(|c| c.cap).fold(f64::INFINITY, f64::min);

    // F(z) = Σ_a A_a / B_a is increasing from 0 to +∞ on (0, z_max).
    let balance = |z: f64| -> Result<f64> {
        let mut s = 0.0;
        for c in &comps {
            let (_, a, b) = pw.ratio_at_level(c, z)?;
            s += if b > 0.0 { a / b } else { f64::INFINITY };
        }
        Ok(s)
    };
    let mut lo = 0.0;
    let mut hi = if z_max.is_finite() {
        z_max
    } else {
        let mut h = 1.0;
        while balance(h)? < 1.0 {
            h *= 2.0;
        }
        h
    };
    while hi - lo > BISECTION_REL_TOL * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if balance(mid)? < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let z = 0.5 * (lo + hi);

    let mut rhos = Vec::with_capacity(comps.len());
    let mut ab = Vec::with_capacity(comps.len());
    for c in &comps {
        let (rho, a, b) = pw.ratio_at_level(c, z)?;
        rhos.push(rho);
        ab.push((a, b));
    }
    let w_answer = 1.0 / (1.0 + rhos.iter().sum::<f64>());
    let mut weights = vec![0.0; k];
    weights[answer] = w_answer;
    for (c, rho) in comps.iter().zip(&rhos) {
        weights[c.arm] = rho * w_answer;
    }
    normalize(&mut weights);

    let value = problem.best_response(&weights, model, answer)?.value;
    let upper = witness_mixture_bound(&ab);
    Ok(AnswerSolution { value, weights, gap: (upper - value).max(0.0) })
}

/// Weak-duality upper bound on `D_i` from one witness per competitor.
///
/// Each witness moves only the answer coordinate (divergence `A_a`) and its
/// competitor's (divergence `B_a`). For a mixture `q` over witnesses,
/// `sup_ω Σ_a q_a Σ_k ω_k d(μ_k, λ^a_k) = max(Σ_a q_a A_a, max_a q_a B_a)`.
/// The mixture `q_a ∝ 1/B_a` is optimal at the equalized solution.
fn witness_mixture_bound(ab: &[(f64, f64)]) -> f64 {
    if ab.iter().any(|&(_, b)| b <= 0.0) {
        // A witness with zero competitor cost on its own bounds the game by A.
        return ab
            .iter()
            .filter(|&&(_, b)| b <= 0.0)
            .map(|&(a, _)| a)
            .fold(f64::INFINITY, f64::min);
    }
    let inv_sum: f64 = ab.iter().map(|&(_, b)| 1.0 / b).sum();
    let answer_side: f64 = ab.iter().map(|&(a, b)| a / b).sum::<f64>() / inv_sum;
    answer_side.max(1.0 / inv_sum)
}

fn normalize(w: &mut [f64]) {
    let s: f64 = w.iter().sum();
    for x in w.iter_mut() {
        *x /= s;
    }
}

// ---------------------------------------------------------------------------
// Frank-Wolfe

/// Frank-Wolfe ascent on the simplex with step `2/(t+2)`, without away steps.
/// The vertex maximizes the running average of best-response supergradients,
/// which keeps the iteration convergent on this nonsmooth objective.
///
/// Two upper bounds are tracked: the supergradient bound at every iterate,
/// and the mixture of all best-response witnesses seen so far. The method
/// reports the best iterate and fails with [`Error::Convergence`] if the gap
/// is not below `config.tol` within `config.max_iter` iterations.
pub fn frank_wolfe(
    problem: &ProblemInstance,
    model: &BanditModel,
    answer: usize,
    config: &OracleConfig,
    start: Option<Vec<f64>>,
) -> Result<AnswerSolution> {
    let k = problem.arms();
    let means = model.means();
    if problem.in_alternative_closure(model, answer) {
        return Ok(AnswerSolution { value: 0.0, weights: uniform(k), gap: 0.0 });
    }
    let fam = problem.family();
    let off = problem.offset();
    let mut w = start.unwrap_or_else(|| uniform(k));
    let mut best_w = w.clone();
    let mut best_lower = f64::NEG_INFINITY;
    let mut best_upper = f64::INFINITY;
    // Accumulated witness mixture: answer-side divergence and per-competitor
    // divergence, each summed over iterations.
    let mut mix_a = 0.0;
    let mut mix_b = vec![0.0; k];
    let mut gap = f64::INFINITY;

    for t in 0..config.max_iter {
        let br = problem.best_response(&w, model, answer)?;
        let (_, a) = br.pair;
        let x = br.witness.means()[answer];
        let ga = fam.kl(means[answer], x);
        let gb = fam.kl(means[a], x + off);
        if br.value > best_lower {
            best_lower = br.value;
            best_w.clone_from(&w);
        }
        // Supergradient of the active piece.
        let gw = ga * w[answer] + gb * w[a];
        let gmax = ga.max(gb);
        best_upper = best_upper.min(br.value + gmax - gw);

        mix_a += ga;
        mix_b[a] += gb;
        let n = (t + 1) as f64;
        let mixture = (mix_a / n).max(mix_b.iter().fold(0.0, |m: f64, b| m.max(b / n)));
        best_upper = best_upper.min(mixture);

        gap = (best_upper - best_lower).max(0.0);
        if gap <= config.tol {
            return Ok(AnswerSolution { value: best_lower, weights: best_w, gap });
        }
        // Vertex against the averaged supergradient.
        let mut j = answer;
        let mut gj = mix_a;
        for (k, &b) in mix_b.iter().enumerate() {
            if b > gj || (b == gj && k < j) {
                j = k;
                gj = b;
            }
        }
        let step = 2.0 / (t as f64 + 2.0);
        for (i, wi) in w.iter_mut().enumerate() {
            *wi *= 1.0 - step;
            if i == j {
                *wi += step;
            }
        }
    }
    Err(Error::Convergence {
        what: "Frank-Wolfe",
        gap,
        iterations: config.max_iter,
        value: best_lower,
        weights: best_w,
    })
}

// ---------------------------------------------------------------------------
// Gaussian best-arm identification

/// Oracle weights for Gaussian BAI by bisection on the best arm's weight.
///
/// For a fixed best-arm weight `w`, the competitor weights that equalize every
/// pairwise value at `v` are `ω_a = v·w / (w·g_a − v)` with
/// `g_a = Δ_a² / (2σ²)`; `v(w)` solves `Σ_a ω_a = 1 − w` and is maximized over
/// `w` by golden-section search to `1e-12`.
pub fn gaussian_bai_exact(problem: &ProblemInstance, model: &BanditModel) -> Result<(f64, Vec<f64>)> {
    if problem.family().kind() != FamilyKind::Gaussian || problem.kind() != ProblemKind::Bai {
        return Err(Error::Domain("gaussian_bai_exact needs a Gaussian BAI problem".into()));
    }
    let best = problem.i_star(model)?[0];
    let means = model.means();
    let s2 = problem.family().sigma2();
    let gaps: Vec<(usize, f64)> = (0..problem.arms())
        .filter(|&a| a != best)
        .map(|a| (a, (means[best] - means[a]).powi(2) / (2.0 * s2)))
        .collect();
    let g_min = gaps.iter().map(|g| g.1).fold(f64::INFINITY, f64::min);

    let level = |w: f64| -> f64 {
        // Total competitor weight is increasing in v on (0, w·g_min).
        let total = |v: f64| gaps.iter().map(|&(_, g)| v * w / (w * g - v)).sum::<f64>();
        let (mut lo, mut hi) = (0.0, w * g_min);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if total(mid) < 1.0 - w {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let w_best = golden_section_min(|w| -level(w), 0.0, 1.0, 1e-12);
    let v = level(w_best);
    let mut weights = vec![0.0; problem.arms()];
    weights[best] = w_best;
    for &(a, g) in &gaps {
        weights[a] = v * w_best / (w_best * g - v);
    }
    normalize(&mut weights);
    Ok((v, weights))
}

// ---------------------------------------------------------------------------
// Exhaustive grid

/// Number of points of the simplex grid with step `1/n` in dimension `k`.
fn simplex_grid_size(n: usize, k: usize) -> f64 {
    // C(n + k − 1, k − 1)
    let mut c = 1.0;
    for j in 1..k {
        c *= (n + j) as f64 / j as f64;
    }
    c
}

/// Calls `f` on every composition of `n` into `k` nonnegative parts.
fn for_each_composition(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(rem: usize, slot: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if slot + 1 == cur.len() {
            cur[slot] = rem;
            f(cur);
            return;
        }
        for v in 0..=rem {
            cur[slot] = v;
            rec(rem - v, slot + 1, cur, f);
        }
    }
    let mut cur = vec![0; k];
    rec(n, 0, &mut cur, f);
}

/// Exhaustive evaluation of the game on a weight grid of step
/// `weight_grid_step`, with every inner infimum taken over a grid of step
/// `lambda_grid_step` on the binding line of each competitor's half-space.
///
/// Used as an independent reference for the solvers. Requires a model with a
/// well-defined answer set and at most four arms.
pub fn brute_force(
    problem: &ProblemInstance,
    model: &BanditModel,
    weight_grid_step: f64,
    lambda_grid_step: f64,
) -> Result<OracleSolution> {
    let k = problem.arms();
    if k > 4 {
        return Err(Error::Precondition(format!("brute force supports at most 4 arms, got {k}")));
    }
    if !(weight_grid_step > 0.0 && weight_grid_step <= 1.0 && lambda_grid_step > 0.0) {
        return Err(Error::Domain("grid steps must be positive".into()));
    }
    problem.i_star(model)?;
    let n = (1.0 / weight_grid_step).round() as usize;
    let nodes = simplex_grid_size(n, k);
    if nodes >= BRUTE_FORCE_NODE_LIMIT {
        return Err(Error::GridTooLarge { nodes, limit: BRUTE_FORCE_NODE_LIMIT });
    }

    let fam = problem.family();
    let means = model.means();
    let off = problem.offset();
    let (theta_lo, theta_hi) = fam.theta();
    let x_lo = (means.iter().copied().fold(f64::INFINITY, f64::min) - off).max(theta_lo);
    let x_hi = means.iter().copied().fold(f64::NEG_INFINITY, f64::max).min(theta_hi - off);
    let m = ((x_hi - x_lo) / lambda_grid_step).ceil().max(0.0) as usize;
    let xs: Vec<f64> = (0..=m).map(|j| (x_lo + j as f64 * lambda_grid_step).min(x_hi)).collect();

    let mut d_values = vec![0.0; k];
    let mut arg_weights: Vec<Vec<f64>> = vec![uniform(k); k];
    for i in 0..k {
        // Per competitor: None when the model already lies in the half-space,
        // otherwise the divergence tables along the binding line.
        let tables: Vec<(usize, Option<(Vec<f64>, Vec<f64>)>)> = (0..k)
            .filter(|&a| a != i)
            .map(|a| {
                if means[a] >= means[i] + off {
                    (a, None)
                } else {
                    let da = xs.iter().map(|&x| fam.kl(means[i], x)).collect();
                    let db = xs.iter().map(|&x| fam.kl(means[a], x + off)).collect();
                    (a, Some((da, db)))
                }
            })
            .collect();
        if tables.iter().any(|t| t.1.is_none()) {
            continue;
        }
        let mut best = f64::NEG_INFINITY;
        let mut best_w = uniform(k);
        for_each_composition(n, k, &mut |c: &[usize]| {
            let w: Vec<f64> = c.iter().map(|&v| v as f64 / n as f64).collect();
            let mut inner = f64::INFINITY;
            for (a, t) in &tables {
                let (da, db) = t.as_ref().expect("checked above");
                let (wi, wa) = (w[i], w[*a]);
                let mut line = f64::INFINITY;
                for j in 0..xs.len() {
                    let v = wi * da[j] + wa * db[j];
                    if v < line {
                        line = v;
                    }
                }
                inner = inner.min(line);
                if inner <= best {
                    break;
                }
            }
            if inner > best {
                best = inner;
                best_w = w;
            }
        });
        d_values[i] = best.max(0.0);
        arg_weights[i] = best_w;
    }
    let t_star_inv = d_values.iter().copied().fold(0.0, f64::max);
    let i_f: Vec<usize> = (0..k).filter(|&i| d_values[i] >= t_star_inv - DEFAULT_TOL_I_F).collect();
    let weights = i_f.iter().map(|&i| (i, arg_weights[i].clone())).collect();
    Ok(OracleSolution {
        t_star_inv,
        d_values,
        i_f,
        weights,
        gap: weight_grid_step,
        degenerate: t_star_inv <= 0.0,
        method: SolverMethod::BruteForce,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exp_family::FamilySpec;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gauss_bai(k: usize) -> ProblemInstance {
        ProblemInstance::new(FamilySpec::gaussian(1.0, -1.0, 2.0).unwrap(), k, ProblemKind::Bai).unwrap()
    }

    fn gauss_eps(eps: f64) -> ProblemInstance {
        ProblemInstance::new(
            FamilySpec::gaussian(1.0, 0.0, 1.0).unwrap(),
            2,
            ProblemKind::EpsBai { epsilon: eps },
        )
        .unwrap()
    }

    fn model(m: &[f64]) -> BanditModel {
        BanditModel::new(m.to_vec()).unwrap()
    }

    #[test]
    fn two_arm_gaussian_closed_form() {
        let cfg = OracleConfig::default();
        let s = d_value(&gauss_bai(2), &model(&[1.0, 0.0]), 0, &cfg).unwrap();
        assert_abs_diff_eq!(s.value, 0.125, epsilon = 1e-12);
        assert_abs_diff_eq!(s.weights[0], 0.5, epsilon = 1e-9);
        assert!(s.gap <= cfg.tol);
        let s = d_value(&gauss_bai(2), &model(&[1.0, 0.0]), 1, &cfg).unwrap();
        assert_eq!(s.value, 0.0);
        assert_eq!(s.weights, vec![0.5, 0.5]);

        let sol = solve(&gauss_bai(2), &model(&[1.0, 0.0]), &cfg).unwrap();
        assert_abs_diff_eq!(sol.t_star_inv, 0.125, epsilon = 1e-12);
        assert_eq!(sol.i_f, vec![0]);
    }

    #[test]
    fn two_arm_closed_form_over_random_gaps() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let s2 = rng.random_range(0.2..4.0);
            let p = ProblemInstance::new(FamilySpec::gaussian(s2, -5.0, 5.0).unwrap(), 2, ProblemKind::Bai).unwrap();
            let a = rng.random_range(-2.0..2.0);
            let b = rng.random_range(-2.0..2.0);
            let sol = solve(&p, &model(&[a, b]), &OracleConfig::default()).unwrap();
            let delta: f64 = a - b;
            assert!((sol.t_star_inv - delta * delta / (8.0 * s2)).abs() <= 1e-9);
        }
    }

    #[test]
    fn three_arm_matches_brute_force() {
        let p = gauss_bai(3);
        let m = model(&[1.0, 0.5, 0.0]);
        let s = d_value(&p, &m, 0, &OracleConfig::default()).unwrap();
        let b = brute_force(&p, &m, 0.002, 0.001).unwrap();
        assert!((s.value - b.d_values[0]).abs() <= 1e-3, "{} vs {}", s.value, b.d_values[0]);
        assert!(s.value >= b.d_values[0] - 1e-12);
    }

    #[test]
    fn eps_bai_symmetric_model_has_two_furthest_answers() {
        let sol = solve(&gauss_eps(0.5), &model(&[0.5, 0.5]), &OracleConfig::default()).unwrap();
        assert_abs_diff_eq!(sol.d_values[0], sol.d_values[1], epsilon = 1e-12);
        assert_eq!(sol.i_f, vec![0, 1]);
        assert_eq!(sol.weights.len(), 2);
    }

    #[test]
    fn eps_bai_matches_grid() {
        let p = gauss_eps(0.1);
        let m = model(&[0.5, 0.45]);
        let sol = solve(&p, &m, &OracleConfig::default()).unwrap();
        // Two-arm shifted closed form: (μ_i − μ_a + ε)² / (8σ²).
        assert_abs_diff_eq!(sol.d_values[0], 0.15f64.powi(2) / 8.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.d_values[1], 0.05f64.powi(2) / 8.0, epsilon = 1e-12);
        let b = brute_force(&p, &m, 0.001, 0.001).unwrap();
        assert_eq!(sol.i_f, b.i_f);
        assert!((sol.t_star_inv - b.t_star_inv).abs() <= 2e-3);
    }

    #[test]
    fn degenerate_model_returns_uniform() {
        let sol = solve(&gauss_bai(3), &model(&[0.2, 0.2, 0.2]), &OracleConfig::default()).unwrap();
        assert!(sol.degenerate);
        assert_eq!(sol.t_star_inv, 0.0);
        assert_eq!(sol.i_f, vec![0, 1, 2]);
        assert!(sol.weights.values().all(|w| w.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15)));
    }

    #[test]
    fn brute_force_refuses_degenerate_and_large_inputs() {
        assert!(matches!(
            brute_force(&gauss_bai(3), &model(&[0.3, 0.3, 0.3]), 0.01, 0.01),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(
            brute_force(&gauss_bai(4), &model(&[1.0, 0.3, 0.2, 0.0]), 1e-4, 0.01),
            Err(Error::GridTooLarge { .. })
        ));
        assert!(brute_force(&gauss_bai(5), &model(&[1.0, 0.3, 0.2, 0.0, 0.1]), 0.1, 0.01).is_err());
    }

    #[test]
    fn brute_force_two_arm_matches_closed_form() {
        let b = brute_force(&gauss_bai(2), &model(&[1.0, 0.0]), 0.001, 0.001).unwrap();
        assert!((b.t_star_inv - 0.125).abs() <= 1e-3);
        assert_eq!(b.i_f, vec![0]);
    }

    #[test]
    fn weights_are_on_the_simplex_and_gap_certified() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let fams = [
            FamilySpec::gaussian(1.0, 0.0, 1.0).unwrap(),
            FamilySpec::gaussian(0.3, 0.0, 1.0).unwrap(),
            FamilySpec::bernoulli(0.05, 0.95).unwrap(),
        ];
        for fam in fams {
            for kind in [ProblemKind::Bai, ProblemKind::EpsBai { epsilon: 0.05 }] {
                for k in 2..6 {
                    let p = ProblemInstance::new(fam, k, kind).unwrap();
                    let means: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..0.95)).collect();
                    let cfg = OracleConfig::default();
                    let sol = solve(&p, &model(&means), &cfg).unwrap();
                    assert!(sol.gap <= cfg.tol, "{fam:?} {kind:?} {means:?} gap {}", sol.gap);
                    for w in sol.weights.values() {
                        assert!(w.iter().all(|&x| x >= 0.0));
                        assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
                    }
                    assert!(!sol.i_f.is_empty());
                    assert!((sol.t_star_inv - sol.d_values.iter().copied().fold(0.0, f64::max)).abs() <= sol.gap + 1e-15);
                }
            }
        }
    }

    #[test]
    fn competitor_values_are_equalized_at_the_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let cfg = OracleConfig::default();
        for k in 3..7 {
            let p = gauss_bai(k);
            let means: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
            let m = model(&means);
            let best = p.i_star(&m).unwrap()[0];
            let s = d_value(&p, &m, best, &cfg).unwrap();
            for a in (0..k).filter(|&a| a != best) {
                let (v, _) = p
                    .family()
                    .weighted_kl_min(s.weights[best], means[best], s.weights[a], means[a], 0.0)
                    .unwrap();
                assert!((v - s.value).abs() <= 10.0 * cfg.tol, "competitor {a}: {v} vs {}", s.value);
            }
        }
    }

    #[test]
    fn gaussian_bai_exact_agrees_with_equalization() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for k in 2..7 {
            let p = gauss_bai(k);
            let means: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
            let m = model(&means);
            let (v, w) = gaussian_bai_exact(&p, &m).unwrap();
            let sol = solve(&p, &m, &OracleConfig::default()).unwrap();
            assert!((v - sol.t_star_inv).abs() <= 1e-9, "{v} vs {}", sol.t_star_inv);
            let (_, ws) = sol.representative();
            for (a, b) in w.iter().zip(ws) {
                assert!((a - b).abs() <= 1e-5);
            }
        }
    }

    #[test]
    fn frank_wolfe_agrees_with_equalization() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let cfg = OracleConfig::default().with_tol(1e-4).with_method(SolverMethod::FrankWolfe);
        for fam in [FamilySpec::gaussian(1.0, 0.0, 1.0).unwrap(), FamilySpec::bernoulli(0.05, 0.95).unwrap()] {
            for k in 2..5 {
                let p = ProblemInstance::new(fam, k, ProblemKind::Bai).unwrap();
                let means: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..0.9)).collect();
                let m = model(&means);
                let best = p.i_star(&m).unwrap()[0];
                let fw = d_value(&p, &m, best, &cfg).unwrap();
                let eq = d_value(&p, &m, best, &OracleConfig::default()).unwrap();
                assert!((fw.value - eq.value).abs() <= 1e-4, "{} vs {}", fw.value, eq.value);
            }
        }
    }

    #[test]
    fn frank_wolfe_reports_best_iterate_when_budget_runs_out() {
        let cfg = OracleConfig { tol: 1e-14, max_iter: 50, method: SolverMethod::FrankWolfe, ..Default::default() };
        match d_value(&gauss_bai(3), &model(&[1.0, 0.4, 0.0]), 0, &cfg) {
            Err(Error::Convergence { value, weights, .. }) => {
                assert!(value > 0.0);
                assert_eq!(weights.len(), 3);
            }
            other => panic!("expected a convergence error, got {other:?}"),
        }
    }

    #[test]
    fn lower_bound_examples() {
        assert_abs_diff_eq!(char_time_lower_bound(0.125, 0.1).unwrap(), 8.0 * (1.0f64 / 0.24).ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(char_time_lower_bound(0.125, 0.1).unwrap(), 11.4169, epsilon = 1e-4);
        assert_abs_diff_eq!(char_time_lower_bound(0.125, 1.0 / 2.4).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(char_time_lower_bound(0.25, 0.01).unwrap(), 4.0 * (100.0f64 / 2.4).ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(char_time_lower_bound(0.25, 0.01).unwrap(), 14.91881, epsilon = 1e-5);
        assert_eq!(char_time_lower_bound(0.0, 0.1).unwrap(), f64::INFINITY);
        assert!(char_time_lower_bound(0.1, 0.0).is_err());
    }

    /// i_F of nearby models stays inside i_F(μ) ∪ (answers that are wrong at μ).
    #[test]
    fn furthest_answers_are_upper_hemicontinuous_on_probes() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let cfg = OracleConfig::default();
        let problems = [gauss_bai(3), ProblemInstance::new(
            FamilySpec::gaussian(1.0, 0.0, 1.0).unwrap(),
            3,
            ProblemKind::EpsBai { epsilon: 0.1 },
        )
        .unwrap()];
        for p in problems {
            for _ in 0..5 {
                let means: Vec<f64> = (0..3).map(|_| rng.random_range(0.1..0.9)).collect();
                let m = model(&means);
                let i_f = solve(&p, &m, &cfg).unwrap().i_f;
                let i_star = p.i_star(&m).unwrap();
                let allowed = |i: usize| i_f.contains(&i) || !i_star.contains(&i);
                // Only the smallest perturbation must pass; larger ones are probes.
                let eta = 1e-6;
                for _ in 0..20 {
                    let pert: Vec<f64> = means.iter().map(|&x| x + rng.random_range(-eta..=eta)).collect();
                    let near = solve(&p, &model(&pert), &cfg).unwrap().i_f;
                    assert!(near.iter().all(|&i| allowed(i)), "{means:?} -> {pert:?}: {near:?} vs {i_f:?}");
                }
            }
        }
    }
}

//! Track-and-Stop (TaS) and Sticky Track-and-Stop (S-TaS) agents.
//!
//! Both agents share the GLR stopping rule and C-Tracking. TaS tracks oracle
//! weights of the full game at the (projected) empirical means. S-TaS first
//! picks an answer `i_t`, the order-minimal member of
//! `𝓘_t = ∪_{λ ∈ C_t} i_F(λ)`, and tracks the weights of the game against
//! `¬i_t` only.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::solve_dk;
use crate::error::{Error, Result};
use crate::exp_family::{golden_section_min, FamilySpec, MeanBox};
use crate::oracle::{self, OracleConfig};
use crate::problems::{BanditModel, ProblemInstance};
use crate::stopping::{glr, should_stop, GlrResult};
use crate::tracking::{epsilon_t, TrackerState};

pub const DEFAULT_ROUND_CAP: u64 = 10_000_000;
/// Restarts of the candidate-answer search.
pub const SEARCH_RESTARTS: usize = 16;
/// Iterations per restart of the candidate-answer search.
pub const SEARCH_ITERATIONS: usize = 200;
/// Grid step of the two-arm candidate fallback.
pub const TWO_ARM_GRID_STEP: f64 = 1e-3;
/// Node budget of the two-arm fallback; the step is widened beyond it.
pub const TWO_ARM_GRID_NODES: f64 = 40_000.0;
/// Coordinate ascent stops once its step falls below this fraction of the
/// box width.
const SEARCH_STEP_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Tas,
    Stas,
}

/// Whether the oracle sees box-projected or raw empirical means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MeanMode {
    #[default]
    Projected,
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Diagnostics {
    /// Evaluate the good event `𝓔_t` for every `t` up to this round.
    pub good_event_window: Option<u64>,
    /// Record a trajectory point every `stride` rounds.
    pub trajectory_stride: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgoConfig {
    pub algorithm: Algorithm,
    pub mode: MeanMode,
    /// Sticky total order over answers (a permutation); ascending when absent.
    pub order: Option<Vec<usize>>,
    /// `D_K` for the S-TaS region and the good-event diagnostic; solved when
    /// absent.
    pub d_k: Option<f64>,
    pub round_cap: u64,
    pub oracle: OracleConfig,
    pub diagnostics: Diagnostics,
}

impl AlgoConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            mode: MeanMode::Projected,
            order: None,
            d_k: None,
            round_cap: DEFAULT_ROUND_CAP,
            oracle: OracleConfig::default(),
            diagnostics: Diagnostics::default(),
        }
    }

    fn needs_dk(&self) -> bool {
        self.algorithm == Algorithm::Stas || self.diagnostics.good_event_window.is_some()
    }

    /// Fills in `D_K` when the configuration needs it. Solving `D_K` sums a
    /// long series, so callers running many replications resolve once.
    pub fn resolved(&self, k: usize) -> Result<Self> {
        let mut c = self.clone();
        if c.d_k.is_none() && c.needs_dk() {
            c.d_k = Some(solve_dk(k)?);
        }
        Ok(c)
    }

    fn validate(&self, k: usize) -> Result<()> {
        if let Some(order) = &self.order {
            let mut seen = vec![false; k];
            if order.len() != k || order.iter().any(|&i| i >= k || std::mem::replace(&mut seen[i], true)) {
                return Err(Error::Domain(format!("order {order:?} is not a permutation of 0..{k}")));
            }
        }
        if let Some(d) = self.d_k {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(Error::Domain(format!("D_K must be finite and nonnegative, got {d}")));
            }
        }
        if self.round_cap == 0 {
            return Err(Error::Domain("round cap must be positive".into()));
        }
        Ok(())
    }

    fn order_or_default(&self, k: usize) -> Vec<usize> {
        self.order.clone().unwrap_or_else(|| (0..k).collect())
    }
}

/// Per-run mutable state. Owned by a single run.
#[derive(Debug, Clone)]
pub struct RunState {
    pub tracker: TrackerState,
    sums: Vec<f64>,
    pub emp_means: Vec<f64>,
    pub proj_means: Vec<f64>,
    /// Run-length encoding of the answers `i_s`: `(first round, answer)`.
    pub answer_segments: Vec<(u64, usize)>,
    pub oracle_retries: u64,
    /// Last witness per answer found by the candidate search.
    warm_witness: Vec<Option<Vec<f64>>>,
    rng: ChaCha8Rng,
}

impl RunState {
    pub fn new(k: usize, rng: ChaCha8Rng) -> Self {
        Self {
            tracker: TrackerState::new(k, false),
            sums: vec![0.0; k],
            emp_means: vec![0.0; k],
            proj_means: vec![0.0; k],
            answer_segments: Vec::new(),
            oracle_retries: 0,
            warm_witness: vec![None; k],
            rng,
        }
    }

    /// Records an observation of `arm`.
    pub fn observe(&mut self, family: &FamilySpec, arm: usize, reward: f64) -> Result<()> {
        self.tracker.record_pull(arm)?;
        self.sums[arm] += reward;
        self.emp_means[arm] = self.sums[arm] / self.tracker.counts()[arm] as f64;
        self.proj_means[arm] = family.bounds().clamp(self.emp_means[arm]);
        Ok(())
    }

    fn pull(&mut self, family: &FamilySpec, true_model: &BanditModel, arm: usize) -> Result<()> {
        let x = family.sample(true_model.means()[arm], &mut self.rng);
        self.observe(family, arm, x)
    }

    fn note_answer(&mut self, answer: usize) {
        if self.answer_segments.last().map(|s| s.1) != Some(answer) {
            self.answer_segments.push((self.tracker.t(), answer));
        }
    }

    fn oracle_means(&self, mode: MeanMode) -> BanditModel {
        let m = match mode {
            MeanMode::Projected => self.proj_means.clone(),
            MeanMode::Raw => self.emp_means.clone(),
        };
        BanditModel::new(m).expect("finite empirical means")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "decision", content = "index", rename_all = "snake_case")]
pub enum Decision {
    Continue(usize),
    Stop(usize),
}

/// Runs an oracle call, retrying once with a tolerance relaxed tenfold when
/// it fails to certify.
fn with_retry<T>(state: &mut RunState, cfg: &OracleConfig, f: impl Fn(&OracleConfig) -> Result<T>) -> Result<T> {
    match f(cfg) {
        Err(Error::Convergence { .. }) => {
            state.oracle_retries += 1;
            f(&cfg.with_tol(10.0 * cfg.tol))
        }
        other => other,
    }
}

fn check_stop(state: &RunState, problem: &ProblemInstance, delta: f64) -> Result<(GlrResult, bool)> {
    let g = glr(problem, state.tracker.counts(), &BanditModel::new(state.emp_means.clone())?)?;
    let stop = should_stop(&g, state.tracker.t(), delta, problem.arms());
    Ok((g, stop))
}

fn track(state: &mut RunState, weights: &[f64]) -> Result<usize> {
    let eps = epsilon_t(state.tracker.arms(), state.tracker.t());
    state.tracker.next_action(weights, eps)
}

/// One TaS round: stop, or track `ω(t) ∈ ω*(μ̃(t))`.
pub fn tas_round(state: &mut RunState, problem: &ProblemInstance, delta: f64, cfg: &AlgoConfig) -> Result<Decision> {
    let (g, stop) = check_stop(state, problem, delta)?;
    if stop {
        return Ok(Decision::Stop(g.argmax_answer));
    }
    let model = state.oracle_means(cfg.mode);
    let sol = with_retry(state, &cfg.oracle, |c| oracle::solve(problem, &model, c))?;
    let (answer, weights) = sol.representative();
    let weights = weights.to_vec();
    state.note_answer(answer);
    Ok(Decision::Continue(track(state, &weights)?))
}

// ---------------------------------------------------------------------------
// Confidence region and candidate answers

/// `C_t = {λ ∈ 𝓜 : Σ_k N_k d(c_k, λ_k) ≤ radius}`, with `c` the empirical
/// means projected on the box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceRegion {
    pub family: FamilySpec,
    pub center: Vec<f64>,
    pub counts: Vec<u64>,
    pub radius: f64,
}

impl ConfidenceRegion {
    /// Region of radius `D_K ln t` around the projected empirical means.
    pub fn new(family: FamilySpec, emp_means: &[f64], counts: &[u64], d_k: f64, t: u64) -> Self {
        Self {
            family,
            center: family.box_project(emp_means),
            counts: counts.to_vec(),
            radius: (d_k * (t as f64).ln()).max(0.0),
        }
    }

    pub fn divergence(&self, lambda: &[f64]) -> f64 {
        self.center
            .iter()
            .zip(lambda)
            .zip(&self.counts)
            .map(|((&c, &l), &n)| if n == 0 { 0.0 } else { n as f64 * self.family.kl(c, l) })
            .sum()
    }

    fn bounds(&self) -> MeanBox {
        self.family.bounds()
    }

    /// Membership in the box and the divergence ball (not the model class).
    pub fn contains(&self, lambda: &[f64]) -> bool {
        let b = self.bounds();
        lambda.iter().all(|&x| b.contains(x)) && self.divergence(lambda) <= self.radius
    }

    /// Furthest point of the segment `from → to` inside the region, `from`
    /// being inside. The ball is convex, so bisection on the segment suffices.
    pub fn clip_segment(&self, from: &[f64], to: &[f64]) -> Vec<f64> {
        let at = |a: f64| -> Vec<f64> { from.iter().zip(to).map(|(f, t)| f + a * (t - f)).collect() };
        if self.contains(to) {
            return to.to_vec();
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.contains(&at(mid)) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        at(lo)
    }

    /// Point of the box closest to the center, in region divergence, among
    /// those where arm `j` leads every other arm by `lead`
    /// (`λ_a ≤ λ_j − lead`). `None` when the box has no such point.
    ///
    /// With `λ_j = x` fixed the best choice is `λ_a = min(c_a, x − lead)`, and
    /// the divergence is convex in `x`.
    pub fn lead_point(&self, j: usize, lead: f64) -> Option<(f64, Vec<f64>)> {
        let b = self.bounds();
        let x_lo = b.lo.max(b.lo + lead);
        if x_lo > b.hi {
            return None;
        }
        let point = |x: f64| -> Vec<f64> {
            (0..self.center.len()).map(|a| if a == j { x } else { self.center[a].min(x - lead) }).collect()
        };
        let x = golden_section_min(|x| self.divergence(&point(x)), x_lo, b.hi, 1e-12 * b.width());
        let p = point(x);
        Some((self.divergence(&p), p))
    }

    /// Extent of the region along coordinate `k` (others free).
    fn coordinate_extent(&self, k: usize) -> (f64, f64) {
        let b = self.bounds();
        let c = self.center[k];
        let n = self.counts[k] as f64;
        let inside = |x: f64| n * self.family.kl(c, x) <= self.radius;
        let edge = |target: f64| {
            if inside(target) {
                return target;
            }
            let (mut lo, mut hi) = (c, target);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if inside(mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        (edge(b.lo), edge(b.hi))
    }
}

/// Candidate answers together with a witness model for each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    /// Increasing answer indices.
    pub answers: Vec<usize>,
    /// `(answer, λ)` with `λ ∈ C_t` and `answer ∈ i_F(λ)`.
    pub witnesses: Vec<(usize, BanditModel)>,
}

/// True when `λ` is in the model class: some correct answer is not in the
/// closure of its own alternative (rules out tied best arms in BAI).
fn in_model_class(problem: &ProblemInstance, lambda: &BanditModel) -> bool {
    match problem.i_star(lambda) {
        Ok(good) => good.iter().any(|&i| !problem.in_alternative_closure(lambda, i)),
        Err(_) => false,
    }
}

/// `D_j(λ) − max_{i≠j} D_i(λ)`; `−∞` outside the model class.
fn answer_margin(problem: &ProblemInstance, lambda: &[f64], j: usize, cfg: &OracleConfig) -> Result<f64> {
    let m = BanditModel::new(lambda.to_vec())?;
    if !in_model_class(problem, &m) {
        return Ok(f64::NEG_INFINITY);
    }
    let sol = oracle::solve(problem, &m, cfg)?;
    let others = (0..sol.d_values.len()).filter(|&i| i != j).map(|i| sol.d_values[i]).fold(0.0, f64::max);
    Ok(sol.d_values[j] - others)
}

fn verify_witness(problem: &ProblemInstance, lambda: &[f64], j: usize, cfg: &OracleConfig) -> Result<bool> {
    let m = BanditModel::new(lambda.to_vec())?;
    Ok(in_model_class(problem, &m) && oracle::solve(problem, &m, cfg)?.i_f.contains(&j))
}

/// Multi-start coordinate ascent on the margin of `j` over the region, then
/// a grid for two arms. Returns a verified witness or `None`.
fn search_witness(
    problem: &ProblemInstance,
    region: &ConfidenceRegion,
    j: usize,
    cfg: &OracleConfig,
    warm: Option<&[f64]>,
    rng: &mut ChaCha8Rng,
) -> Result<Option<Vec<f64>>> {
    let k = problem.arms();
    let b = region.bounds();
    let accept = -cfg.tol_i_f;
    let off = problem.offset();

    // `j ∈ i_F(λ)` needs `λ` outside the closure of `¬j`, i.e. `λ_a ≤ λ_j + off`
    // for every `a`. When the region misses that set there is nothing to find.
    let slack = 1e-12 * region.radius.max(1.0);
    match region.lead_point(j, -off) {
        Some((cost, _)) if cost <= region.radius + slack => {}
        _ => return Ok(None),
    }
    // Largest lead of `j` the region allows.
    let (mut lo, mut hi) = (-off, b.width());
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        match region.lead_point(j, mid) {
            Some((cost, _)) if cost <= region.radius => lo = mid,
            _ => hi = mid,
        }
    }
    let leader = region.lead_point(j, lo).map(|(_, p)| p).filter(|p| region.contains(p));

    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(SEARCH_RESTARTS + 2);
    if let Some(w) = warm {
        if region.contains(w) {
            starts.push(w.to_vec());
        }
    }
    starts.extend(leader);
    starts.push(region.center.clone());
    // The corner most favourable to `j` first, then the others.
    let favourable: Vec<f64> = (0..k).map(|i| if i == j { b.hi } else { b.lo }).collect();
    starts.push(region.clip_segment(&region.center, &favourable));
    let corners = if k <= 10 { 1usize << k } else { 0 };
    for mask in 0..corners {
        if starts.len() >= SEARCH_RESTARTS / 2 {
            break;
        }
        let c: Vec<f64> = (0..k).map(|i| if mask >> i & 1 == 1 { b.hi } else { b.lo }).collect();
        if c != favourable {
            starts.push(region.clip_segment(&region.center, &c));
        }
    }
    while starts.len() < SEARCH_RESTARTS {
        let p: Vec<f64> = (0..k).map(|_| rng.random_range(b.lo..=b.hi)).collect();
        starts.push(region.clip_segment(&region.center, &p));
    }

    for start in starts {
        let mut cur = start;
        let mut m = answer_margin(problem, &cur, j, cfg)?;
        if m >= accept && verify_witness(problem, &cur, j, cfg)? {
            return Ok(Some(cur));
        }
        let mut step = 0.25 * b.width();
        for _ in 0..SEARCH_ITERATIONS {
            let mut improved = false;
            for i in 0..k {
                for dir in [1.0, -1.0] {
                    let mut cand = cur.clone();
                    cand[i] = b.clamp(cur[i] + dir * step);
                    let cand = region.clip_segment(&cur, &cand);
                    let mc = answer_margin(problem, &cand, j, cfg)?;
                    if mc > m {
                        cur = cand;
                        m = mc;
                        improved = true;
                        if m >= accept && verify_witness(problem, &cur, j, cfg)? {
                            return Ok(Some(cur));
                        }
                    }
                }
            }
            if !improved {
                step *= 0.5;
                if step < SEARCH_STEP_FLOOR * b.width() {
                    break;
                }
            }
        }
    }

    if k == 2 {
        let (x_lo, x_hi) = region.coordinate_extent(0);
        let (y_lo, y_hi) = region.coordinate_extent(1);
        let mut step = TWO_ARM_GRID_STEP;
        while ((x_hi - x_lo) / step + 1.0) * ((y_hi - y_lo) / step + 1.0) > TWO_ARM_GRID_NODES {
            step *= 2.0;
        }
        let nx = ((x_hi - x_lo) / step).floor() as usize;
        let ny = ((y_hi - y_lo) / step).floor() as usize;
        for a in 0..=nx {
            for c in 0..=ny {
                let p = [x_lo + a as f64 * step, y_lo + c as f64 * step];
                if region.contains(&p) && answer_margin(problem, &p, j, cfg)? >= accept && verify_witness(problem, &p, j, cfg)? {
                    return Ok(Some(p.to_vec()));
                }
            }
        }
    }
    Ok(None)
}

fn i_f_at_center(problem: &ProblemInstance, region: &ConfidenceRegion, cfg: &OracleConfig) -> Result<Vec<usize>> {
    oracle::furthest_answers(problem, &BanditModel::new(region.center.clone())?, cfg)
}

/// Under-approximation of `𝓘_t = ∪_{λ ∈ C_t} i_F(λ)`: `i_F` at the center
/// plus every answer for which the search finds a verified witness.
pub fn candidate_answers(problem: &ProblemInstance, region: &ConfidenceRegion, cfg: &OracleConfig, seed: u64) -> Result<CandidateSet> {
    if !region.radius.is_finite() {
        return Err(Error::Domain("region radius must be finite".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = i_f_at_center(problem, region, cfg)?;
    let mut answers = base.clone();
    let mut witnesses: Vec<(usize, BanditModel)> =
        base.iter().map(|&i| (i, BanditModel::new(region.center.clone()).expect("finite"))).collect();
    for j in (0..problem.num_answers()).filter(|j| !base.contains(j)) {
        if let Some(w) = search_witness(problem, region, j, cfg, None, &mut rng)? {
            answers.push(j);
            witnesses.push((j, BanditModel::new(w)?));
        }
    }
    answers.sort_unstable();
    witnesses.sort_by_key(|w| w.0);
    Ok(CandidateSet { answers, witnesses })
}

/// Order-minimal candidate.
pub fn sticky_select(candidates: &[usize], order: &[usize]) -> Result<usize> {
    order
        .iter()
        .copied()
        .find(|i| candidates.contains(i))
        .ok_or_else(|| Error::Domain("empty candidate set".into()))
}

/// Sticky answer for the round without building all of `𝓘_t`: answers that
/// precede the order-minimal element of `i_F(center)` are searched in order
/// and the first one with a witness wins. This equals
/// `sticky_select(candidate_answers(..))`.
fn sticky_answer(state: &mut RunState, problem: &ProblemInstance, region: &ConfidenceRegion, order: &[usize], cfg: &OracleConfig) -> Result<usize> {
    let base = with_retry(state, cfg, |c| i_f_at_center(problem, region, c))?;
    let fallback = sticky_select(&base, order)?;
    for &j in order.iter().take_while(|&&j| j != fallback) {
        let warm = state.warm_witness[j].take();
        let found = search_witness(problem, region, j, cfg, warm.as_deref(), &mut state.rng)?;
        if let Some(w) = found {
            state.warm_witness[j] = Some(w);
            return Ok(j);
        }
    }
    Ok(fallback)
}

/// One S-TaS round: stop, or pick `i_t` and track `ω(t) ∈ ω*(μ̃(t), ¬i_t)`.
pub fn stas_round(state: &mut RunState, problem: &ProblemInstance, delta: f64, d_k: f64, order: &[usize], cfg: &AlgoConfig) -> Result<Decision> {
    let (g, stop) = check_stop(state, problem, delta)?;
    if stop {
        return Ok(Decision::Stop(g.argmax_answer));
    }
    let region = ConfidenceRegion::new(*problem.family(), &state.emp_means, state.tracker.counts(), d_k, state.tracker.t());
    let answer = sticky_answer(state, problem, &region, order, &cfg.oracle)?;
    state.note_answer(answer);
    let model = state.oracle_means(cfg.mode);
    let sol = with_retry(state, &cfg.oracle, |c| oracle::d_value(problem, &model, answer, c))?;
    Ok(Decision::Continue(track(state, &sol.weights)?))
}

// ---------------------------------------------------------------------------
// Full runs

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "message", rename_all = "snake_case")]
pub enum RunStatus {
    Stopped,
    /// The round cap was reached before stopping.
    Capped,
    /// An oracle call failed even after a relaxed retry.
    Aborted(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: u64,
    pub counts: Vec<u64>,
    pub statistic: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub stream: u64,
    pub algorithm: Algorithm,
    pub mode: MeanMode,
    pub delta: f64,
    pub status: RunStatus,
    /// `τ_δ`, or the round at which the run was capped or aborted.
    pub stopping_time: u64,
    /// GLR argmax at the last round.
    pub recommendation: usize,
    /// Recommendation is in `i*(μ)`.
    pub correct: bool,
    pub counts: Vec<u64>,
    pub final_statistic: f64,
    /// Run-length encoded answers `(first round, answer)` chosen by the
    /// sampling rule.
    pub answer_segments: Vec<(u64, usize)>,
    pub oracle_retries: u64,
    /// `𝓔_t` for `t = 1..=min(window, τ)`, when requested.
    pub good_event: Option<Vec<bool>>,
    pub trajectory: Option<Vec<TrajectoryPoint>>,
}

impl RunRecord {
    pub fn stopped(&self) -> bool {
        self.status == RunStatus::Stopped
    }

    pub fn answer_switches(&self) -> usize {
        self.answer_segments.len().saturating_sub(1)
    }

    /// The sampling rule used a single answer over the last half of the run.
    pub fn final_half_constant(&self) -> bool {
        let half = self.stopping_time / 2;
        self.answer_segments.iter().filter(|s| s.0 > half).count() == 0
    }
}

/// Good-event flags from per-round concentration checks `ok[s−1]`:
/// `𝓔_t` holds when every `s ∈ [⌈√t⌉, t]` is fine.
fn good_event_flags(ok: &[bool]) -> Vec<bool> {
    (1..=ok.len())
        .map(|t| {
            let from = (t as f64).sqrt().ceil() as usize;
            ok[from.max(1) - 1..t].iter().all(|&b| b)
        })
        .collect()
}

/// Checks the preconditions of [`run`] without sampling.
pub fn validate_inputs(problem: &ProblemInstance, true_model: &BanditModel, cfg: &AlgoConfig, delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!("delta must be in (0, 1), got {delta}")));
    }
    if true_model.len() != problem.arms() {
        return Err(Error::Domain(format!("{} means for {} arms", true_model.len(), problem.arms())));
    }
    cfg.validate(problem.arms())?;
    problem.i_star(true_model)?;
    let b = problem.family().bounds();
    if true_model.means().iter().any(|&m| !b.contains(m)) {
        return Err(Error::Domain(format!("true means {:?} leave the box [{}, {}]", true_model.means(), b.lo, b.hi)));
    }
    if !in_model_class(problem, true_model) {
        return Err(Error::Degenerate("true model is outside the model class".into()));
    }
    Ok(())
}

/// Runs one agent against a simulated bandit with a fresh `ChaCha8` stream
/// seeded by `seed`.
pub fn run(problem: &ProblemInstance, true_model: &BanditModel, cfg: &AlgoConfig, delta: f64, seed: u64) -> Result<RunRecord> {
    run_with_stream(problem, true_model, cfg, delta, seed, 0)
}

/// As [`run`], on stream `stream` of the generator seeded with `seed`.
pub fn run_with_stream(
    problem: &ProblemInstance,
    true_model: &BanditModel,
    cfg: &AlgoConfig,
    delta: f64,
    seed: u64,
    stream: u64,
) -> Result<RunRecord> {
    let k = problem.arms();
    validate_inputs(problem, true_model, cfg, delta)?;
    let good = problem.i_star(true_model)?;
    let cfg = cfg.resolved(k)?;
    let order = cfg.order_or_default(k);
    let family = *problem.family();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut state = RunState::new(k, rng);

    let window = cfg.diagnostics.good_event_window;
    let d_k = cfg.d_k.unwrap_or(0.0);
    let mut concentration: Vec<bool> = Vec::new();
    let mut check_concentration = |state: &RunState| {
        if let Some(w) = window {
            let s = state.tracker.t();
            if s <= w {
                let sum: f64 = (0..k)
                    .filter(|&i| state.tracker.counts()[i] > 0)
                    .map(|i| state.tracker.counts()[i] as f64 * family.kl(state.emp_means[i], true_model.means()[i]))
                    .sum();
                concentration.push(sum <= d_k * (s as f64).ln());
            }
        }
    };

    for arm in 0..k {
        state.pull(&family, true_model, arm)?;
        check_concentration(&state);
    }

    let mut trajectory = cfg.diagnostics.trajectory_stride.map(|_| Vec::new());
    let status = loop {
        let t = state.tracker.t();
        if t >= cfg.round_cap {
            break RunStatus::Capped;
        }
        if let (Some(stride), Some(traj)) = (cfg.diagnostics.trajectory_stride, trajectory.as_mut()) {
            if stride > 0 && t % stride == 0 {
                let (g, _) = check_stop(&state, problem, delta)?;
                traj.push(TrajectoryPoint {
                    t,
                    counts: state.tracker.counts().to_vec(),
                    statistic: g.statistic,
                    threshold: crate::stopping::beta(t as f64, delta, k),
                });
            }
        }
        let decision = match cfg.algorithm {
            Algorithm::Tas => tas_round(&mut state, problem, delta, &cfg),
            Algorithm::Stas => stas_round(&mut state, problem, delta, d_k, &order, &cfg),
        };
        match decision {
            Ok(Decision::Stop(_)) => break RunStatus::Stopped,
            Ok(Decision::Continue(arm)) => {
                state.pull(&family, true_model, arm)?;
                check_concentration(&state);
            }
            Err(e @ Error::Convergence { .. }) => break RunStatus::Aborted(e.to_string()),
            Err(e) => return Err(e),
        }
    };

    let (g, _) = check_stop(&state, problem, delta)?;
    Ok(RunRecord {
        seed,
        stream,
        algorithm: cfg.algorithm,
        mode: cfg.mode,
        delta,
        status,
        stopping_time: state.tracker.t(),
        recommendation: g.argmax_answer,
        correct: good.contains(&g.argmax_answer),
        counts: state.tracker.counts().to_vec(),
        final_statistic: g.statistic,
        answer_segments: state.answer_segments,
        oracle_retries: state.oracle_retries,
        good_event: window.map(|_| good_event_flags(&concentration)),
        trajectory,
    })
}

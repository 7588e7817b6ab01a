//! GLR stopping rule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::{answer_from_statistic, BanditModel, ProblemInstance};

/// Threshold `β(t, δ) = ln(1/δ) + K ln(4 ln(1/δ) + 1) + 6K ln(ln t + 3)`.
///
/// `t` is real-valued so bound computations can go beyond integer range.
pub fn beta(t: f64, delta: f64, k: usize) -> f64 {
    let l = (1.0 / delta).ln();
    let k = k as f64;
    l + k * (4.0 * l + 1.0).ln() + 6.0 * k * (t.ln() + 3.0).ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlrResult {
    /// `max_i inf_{λ ∈ ¬i} Σ_k N_k d(μ̂_k, λ_k)`.
    pub statistic: f64,
    pub per_answer: Vec<f64>,
    /// Lowest-index answer attaining `statistic`.
    pub argmax_answer: usize,
    /// Alternative attaining the infimum for `argmax_answer`.
    pub witness: BanditModel,
}

/// GLR statistic at the given counts and empirical means.
pub fn glr(problem: &ProblemInstance, counts: &[u64], emp_means: &BanditModel) -> Result<GlrResult> {
    if counts.len() != problem.arms() {
        return Err(Error::Domain(format!("{} counts for {} arms", counts.len(), problem.arms())));
    }
    if counts.iter().any(|&c| c == 0) {
        return Err(Error::Precondition("every arm needs at least one pull".into()));
    }
    let w: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let mut per_answer = Vec::with_capacity(problem.num_answers());
    let mut witnesses = Vec::with_capacity(problem.num_answers());
    for i in 0..problem.num_answers() {
        let br = problem.best_response(&w, emp_means, i)?;
        per_answer.push(br.value);
        witnesses.push(br.witness);
    }
    let argmax_answer = answer_from_statistic(&per_answer).expect("at least two answers");
    Ok(GlrResult {
        statistic: per_answer[argmax_answer],
        witness: witnesses.swap_remove(argmax_answer),
        per_answer,
        argmax_answer,
    })
}

pub fn should_stop(glr: &GlrResult, t: u64, delta: f64, k: usize) -> bool {
    glr.statistic >= beta(t as f64, delta, k)
}

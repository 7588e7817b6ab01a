//! Answer structures for best-arm identification (BAI) and ε-best-arm
//! identification (ε-BAI).
//!
//! Both problems use the answer space `{0, …, K−1}`. For an answer `i` the
//! closure of its alternative set is a finite union over competitors `a ≠ i`
//! of the half-spaces `λ_a ≥ λ_i + offset`, where the offset is 0 for BAI and
//! ε for ε-BAI. The infimum of a weighted divergence sum over the alternative
//! therefore reduces to a minimum over competitors of a two-coordinate
//! problem, with every other coordinate left at the model mean.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exp_family::FamilySpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemKind {
    /// Identify the unique arm with the largest mean.
    Bai,
    /// Identify any arm whose mean is within `epsilon` of the largest.
    EpsBai { epsilon: f64 },
}

/// A vector of arm means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BanditModel(Vec<f64>);

impl BanditModel {
    pub fn new(means: Vec<f64>) -> Result<Self> {
        if means.is_empty() {
            return Err(Error::Domain("a bandit model needs at least one arm".into()));
        }
        if let Some(m) = means.iter().find(|m| !m.is_finite()) {
            return Err(Error::Domain(format!("arm mean {m} is not finite")));
        }
        Ok(Self(means))
    }

    pub fn means(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl From<BanditModel> for Vec<f64> {
    fn from(m: BanditModel) -> Self {
        m.0
    }
}

/// The closest alternative to a model for a fixed weight vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestResponse {
    /// `inf_{λ ∈ ¬i} Σ_k w_k d(μ_k, λ_k)`, in nats.
    pub value: f64,
    /// A model in the closure of `¬i` attaining the value.
    pub witness: BanditModel,
    /// `(answer, competitor)` realizing the binding constraint.
    pub pair: (usize, usize),
    /// Set when all weights vanish and the value carries no information.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    family: FamilySpec,
    arms: usize,
    kind: ProblemKind,
}

impl ProblemInstance {
    pub fn new(family: FamilySpec, arms: usize, kind: ProblemKind) -> Result<Self> {
        if arms < 2 {
            return Err(Error::Domain(format!("need at least two arms, got {arms}")));
        }
        if let ProblemKind::EpsBai { epsilon } = kind {
            if !(epsilon > 0.0 && epsilon.is_finite()) {
                return Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")));
            }
            let (lo, hi) = family.theta();
            if hi - lo <= epsilon {
                return Err(Error::Domain(format!(
                    "epsilon {epsilon} leaves no alternative inside the parameter space"
                )));
            }
        }
        Ok(Self { family, arms, kind })
    }

    pub fn family(&self) -> &FamilySpec {
        &self.family
    }

    pub fn arms(&self) -> usize {
        self.arms
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn num_answers(&self) -> usize {
        self.arms
    }

    /// Shift between an answer's mean and a competitor's in the closure of
    /// the alternative.
    pub fn offset(&self) -> f64 {
        match self.kind {
            ProblemKind::Bai => 0.0,
            ProblemKind::EpsBai { epsilon } => epsilon,
        }
    }

    fn check_model(&self, model: &BanditModel) -> Result<()> {
        if model.len() != self.arms {
            return Err(Error::Domain(format!(
                "model has {} arms, problem has {}",
                model.len(),
                self.arms
            )));
        }
        if let Some(m) = model.means().iter().find(|&&m| !self.family.in_closed_domain(m)) {
            return Err(Error::Domain(format!("mean {m} is outside the parameter space")));
        }
        Ok(())
    }

    fn check_answer(&self, answer: usize) -> Result<()> {
        if answer >= self.arms {
            return Err(Error::Domain(format!("answer {answer} out of range 0..{}", self.arms)));
        }
        Ok(())
    }

    /// Set of correct answers, in increasing order.
    pub fn i_star(&self, model: &BanditModel) -> Result<Vec<usize>> {
        self.check_model(model)?;
        let means = model.means();
        let max = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        match self.kind {
            ProblemKind::Bai => {
                let best: Vec<usize> = (0..self.arms).filter(|&k| means[k] == max).collect();
                if best.len() > 1 {
                    return Err(Error::Degenerate(format!("best arm is not unique: {best:?}")));
                }
                Ok(best)
            }
            ProblemKind::EpsBai { epsilon } => {
                Ok((0..self.arms).filter(|&k| means[k] >= max - epsilon).collect())
            }
        }
    }

    /// True when the model lies in the closure of the alternative to `answer`,
    /// i.e. when `answer` is not a strictly correct answer for it.
    pub fn in_alternative_closure(&self, model: &BanditModel, answer: usize) -> bool {
        let means = model.means();
        let off = self.offset();
        (0..self.arms).any(|a| a != answer && means[a] >= means[answer] + off)
    }

    /// Weighted best response: the infimum over the alternative to `answer`
    /// of `Σ_k w_k d(μ_k, λ_k)`, with an attaining witness.
    pub fn best_response(&self, weights: &[f64], model: &BanditModel, answer: usize) -> Result<BestResponse> {
        self.check_model(model)?;
        self.check_answer(answer)?;
        if weights.len() != self.arms {
            return Err(Error::Domain(format!(
                "weight vector has {} entries, problem has {} arms",
                weights.len(),
                self.arms
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::Domain(format!("weight {w} is not finite and nonnegative")));
        }
        let means = model.means();
        if weights.iter().all(|&w| w == 0.0) {
            return Ok(BestResponse {
                value: 0.0,
                witness: model.clone(),
                pair: (answer, answer),
                degenerate: true,
            });
        }

        let i = answer;
        let off = self.offset();
        let mut best: Option<(f64, usize, f64)> = None;
        for a in (0..self.arms).filter(|&a| a != i) {
            if means[a] >= means[i] + off {
                // The model itself violates the answer through competitor `a`.
                return Ok(BestResponse {
                    value: 0.0,
                    witness: model.clone(),
                    pair: (i, a),
                    degenerate: false,
                });
            }
            let (value, x) = if weights[i] + weights[a] == 0.0 {
                (0.0, means[i])
            } else {
                self.family.weighted_kl_min(weights[i], means[i], weights[a], means[a], off)?
            };
            if best.map_or(true, |(v, _, _)| value < v) {
                best = Some((value, a, x));
            }
        }
        let (value, a, x) = best.expect("at least one competitor");
        let mut witness = means.to_vec();
        witness[i] = x;
        witness[a] = x + off;
        Ok(BestResponse {
            value,
            witness: BanditModel(witness),
            pair: (i, a),
            degenerate: false,
        })
    }
}

/// Answer attaining the largest statistic; ties go to the lowest index.
/// Returns `None` for an empty slice.
pub fn answer_from_statistic(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        if best.map_or(true, |(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

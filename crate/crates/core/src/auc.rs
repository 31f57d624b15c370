//! Class-conditional decomposition, Mann–Whitney AUC with ties, implied AUC
//! of auto-calibrated discrete scores and the adjusted distribution function.

use serde::Serialize;

use crate::dist::{mean_under, DiscreteScoreDist, PosteriorCurve};
use crate::error::{RecalError, Result};

/// Score laws given `Y = 1` and `Y = 0`, with the class-1 weight that mixes
/// them back into the unconditional law.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassConditionals {
    pub dist1: DiscreteScoreDist,
    pub dist0: DiscreteScoreDist,
    pub prior: f64,
}

impl ClassConditionals {
    pub fn support(&self) -> &[f64] {
        self.dist1.support()
    }
}

/// Bayes decomposition of `dist` under the posterior `curve`.
pub fn class_conditionals(
    dist: &DiscreteScoreDist,
    curve: &PosteriorCurve,
) -> Result<ClassConditionals> {
    let mean = mean_under(dist, curve)?;
    if !(mean > 0.0 && mean < 1.0) {
        return Err(RecalError::DegenerateClass { mean });
    }
    let support = dist.support().to_vec();
    let (w1, w0): (Vec<f64>, Vec<f64>) = dist
        .probs()
        .iter()
        .zip(curve.values())
        .map(|(p, eta)| (p * eta / mean, p * (1.0 - eta) / (1.0 - mean)))
        .unzip();
    Ok(ClassConditionals {
        dist1: DiscreteScoreDist::from_weights(support.clone(), w1)?,
        dist0: DiscreteScoreDist::from_weights(support, w0)?,
        prior: mean,
    })
}

/// `P[S1 > S0] + P[S1 = S0] / 2` by exact double summation over the
/// product of the two class-conditional laws.
pub fn mann_whitney_auc(cc: &ClassConditionals) -> f64 {
    let s = cc.dist1.support();
    let mut auc = 0.0;
    for (i, p1) in cc.dist1.probs().iter().enumerate() {
        for (j, p0) in cc.dist0.probs().iter().enumerate() {
            if s[i] > s[j] {
                auc += p1 * p0;
            } else if s[i] == s[j] {
                auc += 0.5 * p1 * p0;
            }
        }
    }
    auc
}

/// Distinct values of a score, sorted ascending, with the index map from
/// each original point to its level.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreLevels {
    values: Vec<f64>,
    level_of: Vec<usize>,
}

impl ScoreLevels {
    pub fn new(scores: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
        let mut values: Vec<f64> = Vec::with_capacity(scores.len());
        let mut level_of = vec![0; scores.len()];
        for idx in order {
            let v = scores[idx];
            if values.last() != Some(&v) {
                values.push(v);
            }
            level_of[idx] = values.len() - 1;
        }
        Self { values, level_of }
    }

    /// Sorted distinct score values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn level_of(&self) -> &[usize] {
        &self.level_of
    }

    pub fn num_levels(&self) -> usize {
        self.values.len()
    }

    /// Sums per-point masses into per-level masses.
    pub fn aggregate(&self, masses: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.values.len()];
        for (&lvl, m) in self.level_of.iter().zip(masses) {
            out[lvl] += m;
        }
        out
    }

    /// Expands per-level values back onto the original points.
    pub fn expand(&self, per_level: &[f64]) -> Vec<f64> {
        self.level_of.iter().map(|&l| per_level[l]).collect()
    }
}

/// Implied AUC of the auto-calibrated score `S = eta(X)` under `dist`.
///
/// Uses the closed form for discrete scores, with the self-tie term of the
/// lowest score level included so a one-point score yields 1/2. Equal
/// posterior values are merged before summation.
pub fn implied_auc(dist: &DiscreteScoreDist, curve: &PosteriorCurve) -> Result<f64> {
    let mean = mean_under(dist, curve)?;
    if !(mean > 0.0 && mean < 1.0) {
        return Err(RecalError::DegenerateClass { mean });
    }
    let levels = ScoreLevels::new(curve.values());
    if levels.num_levels() == 1 {
        return Ok(0.5);
    }
    let probs = levels.aggregate(dist.probs());
    let mut below_neg = 0.0;
    let mut num = 0.0;
    for (&s, &pi) in levels.values().iter().zip(&probs) {
        num += pi * s * (0.5 * pi * (1.0 - s) + below_neg);
        below_neg += pi * (1.0 - s);
    }
    Ok(num / (mean * (1.0 - mean)))
}

/// Mid-point distribution function `G*(s_i) = G(s_i) - pi_i / 2`.
pub fn adjusted_cdf(dist: &DiscreteScoreDist) -> Vec<f64> {
    adjusted_cdf_of(dist.probs())
}

pub(crate) fn adjusted_cdf_of(probs: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    probs
        .iter()
        .map(|p| {
            acc += p;
            acc - 0.5 * p
        })
        .collect()
}

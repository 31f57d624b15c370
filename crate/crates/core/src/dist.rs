//! Discrete score distributions, posterior curves and the source/target
//! models built on them.

use serde::Serialize;

use crate::error::{RecalError, Result};
use crate::quadrature::GaussHermite;
use crate::special::{norm_cdf, norm_quantile};

/// Tolerance on the total mass of a probability vector.
pub const MASS_TOL: f64 = 1e-12;
/// Tolerance on `p = E_P[eta_P]` when a source prior is supplied explicitly.
pub const PRIOR_TOL: f64 = 1e-10;
/// Default number of Gauss–Hermite nodes for the Vasicek mixture.
pub const DEFAULT_QUAD_NODES: usize = 128;

fn check_support(support: &[f64]) -> Result<()> {
    if support.is_empty() {
        return Err(RecalError::InvalidDistribution("support is empty".into()));
    }
    if let Some(bad) = support.iter().find(|s| !s.is_finite()) {
        return Err(RecalError::InvalidDistribution(format!(
            "support value {bad} is not finite"
        )));
    }
    if let Some(i) = support.windows(2).position(|w| w[0] >= w[1]) {
        return Err(RecalError::InvalidDistribution(format!(
            "support not strictly increasing at index {}",
            i + 1
        )));
    }
    Ok(())
}

/// Probability mass over an ordered finite support.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteScoreDist {
    support: Vec<f64>,
    probs: Vec<f64>,
}

impl DiscreteScoreDist {
    /// Validating constructor: the probabilities must already sum to one.
    pub fn new(support: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        check_support(&support)?;
        if support.len() != probs.len() {
            return Err(RecalError::Structural(format!(
                "support has {} points but {} probabilities were given",
                support.len(),
                probs.len()
            )));
        }
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(RecalError::InvalidDistribution(format!(
                "probability {p} at index {i} is negative or not finite"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(RecalError::InvalidDistribution(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self { support, probs })
    }

    /// Normalizes non-negative weights into a distribution.
    pub fn from_weights(support: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(RecalError::InvalidDistribution(format!(
                "weight {w} is negative or not finite"
            )));
        }
        let total: f64 = weights.iter().sum();
        if total.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(RecalError::InvalidDistribution(
                "weights have zero total mass".into(),
            ));
        }
        Self::new(support, weights.into_iter().map(|w| w / total).collect())
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// Distribution function `G(s_i)` at each support point.
    pub fn cdf(&self) -> Vec<f64> {
        self.probs
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p;
                Some(*acc)
            })
            .collect()
    }

    pub fn same_support(&self, other: &[f64]) -> bool {
        self.support.as_slice() == other
    }

    pub(crate) fn ensure_support(&self, other: &[f64], what: &str) -> Result<()> {
        if self.same_support(other) {
            Ok(())
        } else {
            Err(RecalError::Structural(format!(
                "{what}: supports differ"
            )))
        }
    }
}

/// Posterior probabilities `eta(s_i)` attached to a support.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosteriorCurve {
    support: Vec<f64>,
    values: Vec<f64>,
}

impl PosteriorCurve {
    pub fn new(support: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_support(&support)?;
        if support.len() != values.len() {
            return Err(RecalError::Structural(format!(
                "support has {} points but the curve has {} values",
                support.len(),
                values.len()
            )));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(RecalError::InvalidDistribution(format!(
                "posterior value {v} at index {i} outside [0, 1]"
            )));
        }
        Ok(Self { support, values })
    }

    pub fn constant(support: Vec<f64>, value: f64) -> Result<Self> {
        let n = support.len();
        Self::new(support, vec![value; n])
    }

    pub fn support(&self) -> &[f64] {
        &self.support
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// True when every value lies strictly inside (0, 1).
    pub fn is_interior(&self) -> bool {
        self.values.iter().all(|&v| v > 0.0 && v < 1.0)
    }

    pub(crate) fn ensure_interior(&self, what: &str) -> Result<()> {
        match self.values.iter().position(|&v| !(v > 0.0 && v < 1.0)) {
            None => Ok(()),
            Some(i) => Err(RecalError::Domain(format!(
                "{what}: posterior value {} at index {i} must lie strictly inside (0, 1)",
                self.values[i]
            ))),
        }
    }
}

/// `sum_i pi_i * eta(s_i)`.
pub fn mean_under(dist: &DiscreteScoreDist, curve: &PosteriorCurve) -> Result<f64> {
    dist.ensure_support(curve.support(), "mean_under")?;
    Ok(dist
        .probs
        .iter()
        .zip(curve.values())
        .map(|(p, v)| p * v)
        .sum())
}

/// Source feature distribution with its posterior curve and prior.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SourceModel {
    feature_dist: DiscreteScoreDist,
    posterior: PosteriorCurve,
    prior: f64,
}

impl SourceModel {
    /// Builds the model with the prior implied by the posterior curve.
    pub fn new(feature_dist: DiscreteScoreDist, posterior: PosteriorCurve) -> Result<Self> {
        let prior = mean_under(&feature_dist, &posterior)?;
        Self::with_prior(feature_dist, posterior, prior)
    }

    /// Builds the model from an explicitly stated prior, which must agree
    /// with the mean of the posterior curve.
    pub fn with_prior(
        feature_dist: DiscreteScoreDist,
        posterior: PosteriorCurve,
        prior: f64,
    ) -> Result<Self> {
        if !(prior > 0.0 && prior < 1.0) {
            return Err(RecalError::Domain(format!(
                "source prior {prior} must lie in (0, 1)"
            )));
        }
        let mean = mean_under(&feature_dist, &posterior)?;
        if (mean - prior).abs() > PRIOR_TOL {
            return Err(RecalError::InvalidDistribution(format!(
                "source prior {prior} differs from the posterior mean {mean}"
            )));
        }
        Ok(Self {
            feature_dist,
            posterior,
            prior,
        })
    }

    /// Mixes class-conditional score laws with class-1 weight `prior`; the
    /// posterior follows from Bayes' rule pointwise.
    pub fn from_class_conditionals(
        class0: &DiscreteScoreDist,
        class1: &DiscreteScoreDist,
        prior: f64,
    ) -> Result<Self> {
        if !(prior > 0.0 && prior < 1.0) {
            return Err(RecalError::Domain(format!(
                "source prior {prior} must lie in (0, 1)"
            )));
        }
        class0.ensure_support(class1.support(), "class-conditional distributions")?;
        let mixed: Vec<f64> = class0
            .probs()
            .iter()
            .zip(class1.probs())
            .map(|(f0, f1)| prior * f1 + (1.0 - prior) * f0)
            .collect();
        let eta: Vec<f64> = class1
            .probs()
            .iter()
            .zip(&mixed)
            .map(|(f1, m)| if *m > 0.0 { prior * f1 / m } else { prior })
            .collect();
        let support = class0.support().to_vec();
        let feature_dist = DiscreteScoreDist::from_weights(support.clone(), mixed)?;
        let posterior = PosteriorCurve::new(support, eta)?;
        Self::new(feature_dist, posterior)
    }

    pub fn feature_dist(&self) -> &DiscreteScoreDist {
        &self.feature_dist
    }

    pub fn posterior(&self) -> &PosteriorCurve {
        &self.posterior
    }

    pub fn prior(&self) -> f64 {
        self.prior
    }

    pub fn support(&self) -> &[f64] {
        self.feature_dist.support()
    }
}

/// Target feature distribution and target prior; labels are unobserved.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetSpec {
    feature_dist: DiscreteScoreDist,
    prior: f64,
}

impl TargetSpec {
    pub fn new(feature_dist: DiscreteScoreDist, prior: f64) -> Result<Self> {
        if !(prior > 0.0 && prior < 1.0) {
            return Err(RecalError::Domain(format!(
                "target prior {prior} must lie in (0, 1)"
            )));
        }
        Ok(Self {
            feature_dist,
            prior,
        })
    }

    /// Like [`TargetSpec::new`] but also checks the support against a source.
    pub fn for_source(source: &SourceModel, feature_dist: DiscreteScoreDist, prior: f64) -> Result<Self> {
        feature_dist.ensure_support(source.support(), "target feature distribution")?;
        Self::new(feature_dist, prior)
    }

    pub fn feature_dist(&self) -> &DiscreteScoreDist {
        &self.feature_dist
    }

    pub fn prior(&self) -> f64 {
        self.prior
    }

    pub fn support(&self) -> &[f64] {
        self.feature_dist.support()
    }
}

fn binomial_pmf_row(trials: u32, success_prob: f64) -> Vec<f64> {
    // Multiplicative recurrence from the larger of the two endpoint terms
    // keeps the row free of overflow for moderate trial counts.
    let n = trials as usize;
    let q = 1.0 - success_prob;
    let mut row = vec![0.0; n + 1];
    if success_prob <= 0.5 {
        row[0] = q.powi(trials as i32);
        let ratio = success_prob / q;
        for k in 1..=n {
            row[k] = row[k - 1] * ratio * ((n - k + 1) as f64) / (k as f64);
        }
    } else {
        row[n] = success_prob.powi(trials as i32);
        let ratio = q / success_prob;
        for k in (0..n).rev() {
            row[k] = row[k + 1] * ratio * ((k + 1) as f64) / ((n - k) as f64);
        }
    }
    row
}

fn resolve_support(trials: u32, support_map: Option<Vec<f64>>) -> Result<Vec<f64>> {
    match support_map {
        None => Ok((0..=trials).map(f64::from).collect()),
        Some(labels) if labels.len() == trials as usize + 1 => Ok(labels),
        Some(labels) => Err(RecalError::Structural(format!(
            "support map has {} labels, expected {}",
            labels.len(),
            trials + 1
        ))),
    }
}

/// Binomial pmf over `k = 0..=trials`, labelled by `support_map` when given
/// and by `k` itself otherwise.
pub fn binomial_dist(
    trials: u32,
    success_prob: f64,
    support_map: Option<Vec<f64>>,
) -> Result<DiscreteScoreDist> {
    if trials == 0 {
        return Err(RecalError::Domain("binomial needs at least one trial".into()));
    }
    if !(success_prob > 0.0 && success_prob < 1.0) {
        return Err(RecalError::Domain(format!(
            "binomial success probability {success_prob} must lie in (0, 1)"
        )));
    }
    let support = resolve_support(trials, support_map)?;
    let row = binomial_pmf_row(trials, success_prob);
    DiscreteScoreDist::from_weights(support, row)
}

/// One-factor Vasicek transform of a standard normal factor `z`.
pub fn vasicek_success_prob(mean: f64, correlation: f64, z: f64) -> f64 {
    norm_cdf((norm_quantile(mean) - correlation.sqrt() * z) / (1.0 - correlation).sqrt())
}

/// Binomial pmf whose success probability is Vasicek distributed with the
/// given mean and correlation, integrated by Gauss–Hermite quadrature.
pub fn vasicek_mixture_dist(
    trials: u32,
    mean: f64,
    correlation: f64,
    quad_nodes: usize,
) -> Result<DiscreteScoreDist> {
    if trials == 0 {
        return Err(RecalError::Domain("binomial needs at least one trial".into()));
    }
    if !(mean > 0.0 && mean < 1.0) {
        return Err(RecalError::Domain(format!(
            "Vasicek mean {mean} must lie in (0, 1)"
        )));
    }
    if !(correlation > 0.0 && correlation < 1.0) {
        return Err(RecalError::Domain(format!(
            "Vasicek correlation {correlation} must lie in (0, 1); use binomial_dist for zero correlation"
        )));
    }
    if quad_nodes < 16 {
        return Err(RecalError::Domain(format!(
            "quad_nodes = {quad_nodes} is below the minimum of 16"
        )));
    }
    let rule = GaussHermite::new(quad_nodes)?;
    let mut mix = vec![0.0; trials as usize + 1];
    for (&z, &w) in rule.nodes.iter().zip(&rule.weights) {
        let v = vasicek_success_prob(mean, correlation, z);
        if v <= 0.0 {
            mix[0] += w;
            continue;
        }
        if v >= 1.0 {
            mix[trials as usize] += w;
            continue;
        }
        for (m, b) in mix.iter_mut().zip(binomial_pmf_row(trials, v)) {
            *m += w * b;
        }
    }
    DiscreteScoreDist::from_weights(resolve_support(trials, None)?, mix)
}

use crate::auc::{adjusted_cdf_of, implied_auc, ScoreLevels};
use crate::dist::{SourceModel, TargetSpec};
use crate::error::{RecalError, Result};
use crate::solvers::{fixed_point_f0, solve_qmm_2d, SolveDiagnostics, SolverConfig, TransformFamily};
use crate::special::norm_quantile;

use super::{check_pair, MethodId, MethodParams, RecalResult};

/// Change in `(a, b)` between outer iterations below which the two-parameter
/// scheme treats the parameters as settled.
const PARAM_STABILITY: f64 = 1e-9;

fn source_auc(src: &SourceModel) -> Result<f64> {
    implied_auc(src.feature_dist(), src.posterior())
}

/// Parametric covariate shift with posterior drift, fitted by matching the
/// target prior and the source implied AUC.
pub fn parametric_cspd_qmm(
    src: &SourceModel,
    tgt: &TargetSpec,
    method: MethodId,
    cfg: &SolverConfig,
) -> Result<RecalResult> {
    let family = match method {
        MethodId::Platt => TransformFamily::Platt,
        MethodId::LogisticCspd => TransformFamily::LogisticCspd,
        MethodId::NormalCspd => TransformFamily::NormalCspd,
        other => {
            return Err(RecalError::Domain(format!(
                "{other} is not a parametric CSPD family"
            )))
        }
    };
    check_pair(src, tgt)?;
    src.posterior().ensure_interior(method.name())?;
    let auc_target = source_auc(src)?;
    let sol = solve_qmm_2d(
        family,
        auc_target,
        tgt.prior(),
        tgt.feature_dist(),
        src.posterior().values(),
        cfg,
    )?;
    let mut result = RecalResult::assemble(
        method,
        tgt,
        sol.values,
        MethodParams {
            a: Some(sol.a),
            b: Some(sol.b),
            ..Default::default()
        },
        sol.diagnostics,
    )?;
    result.diagnostics.residual_auc = Some((result.implied_auc - auc_target).abs());
    Ok(result)
}

/// The target feature law seen through the score `S = eta_P(X)`: distinct
/// score levels in ascending order and their target masses.
#[derive(Debug, Clone)]
pub struct ScoreView {
    levels: ScoreLevels,
    mass: Vec<f64>,
}

impl ScoreView {
    pub fn new(src: &SourceModel, tgt: &TargetSpec) -> Result<Self> {
        check_pair(src, tgt)?;
        let levels = ScoreLevels::new(src.posterior().values());
        let mass = levels.aggregate(tgt.feature_dist().probs());
        if let Some(i) = mass.iter().position(|&m| m <= 0.0) {
            return Err(RecalError::Domain(format!(
                "target puts no mass on score level {} (eta_P = {})",
                i,
                levels.values()[i]
            )));
        }
        Ok(Self { levels, mass })
    }

    pub fn levels(&self) -> &ScoreLevels {
        &self.levels
    }

    /// Adjusted distribution function of the unconditional target score.
    pub fn initial_f0(&self) -> Vec<f64> {
        adjusted_cdf_of(&self.mass)
    }

    fn initial_probit(&self) -> Vec<f64> {
        adjusted_probit_of(&self.mass)
    }

    /// Adjusted class-0 distribution function implied by per-level
    /// posteriors `eta`.
    pub fn class0_f0(&self, eta: &[f64]) -> Vec<f64> {
        adjusted_cdf_of(&self.class0_mass(eta))
    }

    fn class0_mass(&self, eta: &[f64]) -> Vec<f64> {
        let neg: Vec<f64> = self.mass.iter().zip(eta).map(|(m, e)| m * (1.0 - e)).collect();
        let total: f64 = neg.iter().sum();
        neg.iter().map(|v| v / total).collect()
    }

    pub fn expand(&self, per_level: &[f64]) -> Vec<f64> {
        self.levels.expand(per_level)
    }
}

/// `Phi^{-1}` of the adjusted distribution function of `mass`, taken from
/// whichever tail is smaller so that tiny upper tails do not round to 1. A
/// tail that vanishes entirely is floored at the smallest normal double.
fn adjusted_probit_of(mass: &[f64]) -> Vec<f64> {
    let total: f64 = mass.iter().sum();
    let mut upper: Vec<f64> = vec![0.0; mass.len()];
    let mut acc = 0.0;
    for i in (0..mass.len()).rev() {
        upper[i] = acc + 0.5 * mass[i] / total;
        acc += mass[i] / total;
    }
    let mut below = 0.0;
    mass.iter()
        .zip(upper)
        .map(|(m, up)| {
            let lower = below + 0.5 * m / total;
            below += m / total;
            if lower <= up {
                norm_quantile(lower.max(f64::MIN_POSITIVE))
            } else {
                -norm_quantile(up.max(f64::MIN_POSITIVE))
            }
        })
        .collect()
}

/// Posterior under a binormal ROC with separation `c`, given the adjusted
/// class-0 distribution function at each level.
fn roc_posterior(q: f64, c: f64, f0: &[f64]) -> Vec<f64> {
    let odds = (1.0 - q) / q;
    f0.iter()
        .map(|&f| 1.0 / (1.0 + odds * (0.5 * c * c - c * norm_quantile(f)).exp()))
        .collect()
}

/// Converged class-0 distribution function of the ROC-based scheme, one
/// value per score level, with `c` and the fixed-point diagnostics.
pub fn roc_qmm_class0_cdf(
    src: &SourceModel,
    tgt: &TargetSpec,
    cfg: &SolverConfig,
) -> Result<(ScoreView, Vec<f64>, f64, SolveDiagnostics)> {
    let view = ScoreView::new(src, tgt)?;
    let auc = source_auc(src)?;
    if !(auc > 0.0 && auc < 1.0) {
        return Err(RecalError::Domain(format!(
            "source implied AUC {auc} must lie in (0, 1)"
        )));
    }
    let c = std::f64::consts::SQRT_2 * norm_quantile(auc);
    let q = tgt.prior();
    let (f0, diag) = fixed_point_f0(
        |f0| Ok(view.class0_f0(&roc_posterior(q, c, f0))),
        &view.initial_f0(),
        cfg.tol_fixed_point,
        cfg.max_iter,
    )?;
    Ok((view, f0, c, diag))
}

/// ROC-based quasi moment matching: iterates the binormal-ROC posterior and
/// the class-0 distribution function it implies to a fixed point. Mean and
/// AUC are reported, not enforced.
pub fn roc_qmm(src: &SourceModel, tgt: &TargetSpec, cfg: &SolverConfig) -> Result<RecalResult> {
    let (view, f0, c, diag) = roc_qmm_class0_cdf(src, tgt, cfg)?;
    let values = view.expand(&roc_posterior(tgt.prior(), c, &f0));
    let mut result = RecalResult::assemble(
        MethodId::RocQmm,
        tgt,
        values,
        MethodParams {
            c: Some(c),
            ..Default::default()
        },
        diag,
    )?;
    result.diagnostics.residual_auc = Some((result.implied_auc - source_auc(src)?).abs());
    Ok(result)
}

/// Two-parameter QMM starting from the adjusted target distribution function.
pub fn two_param_qmm(src: &SourceModel, tgt: &TargetSpec, cfg: &SolverConfig) -> Result<RecalResult> {
    let view = ScoreView::new(src, tgt)?;
    let (f0, z) = (view.initial_f0(), view.initial_probit());
    two_param_loop(src, tgt, &view, f0, z, cfg)
}

/// Two-parameter QMM from a given per-level class-0 distribution function.
///
/// Alternates between fitting `(a, b)` of the probit-scale logistic
/// transform at fixed `F0` and refreshing `F0` from the fitted posterior.
pub fn two_param_qmm_from(
    src: &SourceModel,
    tgt: &TargetSpec,
    init_f0: &[f64],
    cfg: &SolverConfig,
) -> Result<RecalResult> {
    let view = ScoreView::new(src, tgt)?;
    if init_f0.len() != view.levels().num_levels() {
        return Err(RecalError::Structural(format!(
            "{} start values for {} score levels",
            init_f0.len(),
            view.levels().num_levels()
        )));
    }
    let z = init_f0.iter().map(|&f| norm_quantile(f)).collect();
    two_param_loop(src, tgt, &view, init_f0.to_vec(), z, cfg)
}

fn two_param_loop(
    src: &SourceModel,
    tgt: &TargetSpec,
    view: &ScoreView,
    mut f0: Vec<f64>,
    mut z: Vec<f64>,
    cfg: &SolverConfig,
) -> Result<RecalResult> {
    let auc_target = source_auc(src)?;
    let q = tgt.prior();
    let family = TransformFamily::RobLogit;
    // Inner fits must be tight enough that (a, b) vary smoothly with F0;
    // otherwise the outer loop chases solver noise instead of converging.
    let inner = SolverConfig {
        tol_mean: cfg.tol_mean.min(1e-14),
        tol_auc: cfg.tol_auc.min(1e-12),
        ..*cfg
    };

    let mut prev: Option<(f64, f64)> = None;
    let mut evaluations = 0;
    let mut iterations = 0;
    let mut step;
    let mut settled = false;
    let mut sol;
    loop {
        iterations += 1;
        sol = solve_qmm_2d(family, auc_target, q, tgt.feature_dist(), &view.expand(&z), &inner)?;
        evaluations += sol.diagnostics.evaluations;
        let eta: Vec<f64> = z.iter().map(|&x| family.apply_linked(sol.a, sol.b, x)).collect();
        let mass0 = view.class0_mass(&eta);
        let next = adjusted_cdf_of(&mass0);
        step = f0
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let params_still = prev.is_some_and(|(a, b)| {
            (a - sol.a).abs() <= PARAM_STABILITY && (b - sol.b).abs() <= PARAM_STABILITY
        });
        prev = Some((sol.a, sol.b));
        if step <= cfg.tol_fixed_point && params_still {
            settled = true;
            break;
        }
        if iterations >= cfg.max_iter {
            break;
        }
        f0 = next;
        z = adjusted_probit_of(&mass0);
    }

    let mut result = RecalResult::assemble(
        MethodId::TwoParamQmm,
        tgt,
        sol.values,
        MethodParams {
            a: Some(sol.a),
            b: Some(sol.b),
            ..Default::default()
        },
        SolveDiagnostics {
            iterations,
            evaluations,
            residual_mean: f64::NAN,
            residual_auc: None,
            converged: false,
            bracket: sol.diagnostics.bracket,
            last_step: Some(step),
        },
    )?;
    let residual_auc = (result.implied_auc - auc_target).abs();
    result.diagnostics.residual_auc = Some(residual_auc);
    result.diagnostics.converged = settled
        && result.diagnostics.residual_mean <= cfg.tol_mean
        && residual_auc <= cfg.tol_auc;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{DiscreteScoreDist, PosteriorCurve};
    use crate::special::norm_cdf;

    fn model(src_probs: &[f64], eta: &[f64], tgt_probs: &[f64], q: f64) -> (SourceModel, TargetSpec) {
        let support: Vec<f64> = (0..eta.len()).map(|i| i as f64).collect();
        let src = SourceModel::new(
            DiscreteScoreDist::new(support.clone(), src_probs.to_vec()).unwrap(),
            PosteriorCurve::new(support.clone(), eta.to_vec()).unwrap(),
        )
        .unwrap();
        let tgt = TargetSpec::new(DiscreteScoreDist::new(support, tgt_probs.to_vec()).unwrap(), q).unwrap();
        (src, tgt)
    }

    #[test]
    fn uninformative_source_gives_constant_roc_posterior() {
        let (src, tgt) = model(&[0.3, 0.7], &[0.2, 0.2], &[0.5, 0.5], 0.05);
        let r = roc_qmm(&src, &tgt, &SolverConfig::default()).unwrap();
        assert_eq!(r.params.c, Some(0.0));
        assert_eq!(r.diagnostics.iterations, 1);
        assert!(r.diagnostics.converged);
        assert!(r.posterior.values().iter().all(|v| (v - 0.05).abs() < 1e-16));
    }

    #[test]
    fn roc_qmm_two_point_matches_hand_iteration() {
        let (src, tgt) = model(&[0.6, 0.4], &[0.02, 0.1], &[0.3, 0.7], 0.05);
        let r = roc_qmm(&src, &tgt, &SolverConfig::default()).unwrap();
        assert!(r.diagnostics.converged);

        // Oracle: the iteration written out for two points.
        let p = 0.6 * 0.02 + 0.4 * 0.1;
        let (d1, d0) = ([0.6 * 0.02 / p, 0.4 * 0.1 / p], [0.6 * 0.98 / (1.0 - p), 0.4 * 0.9 / (1.0 - p)]);
        let auc = d1[1] * d0[0] + 0.5 * (d1[0] * d0[0] + d1[1] * d0[1]);
        let c = 2f64.sqrt() * norm_quantile(auc);
        let q = 0.05;
        let post = |f: f64| 1.0 / (1.0 + (1.0 - q) / q * (c * c / 2.0 - c * norm_quantile(f)).exp());
        let mut f = [0.15, 0.65];
        for _ in 0..2000 {
            let e = [post(f[0]), post(f[1])];
            let n0 = 0.3 * (1.0 - e[0]);
            let n1 = 0.7 * (1.0 - e[1]);
            let t = n0 + n1;
            f = [0.5 * n0 / t, n0 / t + 0.5 * n1 / t];
        }
        let oracle = [post(f[0]), post(f[1])];
        for (a, b) in r.posterior.values().iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
        assert!((norm_cdf(c / 2f64.sqrt()) - auc).abs() < 1e-12);
    }

    #[test]
    fn two_param_half_auc_is_constant() {
        let (src, tgt) = model(&[0.3, 0.7], &[0.2, 0.2], &[0.5, 0.5], 0.05);
        let r = two_param_qmm(&src, &tgt, &SolverConfig::default()).unwrap();
        assert_eq!(r.params.a, Some(0.0));
        assert!((r.params.b.unwrap() - (0.95f64 / 0.05).ln()).abs() < 1e-12);
        assert!(r.posterior.values().iter().all(|v| (v - 0.05).abs() < 1e-12));
    }

    #[test]
    fn two_param_independent_of_start() {
        let (src, tgt) = model(
            &[0.5, 0.3, 0.2],
            &[0.01, 0.03, 0.09],
            &[0.2, 0.3, 0.5],
            0.08,
        );
        let cfg = SolverConfig::default();
        let from_target = two_param_qmm(&src, &tgt, &cfg).unwrap();
        let (_, roc_f0, _, _) = roc_qmm_class0_cdf(&src, &tgt, &cfg).unwrap();
        let from_roc = two_param_qmm_from(&src, &tgt, &roc_f0, &cfg).unwrap();
        assert!(from_target.diagnostics.converged && from_roc.diagnostics.converged);
        for (a, b) in from_target.posterior.values().iter().zip(from_roc.posterior.values()) {
            assert!((a - b).abs() < 1e-7, "{a} vs {b}");
        }
    }

    #[test]
    fn parametric_rejects_non_cspd_method() {
        let (src, tgt) = model(&[0.5, 0.5], &[0.1, 0.3], &[0.5, 0.5], 0.1);
        assert!(parametric_cspd_qmm(&src, &tgt, MethodId::Fjs, &SolverConfig::default()).is_err());
    }

    #[test]
    fn zero_mass_score_level_rejected() {
        let (src, tgt) = model(&[0.5, 0.5], &[0.1, 0.3], &[1.0, 0.0], 0.1);
        assert!(matches!(ScoreView::new(&src, &tgt), Err(RecalError::Domain(_))));
    }

    #[test]
    fn probit_keeps_tiny_upper_tail() {
        // The plain adjusted cdf of the top level rounds to exactly 1 here.
        let mass = [1.0, 1e-20];
        assert_eq!(adjusted_cdf_of(&mass)[1], 1.0);
        let z = adjusted_probit_of(&mass);
        assert!(z[0].abs() < 1e-12);
        assert!(((norm_cdf(-z[1]) - 5e-21) / 5e-21).abs() < 1e-9);
        let vanished = adjusted_probit_of(&[1.0, 0.0]);
        assert!(vanished[1].is_finite() && vanished[1] > 30.0);
    }
}

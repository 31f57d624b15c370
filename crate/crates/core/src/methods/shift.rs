use crate::dist::{SourceModel, TargetSpec};
use crate::error::{RecalError, Result};
use crate::solvers::{RootFinder, SolveDiagnostics, SolverConfig};

use super::{check_pair, MethodId, MethodParams, RecalResult};

/// `eta_Q = min(t * eta_P, 1)` with `t` chosen so that the target mean is `q`.
pub fn capped_scaling(src: &SourceModel, tgt: &TargetSpec, cfg: &SolverConfig) -> Result<RecalResult> {
    check_pair(src, tgt)?;
    let eta = src.posterior().values();
    let probs = tgt.feature_dist().probs();
    let q = tgt.prior();
    let capped_mean = |t: f64| -> f64 {
        probs
            .iter()
            .zip(eta)
            .map(|(p, e)| p * (t * e).min(1.0))
            .sum()
    };
    let root = RootFinder::new(cfg.tol_mean)
        .x_tol(1e-15)
        .max_expansions(cfg.max_expansions)
        .limits(0.0, f64::INFINITY)
        .solve(|t| capped_mean(t) - q, 0.0, 1.0)?;
    let t = root.x;
    let values = eta.iter().map(|e| (t * e).min(1.0)).collect();
    let mut result = RecalResult::assemble(
        MethodId::CappedScaling,
        tgt,
        values,
        MethodParams {
            t: Some(t),
            ..Default::default()
        },
        SolveDiagnostics {
            iterations: root.evaluations,
            evaluations: root.evaluations,
            bracket: Some(root.bracket),
            ..SolveDiagnostics::closed_form(f64::NAN)
        },
    )?;
    result.diagnostics.converged = result.diagnostics.residual_mean <= cfg.tol_mean;
    Ok(result)
}

/// Posterior correction for a change of class priors at fixed
/// class-conditional feature laws. The target mean is whatever results.
pub fn label_shift_correct(src: &SourceModel, tgt: &TargetSpec) -> Result<RecalResult> {
    check_pair(src, tgt)?;
    src.posterior().ensure_interior("label shift")?;
    let values = fjs_posterior(src.prior(), tgt.prior(), 1.0, src.posterior().values());
    RecalResult::assemble(
        MethodId::LabelShift,
        tgt,
        values,
        MethodParams::default(),
        SolveDiagnostics::closed_form(f64::NAN),
    )
}

/// Correction with label-factor ratio `rho`; `rho = 1` is the label-shift
/// formula.
fn fjs_posterior(p: f64, q: f64, rho: f64, eta: &[f64]) -> Vec<f64> {
    let pos = q / p;
    let neg = (1.0 - q) / (1.0 - p) / rho;
    eta.iter()
        .map(|&e| {
            let num = pos * e;
            num / (num + neg * (1.0 - e))
        })
        .collect()
}

/// Closed interval known to contain the FJS ratio `rho`.
pub fn fjs_bounds(src: &SourceModel, tgt: &TargetSpec) -> Result<(f64, f64)> {
    check_pair(src, tgt)?;
    src.posterior().ensure_interior("FJS")?;
    let p = src.prior();
    let (odds, inv_odds) = tgt
        .feature_dist()
        .probs()
        .iter()
        .zip(src.posterior().values())
        .fold((0.0, 0.0), |(o, io), (pi, e)| {
            (o + pi * e / (1.0 - e), io + pi * (1.0 - e) / e)
        });
    let prior_odds = p / (1.0 - p);
    Ok((prior_odds / odds, prior_odds * inv_odds))
}

/// Recalibration under factorizable joint shift: `rho` is the unique root of
/// the mean equation inside [`fjs_bounds`].
pub fn fjs_recalibrate(src: &SourceModel, tgt: &TargetSpec, cfg: &SolverConfig) -> Result<RecalResult> {
    let (lower, upper) = fjs_bounds(src, tgt)?;
    let (p, q) = (src.prior(), tgt.prior());
    let eta = src.posterior().values();
    let probs = tgt.feature_dist().probs();
    let residual = |rho: f64| -> f64 {
        fjs_posterior(p, q, rho, eta)
            .iter()
            .zip(probs)
            .map(|(v, pi)| v * pi)
            .sum::<f64>()
            - q
    };
    let root = if lower == upper {
        crate::solvers::Root {
            x: lower,
            fx: residual(lower),
            evaluations: 1,
            bracket: (lower, upper),
        }
    } else {
        RootFinder::new(cfg.tol_mean)
            .x_tol(1e-15)
            .max_expansions(0)
            .solve(residual, lower, upper)
            .map_err(|err| match err {
                RecalError::NoRoot { f_lo, f_hi, .. } => RecalError::Infeasible {
                    what: "FJS mean over the rho bounds".into(),
                    target: q,
                    attainable_lo: f_lo + q,
                    attainable_hi: f_hi + q,
                },
                other => other,
            })?
    };
    let rho = root.x;
    let mut result = RecalResult::assemble(
        MethodId::Fjs,
        tgt,
        fjs_posterior(p, q, rho, eta),
        MethodParams {
            rho: Some(rho),
            ..Default::default()
        },
        SolveDiagnostics {
            iterations: root.evaluations,
            evaluations: root.evaluations,
            bracket: Some((lower, upper)),
            ..SolveDiagnostics::closed_form(f64::NAN)
        },
    )?;
    result.diagnostics.converged = result.diagnostics.residual_mean <= cfg.tol_mean;
    Ok(result)
}

//! Bracketed root finding, the nested two-parameter moment-matching solve and
//! the fixed-point driver for class-0 distribution functions.

use std::cell::Cell;

use serde::{Deserialize, Serialize};

use crate::auc::implied_auc;
use crate::dist::{DiscreteScoreDist, PosteriorCurve};
use crate::error::{RecalError, Result};
use crate::special::{logit, norm_cdf, norm_quantile, sigmoid};

/// Tolerances and iteration caps shared by all methods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Target for `|E_Q[eta_Q] - q|`.
    pub tol_mean: f64,
    /// Target for `|AUC - AUC_target|`.
    pub tol_auc: f64,
    /// Max-norm step size at which a fixed-point iteration stops.
    pub tol_fixed_point: f64,
    /// Cap on fixed-point iterations.
    pub max_iter: usize,
    /// Cap on geometric bracket expansions.
    pub max_expansions: u32,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol_mean: 1e-9,
            tol_auc: 1e-6,
            tol_fixed_point: 1e-10,
            max_iter: 200,
            max_expansions: 60,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, name: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(RecalError::Domain(format!("{name} must be positive, got {v}")))
            }
        };
        positive(self.tol_mean, "tol_mean")?;
        positive(self.tol_auc, "tol_auc")?;
        positive(self.tol_fixed_point, "tol_fixed_point")?;
        if self.max_iter == 0 {
            return Err(RecalError::Domain("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Convergence record attached to every recalibration result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveDiagnostics {
    /// Outer iterations: root-search evaluations or fixed-point updates.
    pub iterations: usize,
    /// Objective evaluations, inner solves included.
    pub evaluations: usize,
    /// `|achieved mean - q|`.
    pub residual_mean: f64,
    /// `|achieved AUC - target AUC|` where an AUC target applies.
    pub residual_auc: Option<f64>,
    pub converged: bool,
    /// Final bracket of the outermost root search, if any.
    pub bracket: Option<(f64, f64)>,
    /// Last max-norm step of a fixed-point iteration, if any.
    pub last_step: Option<f64>,
}

impl SolveDiagnostics {
    pub(crate) fn closed_form(residual_mean: f64) -> Self {
        Self {
            iterations: 0,
            evaluations: 0,
            residual_mean,
            residual_auc: None,
            converged: true,
            bracket: None,
            last_step: None,
        }
    }
}

/// Outcome of a bracketed root search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub fx: f64,
    /// Function evaluations, bracket expansion included.
    pub evaluations: usize,
    pub bracket: (f64, f64),
}

/// Bisection with automatic bracket expansion.
///
/// Expansion doubles the bracket width towards the side where the root must
/// lie (inferred from the values at both ends of a monotone function). A
/// finite `lower_limit`/`upper_limit` is approached by halving the gap
/// instead of being crossed.
#[derive(Debug, Clone, Copy)]
pub struct RootFinder {
    pub f_tol: f64,
    pub x_tol: f64,
    pub max_bisections: usize,
    pub max_expansions: u32,
    pub lower_limit: f64,
    pub upper_limit: f64,
}

impl RootFinder {
    pub fn new(tol: f64) -> Self {
        Self {
            f_tol: tol,
            x_tol: tol,
            max_bisections: 400,
            max_expansions: 60,
            lower_limit: f64::NEG_INFINITY,
            upper_limit: f64::INFINITY,
        }
    }

    pub fn x_tol(mut self, x_tol: f64) -> Self {
        self.x_tol = x_tol;
        self
    }

    pub fn max_expansions(mut self, n: u32) -> Self {
        self.max_expansions = n;
        self
    }

    pub fn limits(mut self, lower: f64, upper: f64) -> Self {
        self.lower_limit = lower;
        self.upper_limit = upper;
        self
    }

    pub fn solve<F: FnMut(f64) -> f64>(&self, mut f: F, lo: f64, hi: f64) -> Result<Root> {
        self.try_solve(|x| Ok(f(x)), lo, hi)
    }

    pub fn try_solve<F>(&self, mut f: F, lo: f64, hi: f64) -> Result<Root>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        let (mut lo, mut hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        let mut evaluations = 2;
        let mut f_lo = f(lo)?;
        let mut f_hi = f(hi)?;
        let done = |x: f64, fx: f64, evaluations: usize, lo: f64, hi: f64| Root {
            x,
            fx,
            evaluations,
            bracket: (lo, hi),
        };
        if f_lo == 0.0 {
            return Ok(done(lo, f_lo, evaluations, lo, hi));
        }
        if f_hi == 0.0 {
            return Ok(done(hi, f_hi, evaluations, lo, hi));
        }

        let mut expansions = 0;
        let mut width = hi - lo;
        while f_lo.signum() == f_hi.signum() {
            if !(f_lo.is_finite() && f_hi.is_finite()) || expansions >= self.max_expansions {
                return Err(RecalError::NoRoot { lo, hi, f_lo, f_hi });
            }
            expansions += 1;
            width *= 2.0;
            let increasing = f_hi > f_lo;
            let root_below = if f_hi == f_lo {
                None
            } else {
                Some(increasing == (f_lo > 0.0))
            };
            match root_below {
                Some(true) => {
                    let next = step_towards(lo, lo - width, self.lower_limit);
                    if next == lo {
                        return Err(RecalError::NoRoot { lo, hi, f_lo, f_hi });
                    }
                    hi = lo;
                    f_hi = f_lo;
                    lo = next;
                    f_lo = f(lo)?;
                    evaluations += 1;
                }
                Some(false) => {
                    let next = step_towards(hi, hi + width, self.upper_limit);
                    if next == hi {
                        return Err(RecalError::NoRoot { lo, hi, f_lo, f_hi });
                    }
                    lo = hi;
                    f_lo = f_hi;
                    hi = next;
                    f_hi = f(hi)?;
                    evaluations += 1;
                }
                None => {
                    lo = step_towards(lo, lo - width, self.lower_limit);
                    hi = step_towards(hi, hi + width, self.upper_limit);
                    f_lo = f(lo)?;
                    f_hi = f(hi)?;
                    evaluations += 2;
                }
            }
            if f_lo == 0.0 {
                return Ok(done(lo, f_lo, evaluations, lo, hi));
            }
            if f_hi == 0.0 {
                return Ok(done(hi, f_hi, evaluations, lo, hi));
            }
        }

        for _ in 0..self.max_bisections {
            let mid = lo + 0.5 * (hi - lo);
            if mid <= lo || mid >= hi {
                break;
            }
            let f_mid = f(mid)?;
            evaluations += 1;
            if f_mid.abs() <= self.f_tol || f_mid == 0.0 {
                return Ok(done(mid, f_mid, evaluations, lo, hi));
            }
            if f_mid.signum() == f_lo.signum() {
                lo = mid;
                f_lo = f_mid;
            } else {
                hi = mid;
                f_hi = f_mid;
            }
            if hi - lo <= self.x_tol * mid.abs().max(1.0) {
                break;
            }
        }
        Ok(if f_lo.abs() <= f_hi.abs() {
            done(lo, f_lo, evaluations, lo, hi)
        } else {
            done(hi, f_hi, evaluations, lo, hi)
        })
    }
}

fn step_towards(from: f64, candidate: f64, limit: f64) -> f64 {
    let crosses = if candidate < from {
        candidate <= limit
    } else {
        candidate >= limit
    };
    if crosses {
        from + 0.5 * (limit - from)
    } else {
        candidate
    }
}

/// Root of a monotone `f` on `[lo, hi]`, expanding the bracket when needed.
pub fn bisect_root<F: FnMut(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<Root> {
    RootFinder::new(tol).solve(f, lo, hi)
}

/// Two-parameter monotone transforms `u -> outer(a * link(u) + b)` fitted by
/// matching a mean and an implied AUC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformFamily {
    /// `sigmoid(a * u + b)`, `a >= 0`.
    Platt,
    /// `sigmoid(a * logit(u) + b)`, `a > 0`.
    LogisticCspd,
    /// `Phi(a * Phi^-1(u) + b)`, `a > 0`.
    NormalCspd,
    /// `1 / (1 + exp(b + a * z))` on probit-scale inputs `z`, `a <= 0`.
    RobLogit,
}

impl TransformFamily {
    /// Maps a raw input to the scale on which the slope acts.
    pub fn link(self, u: f64) -> f64 {
        match self {
            Self::Platt | Self::RobLogit => u,
            Self::LogisticCspd => logit(u),
            Self::NormalCspd => norm_quantile(u),
        }
    }

    fn outer(self, lin: f64) -> f64 {
        match self {
            Self::Platt | Self::LogisticCspd => sigmoid(lin),
            Self::NormalCspd => norm_cdf(lin),
            Self::RobLogit => sigmoid(-lin),
        }
    }

    /// `T_{a,b}` applied to an already linked input.
    pub fn apply_linked(self, a: f64, b: f64, linked: f64) -> f64 {
        self.outer(a * linked + b)
    }

    pub fn apply(self, a: f64, b: f64, u: f64) -> f64 {
        self.apply_linked(a, b, self.link(u))
    }

    /// Literal slope parameter for a non-negative search variable; the
    /// resulting transform is non-decreasing in the input.
    pub fn slope_to_a(self, slope: f64) -> f64 {
        match self {
            Self::RobLogit if slope != 0.0 => -slope,
            _ => slope,
        }
    }

    /// Intercept making `T_{0,b}` the constant `q`.
    pub fn constant_intercept(self, q: f64) -> f64 {
        match self {
            Self::Platt | Self::LogisticCspd => logit(q),
            Self::NormalCspd => norm_quantile(q),
            Self::RobLogit => ((1.0 - q) / q).ln(),
        }
    }

    /// CSPD families require a strictly increasing transform.
    pub fn requires_positive_slope(self) -> bool {
        matches!(self, Self::LogisticCspd | Self::NormalCspd)
    }
}

/// Fitted parameters of a two-parameter moment-matching solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QmmSolution {
    pub a: f64,
    pub b: f64,
    pub values: Vec<f64>,
    pub achieved_mean: f64,
    pub achieved_auc: f64,
    pub diagnostics: SolveDiagnostics,
}

/// Solves `E_Q[T_{a,b}] = q` and `AUC_Q(T_{a,b}) = auc_target`.
///
/// `inputs` are per-support-point raw inputs of the family (source posterior
/// values for the CSPD and Platt families, probit-scale class-0 distribution
/// values for `RobLogit`). For fixed slope the intercept is found by bisection
/// on the mean equation, which is strictly monotone in `b`; the slope is then
/// bracketed from zero upwards on the AUC residual.
pub fn solve_qmm_2d(
    family: TransformFamily,
    auc_target: f64,
    q: f64,
    target: &DiscreteScoreDist,
    inputs: &[f64],
    cfg: &SolverConfig,
) -> Result<QmmSolution> {
    if inputs.len() != target.len() {
        return Err(RecalError::Structural(format!(
            "{} transform inputs for {} support points",
            inputs.len(),
            target.len()
        )));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(RecalError::Domain(format!("target prior {q} must lie in (0, 1)")));
    }
    if family != TransformFamily::RobLogit {
        if let Some(u) = inputs.iter().find(|u| !(**u > 0.0 && **u < 1.0)) {
            return Err(RecalError::Domain(format!(
                "source posterior value {u} must lie strictly inside (0, 1)"
            )));
        }
    }
    let linked: Vec<f64> = inputs.iter().map(|&u| family.link(u)).collect();
    if let Some(v) = linked.iter().find(|v| !v.is_finite()) {
        return Err(RecalError::Domain(format!("transform input maps to {v}")));
    }
    let support = target.support().to_vec();
    let probs = target.probs();
    let evaluations = Cell::new(0usize);
    let outer = Cell::new(0usize);

    let mean_of = |a: f64, b: f64| -> f64 {
        linked
            .iter()
            .zip(probs)
            .map(|(&x, p)| p * family.apply_linked(a, b, x))
            .sum()
    };
    let intercept_for = |a: f64| -> Result<f64> {
        if a == 0.0 {
            return Ok(family.constant_intercept(q));
        }
        let root = RootFinder::new(cfg.tol_mean)
            .x_tol(1e-15)
            .max_expansions(cfg.max_expansions)
            .solve(|b| mean_of(a, b) - q, -1.0, 1.0)?;
        evaluations.set(evaluations.get() + root.evaluations);
        Ok(root.x)
    };
    let auc_of = |a: f64, b: f64| -> Result<f64> {
        let values: Vec<f64> = linked.iter().map(|&x| family.apply_linked(a, b, x)).collect();
        implied_auc(target, &PosteriorCurve::new(support.clone(), values)?)
    };
    let residual = |slope: f64| -> Result<f64> {
        outer.set(outer.get() + 1);
        let a = family.slope_to_a(slope);
        let b = intercept_for(a)?;
        Ok(auc_of(a, b)? - auc_target)
    };

    let infeasible = |hi: f64| RecalError::Infeasible {
        what: format!("{family:?} implied AUC"),
        target: auc_target,
        attainable_lo: 0.5,
        attainable_hi: hi,
    };
    let flat = (auc_target - 0.5).abs() <= cfg.tol_auc && !family.requires_positive_slope();
    if !flat && auc_target <= 0.5 {
        return Err(infeasible(f64::NAN));
    }

    let (slope, bracket) = if flat {
        (0.0, (0.0, 0.0))
    } else {
        // Grow the slope geometrically until the AUC overshoots the target.
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut r_hi = residual(hi)?;
        let mut best = r_hi + auc_target;
        let mut expansions = 0;
        while r_hi < 0.0 {
            if expansions >= cfg.max_expansions {
                return Err(infeasible(best));
            }
            expansions += 1;
            lo = hi;
            hi *= 2.0;
            r_hi = residual(hi)?;
            best = best.max(r_hi + auc_target);
        }
        let root = RootFinder::new(cfg.tol_auc)
            .x_tol(1e-14)
            .max_expansions(0)
            .try_solve(&residual, lo, hi)?;
        (root.x, root.bracket)
    };
    if slope == 0.0 && family.requires_positive_slope() {
        return Err(infeasible(0.5));
    }

    let a = family.slope_to_a(slope);
    let b = intercept_for(a)?;
    let values: Vec<f64> = linked.iter().map(|&x| family.apply_linked(a, b, x)).collect();
    let achieved_mean: f64 = values.iter().zip(probs).map(|(v, p)| v * p).sum();
    let achieved_auc = implied_auc(target, &PosteriorCurve::new(support, values.clone())?)?;
    let residual_mean = (achieved_mean - q).abs();
    let residual_auc = (achieved_auc - auc_target).abs();
    Ok(QmmSolution {
        a,
        b,
        values,
        achieved_mean,
        achieved_auc,
        diagnostics: SolveDiagnostics {
            iterations: outer.get(),
            evaluations: evaluations.get() + outer.get(),
            residual_mean,
            residual_auc: Some(residual_auc),
            converged: residual_mean <= cfg.tol_mean && residual_auc <= cfg.tol_auc,
            bracket: Some((family.slope_to_a(bracket.0), family.slope_to_a(bracket.1))),
            last_step: None,
        },
    })
}

/// Iterates `update` from `init` until the max-norm step is at most `tol`
/// or `max_iter` updates have been applied. Non-convergence is reported in
/// the diagnostics, together with the last iterate.
pub fn fixed_point_f0<F>(
    mut update: F,
    init: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveDiagnostics)>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if let Some(v) = init.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
        return Err(RecalError::Domain(format!(
            "fixed-point start value {v} outside (0, 1)"
        )));
    }
    if init.windows(2).any(|w| w[0] > w[1]) {
        return Err(RecalError::Domain(
            "fixed-point start values must be increasing".into(),
        ));
    }
    let mut current = init.to_vec();
    let mut step = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iter {
        let next = update(&current)?;
        if next.len() != current.len() {
            return Err(RecalError::Structural(format!(
                "fixed-point update returned {} values for {}",
                next.len(),
                current.len()
            )));
        }
        iterations += 1;
        step = current
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        current = next;
        if step <= tol {
            break;
        }
    }
    Ok((
        current,
        SolveDiagnostics {
            iterations,
            evaluations: iterations,
            residual_mean: f64::NAN,
            residual_auc: None,
            converged: step <= tol,
            bracket: None,
            last_step: Some(step),
        },
    ))
}

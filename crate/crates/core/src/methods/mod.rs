//! The eight recalibration methods. Each maps a source model and a target
//! specification to a target posterior curve over the shared support.

mod qmm;
mod shift;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::auc::implied_auc;
use crate::dist::{mean_under, PosteriorCurve, SourceModel, TargetSpec};
use crate::error::{RecalError, Result};
use crate::solvers::{SolveDiagnostics, SolverConfig};

pub use qmm::{parametric_cspd_qmm, roc_qmm, roc_qmm_class0_cdf, two_param_qmm, two_param_qmm_from, ScoreView};
pub use shift::{capped_scaling, fjs_bounds, fjs_recalibrate, label_shift_correct};

/// Recalibration method identifiers, in reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodId {
    CappedScaling,
    LabelShift,
    Fjs,
    Platt,
    RocQmm,
    TwoParamQmm,
    LogisticCspd,
    NormalCspd,
}

impl MethodId {
    pub const ALL: [MethodId; 8] = [
        MethodId::CappedScaling,
        MethodId::LabelShift,
        MethodId::Fjs,
        MethodId::Platt,
        MethodId::RocQmm,
        MethodId::TwoParamQmm,
        MethodId::LogisticCspd,
        MethodId::NormalCspd,
    ];

    /// Stable serialized name.
    pub fn name(self) -> &'static str {
        match self {
            Self::CappedScaling => "capped_scaling",
            Self::LabelShift => "label_shift",
            Self::Fjs => "fjs",
            Self::Platt => "platt",
            Self::RocQmm => "roc_qmm",
            Self::TwoParamQmm => "two_param_qmm",
            Self::LogisticCspd => "logistic_cspd",
            Self::NormalCspd => "normal_cspd",
        }
    }

    /// Human-readable row label.
    pub fn label(self) -> &'static str {
        match self {
            Self::CappedScaling => "Capped scaling",
            Self::LabelShift => "Label shift",
            Self::Fjs => "FJS",
            Self::Platt => "Platt scaling",
            Self::RocQmm => "ROC QMM",
            Self::TwoParamQmm => "2-param QMM",
            Self::LogisticCspd => "Logistic CSPD",
            Self::NormalCspd => "Normal CSPD",
        }
    }

    /// Whether the method forces the target mean to equal the target prior.
    pub fn matches_mean(self) -> bool {
        !matches!(self, Self::LabelShift | Self::RocQmm)
    }

    /// Whether the method targets the source implied AUC.
    pub fn matches_auc(self) -> bool {
        matches!(
            self,
            Self::Platt | Self::TwoParamQmm | Self::LogisticCspd | Self::NormalCspd
        )
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodId {
    type Err = RecalError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| RecalError::Domain(format!("unknown method `{s}`")))
    }
}

/// Method-specific fitted parameters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct MethodParams {
    /// Capped-scaling factor.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    /// FJS label-factor ratio.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    /// Binormal ROC separation parameter.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
}

/// Recalibrated posterior curve with its summary statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecalResult {
    pub method: MethodId,
    pub posterior: PosteriorCurve,
    pub achieved_mean: f64,
    pub implied_auc: f64,
    pub params: MethodParams,
    pub diagnostics: SolveDiagnostics,
}

impl RecalResult {
    /// Computes mean and implied AUC of `values` under the target and fills
    /// in the mean residual.
    pub(crate) fn assemble(
        method: MethodId,
        tgt: &TargetSpec,
        values: Vec<f64>,
        params: MethodParams,
        mut diagnostics: SolveDiagnostics,
    ) -> Result<Self> {
        let posterior = PosteriorCurve::new(tgt.support().to_vec(), values)?;
        let achieved_mean = mean_under(tgt.feature_dist(), &posterior)?;
        let implied_auc = implied_auc(tgt.feature_dist(), &posterior)?;
        diagnostics.residual_mean = (achieved_mean - tgt.prior()).abs();
        Ok(Self {
            method,
            posterior,
            achieved_mean,
            implied_auc,
            params,
            diagnostics,
        })
    }
}

fn check_pair(src: &SourceModel, tgt: &TargetSpec) -> Result<()> {
    tgt.feature_dist()
        .ensure_support(src.support(), "source and target")
}

/// Runs one method.
pub fn recalibrate(
    method: MethodId,
    src: &SourceModel,
    tgt: &TargetSpec,
    cfg: &SolverConfig,
) -> Result<RecalResult> {
    cfg.validate()?;
    match method {
        MethodId::CappedScaling => capped_scaling(src, tgt, cfg),
        MethodId::LabelShift => label_shift_correct(src, tgt),
        MethodId::Fjs => fjs_recalibrate(src, tgt, cfg),
        MethodId::Platt | MethodId::LogisticCspd | MethodId::NormalCspd => {
            parametric_cspd_qmm(src, tgt, method, cfg)
        }
        MethodId::RocQmm => roc_qmm(src, tgt, cfg),
        MethodId::TwoParamQmm => two_param_qmm(src, tgt, cfg),
    }
}

/// Runs several methods on scoped threads; output order follows `methods`.
pub fn recalibrate_many(
    methods: &[MethodId],
    src: &SourceModel,
    tgt: &TargetSpec,
    cfg: &SolverConfig,
) -> Vec<(MethodId, Result<RecalResult>)> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = methods
            .iter()
            .map(|&m| (m, scope.spawn(move || recalibrate(m, src, tgt, cfg))))
            .collect();
        handles
            .into_iter()
            .map(|(m, h)| (m, h.join().expect("recalibration thread panicked")))
            .collect()
    })
}

//! Concave functionals with their Jensen bounds, the results table and the
//! curve export.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::auc::implied_auc;
use crate::dist::{mean_under, DiscreteScoreDist, PosteriorCurve, SourceModel, TargetSpec};
use crate::error::{RecalError, Result};
use crate::methods::{MethodId, RecalResult};

/// Slack allowed in the midpoint concavity test.
pub const CONCAVITY_SLACK: f64 = 1e-12;
/// Distance from `q` beyond which a row's mean is flagged as off target;
/// half a unit of the three-decimal display precision.
pub const OFF_TARGET_TOL: f64 = 5e-4;

/// Piecewise-linear concave function on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TabulatedRaw")]
pub struct TabulatedConcave {
    grid: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TabulatedRaw {
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl TryFrom<TabulatedRaw> for TabulatedConcave {
    type Error = RecalError;

    fn try_from(raw: TabulatedRaw) -> Result<Self> {
        Self::new(raw.grid, raw.values)
    }
}

impl TabulatedConcave {
    /// `grid` must be strictly increasing from 0 to 1 and the tabulated
    /// values must pass the midpoint concavity test on it.
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 || grid.len() != values.len() {
            return Err(RecalError::Structural(format!(
                "tabulated functional needs matching grid and values of length >= 2 (got {} and {})",
                grid.len(),
                values.len()
            )));
        }
        if grid[0] != 0.0 || grid[grid.len() - 1] != 1.0 {
            return Err(RecalError::Domain("tabulation grid must run from 0 to 1".into()));
        }
        if grid.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less)) {
            return Err(RecalError::Domain("tabulation grid must be strictly increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(RecalError::Domain("tabulated values must be finite".into()));
        }
        let table = Self { grid, values };
        for i in 0..table.grid.len() {
            for j in i + 1..table.grid.len() {
                let mid = table.eval(0.5 * (table.grid[i] + table.grid[j]));
                let chord = 0.5 * (table.values[i] + table.values[j]);
                if mid < chord - CONCAVITY_SLACK {
                    return Err(RecalError::Domain(format!(
                        "tabulated functional is not concave between grid points {i} and {j}"
                    )));
                }
            }
        }
        Ok(table)
    }

    /// Samples `f` on `grid`.
    pub fn from_fn(grid: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.iter().map(|&u| f(u)).collect();
        Self::new(grid, values)
    }

    pub fn eval(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let k = self.grid.partition_point(|&g| g <= u);
        if k == 0 {
            return self.values[0];
        }
        if k >= self.grid.len() {
            return self.values[self.values.len() - 1];
        }
        let (x0, x1) = (self.grid[k - 1], self.grid[k]);
        let (y0, y1) = (self.values[k - 1], self.values[k]);
        y0 + (y1 - y0) * (u - x0) / (x1 - x0)
    }
}

/// Concave evaluation functional `C` applied to posterior probabilities.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Functional {
    #[default]
    Sqrt,
    Tabulated(TabulatedConcave),
}

impl Functional {
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            Self::Sqrt => u.sqrt(),
            Self::Tabulated(t) => t.eval(u),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Sqrt => "sqrt",
            Self::Tabulated(_) => "tabulated",
        }
    }
}

/// `sum_i pi_i * C(eta(s_i))`.
pub fn functional_mean(dist: &DiscreteScoreDist, curve: &PosteriorCurve, c: &Functional) -> Result<f64> {
    dist.ensure_support(curve.support(), "functional_mean")?;
    Ok(dist
        .probs()
        .iter()
        .zip(curve.values())
        .map(|(p, &v)| p * c.eval(v))
        .sum())
}

/// Jensen bounds `((1 - q) C(0) + q C(1), C(q))` on `E_Q[C(eta_Q)]` over
/// all posteriors with mean `q`.
pub fn functional_bounds(q: f64, c: &Functional) -> Result<(f64, f64)> {
    if !(q > 0.0 && q < 1.0) {
        return Err(RecalError::Domain(format!("prior {q} must lie in (0, 1)")));
    }
    Ok(((1.0 - q) * c.eval(0.0) + q * c.eval(1.0), c.eval(q)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub label: String,
    /// `None` for the source row.
    pub method: Option<MethodId>,
    pub mean_probs: f64,
    pub implied_auc: f64,
    pub mean_functional: f64,
    /// Mean differs from the target prior by more than [`OFF_TARGET_TOL`].
    pub off_target: bool,
}

/// Source row followed by one row per method, in [`MethodId`] order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultsTable {
    pub rows: Vec<TableRow>,
}

pub fn build_results_table(
    source: &SourceModel,
    target: &TargetSpec,
    results: &[RecalResult],
    c: &Functional,
) -> Result<ResultsTable> {
    target
        .feature_dist()
        .ensure_support(source.support(), "results table")?;
    let mut rows = vec![TableRow {
        label: "Source".into(),
        method: None,
        mean_probs: mean_under(source.feature_dist(), source.posterior())?,
        implied_auc: implied_auc(source.feature_dist(), source.posterior())?,
        mean_functional: functional_mean(source.feature_dist(), source.posterior(), c)?,
        off_target: false,
    }];
    let mut ordered: Vec<&RecalResult> = results.iter().collect();
    ordered.sort_by_key(|r| r.method);
    for r in ordered {
        let q_dist = target.feature_dist();
        let mean = mean_under(q_dist, &r.posterior)?;
        rows.push(TableRow {
            label: r.method.label().into(),
            method: Some(r.method),
            mean_probs: mean,
            implied_auc: implied_auc(q_dist, &r.posterior)?,
            mean_functional: functional_mean(q_dist, &r.posterior, c)?,
            off_target: (mean - target.prior()).abs() > OFF_TARGET_TOL,
        });
    }
    Ok(ResultsTable { rows })
}

/// Rounds to 12 significant digits in plain decimal notation, trimming
/// trailing zeros.
pub fn format_sig12(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exponent = x.abs().log10().floor() as i32;
    let decimals = (11 - exponent).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

impl ResultsTable {
    /// CSV with header `method,mean_probs,auc,mean_functional`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,mean_probs,auc,mean_functional\n");
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                row.label,
                format_sig12(row.mean_probs),
                format_sig12(row.implied_auc),
                format_sig12(row.mean_functional)
            );
        }
        out
    }
}

impl fmt::Display for ResultsTable {
    /// Three-decimal display; off-target means carry a trailing `*`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<16}{:>12}{:>8}{:>18}", "Method", "mean(probs)", "AUC", "mean(C(probs))")?;
        for row in &self.rows {
            let mean = format!("{:.3}{}", row.mean_probs, if row.off_target { "*" } else { " " });
            writeln!(
                f,
                "{:<16}{:>12}{:>8.3}{:>18.3}",
                row.label, mean, row.implied_auc, row.mean_functional
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRow {
    pub series: String,
    pub support: f64,
    pub value: f64,
}

/// Long-format curve data: feature pmfs, source posterior and one posterior
/// series per method.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveDataset {
    pub rows: Vec<CurveRow>,
}

impl CurveDataset {
    pub fn series_names(&self) -> Vec<&str> {
        let mut names: Vec<&str> = Vec::new();
        for row in &self.rows {
            if names.last() != Some(&row.series.as_str()) {
                names.push(&row.series);
            }
        }
        names
    }

    /// CSV with header `series,support,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("series,support,value\n");
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{}",
                row.series,
                format_sig12(row.support),
                format_sig12(row.value)
            );
        }
        out
    }
}

pub fn export_curves(
    source: &SourceModel,
    target: &TargetSpec,
    results: &[RecalResult],
) -> Result<CurveDataset> {
    target
        .feature_dist()
        .ensure_support(source.support(), "curve export")?;
    let support = source.support();
    let mut rows = Vec::new();
    let mut push = |name: &str, values: &[f64]| {
        rows.extend(support.iter().zip(values).map(|(&s, &v)| CurveRow {
            series: name.to_string(),
            support: s,
            value: v,
        }));
    };
    push("source_features", source.feature_dist().probs());
    push("target_features", target.feature_dist().probs());
    push("source_posterior", source.posterior().values());
    let mut ordered: Vec<&RecalResult> = results.iter().collect();
    ordered.sort_by_key(|r| r.method);
    for r in ordered {
        if !r.posterior.support().eq(support) {
            return Err(RecalError::Structural(format!(
                "{} posterior is on a different support",
                r.method
            )));
        }
        push(r.method.name(), r.posterior.values());
    }
    Ok(CurveDataset { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Vec<f64> {
        (0..=n).map(|i| i as f64 / n as f64).collect()
    }

    #[test]
    fn identity_functional_gives_mean() {
        let d = DiscreteScoreDist::new(vec![0.0, 1.0, 2.0], vec![0.2, 0.3, 0.5]).unwrap();
        let c = PosteriorCurve::new(vec![0.0, 1.0, 2.0], vec![0.1, 0.4, 0.7]).unwrap();
        let id = Functional::Tabulated(TabulatedConcave::from_fn(vec![0.0, 1.0], |u| u).unwrap());
        let m = functional_mean(&d, &c, &id).unwrap();
        assert!((m - mean_under(&d, &c).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn constant_posterior_attains_upper_bound() {
        let d = DiscreteScoreDist::new(vec![0.0, 1.0], vec![0.4, 0.6]).unwrap();
        let c = PosteriorCurve::constant(vec![0.0, 1.0], 0.05).unwrap();
        let m = functional_mean(&d, &c, &Functional::Sqrt).unwrap();
        assert!((m - 0.05f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn sqrt_bounds() {
        let (lo, hi) = functional_bounds(0.05, &Functional::Sqrt).unwrap();
        assert!((lo - 0.05).abs() < 1e-15);
        assert!((hi - 0.223_606_797_749_979).abs() < 1e-15);
        assert!((hi - 0.2236).abs() < 5e-5);
    }

    #[test]
    fn affine_bounds_collapse() {
        let id = Functional::Tabulated(TabulatedConcave::from_fn(vec![0.0, 1.0], |u| u).unwrap());
        let (lo, hi) = functional_bounds(0.3, &id).unwrap();
        assert!((lo - 0.3).abs() < 1e-15 && (hi - 0.3).abs() < 1e-15);
    }

    #[test]
    fn variance_functional_bounds() {
        let c = Functional::Tabulated(TabulatedConcave::from_fn(grid(100), |u| u * (1.0 - u)).unwrap());
        let (lo, hi) = functional_bounds(0.05, &c).unwrap();
        assert_eq!(lo, 0.0);
        assert!((hi - 0.05 * 0.95).abs() < 1e-12);
    }

    #[test]
    fn convex_table_rejected() {
        assert!(TabulatedConcave::from_fn(grid(10), |u| u * u).is_err());
        assert!(TabulatedConcave::from_fn(vec![0.0, 0.5], |u| u).is_err());
        assert!(TabulatedConcave::new(vec![0.0, 1.0], vec![0.0]).is_err());
    }

    #[test]
    fn functional_json_forms() {
        let f: Functional = serde_json::from_str("\"sqrt\"").unwrap();
        assert_eq!(f, Functional::Sqrt);
        let t: Functional =
            serde_json::from_str(r#"{"tabulated": {"grid": [0, 0.5, 1], "values": [0, 0.6, 0.8]}}"#).unwrap();
        assert!((t.eval(0.25) - 0.3).abs() < 1e-15);
        let bad = serde_json::from_str::<Functional>(
            r#"{"tabulated": {"grid": [0, 0.5, 1], "values": [0, 0.1, 1]}}"#,
        );
        assert!(bad.is_err());
    }

    #[test]
    fn sig12_format() {
        assert_eq!(format_sig12(0.05), "0.05");
        assert_eq!(format_sig12(16.0), "16");
        assert_eq!(format_sig12(-2.5e-7), "-0.00000025");
        assert_eq!(format_sig12(0.802_123_456_789_99), "0.80212345679");
        assert_eq!(format_sig12(0.0), "0");
    }

    #[test]
    fn empty_results_give_source_row_and_three_series() {
        let support = vec![0.0, 1.0];
        let src = SourceModel::new(
            DiscreteScoreDist::new(support.clone(), vec![0.5, 0.5]).unwrap(),
            PosteriorCurve::new(support.clone(), vec![0.2, 0.8]).unwrap(),
        )
        .unwrap();
        let tgt = TargetSpec::new(DiscreteScoreDist::new(support, vec![0.3, 0.7]).unwrap(), 0.4).unwrap();
        let table = build_results_table(&src, &tgt, &[], &Functional::Sqrt).unwrap();
        assert_eq!(table.rows.len(), 1);
        assert_eq!(table.rows[0].label, "Source");
        assert!((table.rows[0].implied_auc - 0.8).abs() < 1e-15);
        let curves = export_curves(&src, &tgt, &[]).unwrap();
        assert_eq!(
            curves.series_names(),
            vec!["source_features", "target_features", "source_posterior"]
        );
        assert!(curves.to_csv().starts_with("series,support,value\n"));
    }
}

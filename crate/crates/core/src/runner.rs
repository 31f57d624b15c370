//! Runs a resolved scenario and writes `table.csv`, `curves.csv` and
//! `diagnostics.json`.

use std::io;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::eval::{build_results_table, export_curves, CurveDataset, ResultsTable, OFF_TARGET_TOL};
use crate::methods::{recalibrate_many, MethodId, MethodParams, RecalResult};
use crate::scenario::ResolvedScenario;
use crate::solvers::SolveDiagnostics;

/// Per-method entry of `diagnostics.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodReport {
    pub method: MethodId,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub achieved_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub implied_auc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<MethodParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolveDiagnostics>,
    /// Set when the method failed outright; no table row is produced.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Free-form remark, e.g. a mean that misses the target prior by design.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub target_prior: f64,
    pub source_prior: f64,
    pub all_converged: bool,
    pub methods: Vec<MethodReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub results: Vec<RecalResult>,
    pub table: ResultsTable,
    pub curves: CurveDataset,
    pub diagnostics: Diagnostics,
}

impl RunOutput {
    pub fn all_converged(&self) -> bool {
        self.diagnostics.all_converged
    }

    /// Process exit status: 0 when every method converged, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.all_converged() {
            0
        } else {
            2
        }
    }

    pub fn diagnostics_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.diagnostics).expect("diagnostics serialize");
        s.push('\n');
        s
    }

    pub fn write_to(&self, dir: &Path) -> io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("table.csv"), self.table.to_csv())?;
        std::fs::write(dir.join("curves.csv"), self.curves.to_csv())?;
        std::fs::write(dir.join("diagnostics.json"), self.diagnostics_json())?;
        Ok(())
    }
}

fn note_for(result: &RecalResult, q: f64) -> Option<String> {
    let off = (result.achieved_mean - q).abs();
    (off > OFF_TARGET_TOL).then(|| {
        format!(
            "mean {:.6} differs from target prior {q} by {off:.2e}; {} does not enforce the mean",
            result.achieved_mean, result.method
        )
    })
}

/// Runs every selected method; failures are reported, not propagated.
pub fn run_scenario(sc: &ResolvedScenario) -> Result<RunOutput> {
    let q = sc.target.prior();
    let mut results = Vec::new();
    let mut reports = Vec::new();
    for (method, outcome) in recalibrate_many(&sc.methods, &sc.source, &sc.target, &sc.solver) {
        match outcome {
            Ok(r) => {
                reports.push(MethodReport {
                    method,
                    converged: r.diagnostics.converged,
                    achieved_mean: Some(r.achieved_mean),
                    implied_auc: Some(r.implied_auc),
                    params: Some(r.params),
                    solver: Some(r.diagnostics.clone()),
                    error: None,
                    note: note_for(&r, q),
                });
                results.push(r);
            }
            Err(e) => reports.push(MethodReport {
                method,
                converged: false,
                achieved_mean: None,
                implied_auc: None,
                params: None,
                solver: None,
                error: Some(e.to_string()),
                note: None,
            }),
        }
    }
    let table = build_results_table(&sc.source, &sc.target, &results, &sc.functional)?;
    let curves = export_curves(&sc.source, &sc.target, &results)?;
    let diagnostics = Diagnostics {
        target_prior: q,
        source_prior: sc.source.prior(),
        all_converged: reports.iter().all(|r| r.converged),
        methods: reports,
    };
    Ok(RunOutput {
        results,
        table,
        curves,
        diagnostics,
    })
}

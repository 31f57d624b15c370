use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use recal_core::eval::Functional;
use recal_core::runner::{run_scenario, RunOutput};
use recal_core::scenario::{MethodSelection, ResolvedScenario, Scenario};

/// Recalibrate a binary classifier's posterior to a target prior.
#[derive(Parser)]
#[command(name = "recal", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write table.csv, curves.csv and diagnostics.json.
    Run {
        #[command(flatten)]
        common: Common,
        /// Output directory.
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Print the results table to stdout.
    Table {
        #[command(flatten)]
        common: Common,
        /// Print the CSV form instead of the aligned display.
        #[arg(long)]
        csv: bool,
    },
    /// Write the curve CSV to a file, or stdout when `--out` is omitted.
    Curves {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// `all` or a comma-separated list of method names.
    #[arg(long)]
    methods: Option<String>,
    /// `sqrt` or a JSON file holding a tabulated functional.
    #[arg(long)]
    functional: Option<String>,
    #[arg(long)]
    tol_mean: Option<f64>,
    #[arg(long)]
    tol_auc: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
}

fn load_functional(arg: &str) -> Result<Functional, String> {
    if arg == "sqrt" {
        return Ok(Functional::Sqrt);
    }
    let text = std::fs::read_to_string(arg).map_err(|e| format!("cannot read functional {arg}: {e}"))?;
    serde_json::from_str(&text).map_err(|e| format!("invalid functional in {arg}: {e}"))
}

fn resolve(common: &Common) -> Result<ResolvedScenario, String> {
    let mut scenario = Scenario::from_path(&common.scenario).map_err(|e| e.to_string())?;
    if let Some(m) = &common.methods {
        scenario.methods = MethodSelection::parse_list(m).map_err(|e| format!("--methods: {e}"))?;
    }
    if let Some(f) = &common.functional {
        scenario.functional = load_functional(f)?;
    }
    if let Some(t) = common.tol_mean {
        scenario.solver.tol_mean = t;
    }
    if let Some(t) = common.tol_auc {
        scenario.solver.tol_auc = t;
    }
    if let Some(n) = common.max_iter {
        scenario.solver.max_iter = n;
    }
    scenario.resolve().map_err(|e| e.to_string())
}

fn execute(common: &Common) -> Result<RunOutput, String> {
    let resolved = resolve(common)?;
    run_scenario(&resolved).map_err(|e| e.to_string())
}

fn write_file(path: &Path, contents: &str) -> Result<(), String> {
    std::fs::write(path, contents).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn report_failures(out: &RunOutput) {
    for m in &out.diagnostics.methods {
        if let Some(err) = &m.error {
            eprintln!("{}: failed: {err}", m.method);
        } else if !m.converged {
            eprintln!("{}: did not converge", m.method);
        }
    }
}

fn main_inner(cli: Cli) -> Result<i32, String> {
    let out = match &cli.command {
        Command::Run { common, out: dir } => {
            let out = execute(common)?;
            out.write_to(dir)
                .map_err(|e| format!("cannot write outputs to {}: {e}", dir.display()))?;
            print!("{}", out.table);
            out
        }
        Command::Table { common, csv } => {
            let out = execute(common)?;
            if *csv {
                print!("{}", out.table.to_csv());
            } else {
                print!("{}", out.table);
            }
            out
        }
        Command::Curves { common, out: path } => {
            let out = execute(common)?;
            match path {
                Some(p) => write_file(p, &out.curves.to_csv())?,
                None => print!("{}", out.curves.to_csv()),
            }
            out
        }
    };
    report_failures(&out);
    Ok(out.exit_code())
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

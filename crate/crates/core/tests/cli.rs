use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/example_paper.json");

fn recal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_recal"))
        .args(args)
        .output()
        .expect("spawn recal")
}

fn run_into(dir: &Path, extra: &[&str]) -> Output {
    let out = dir.to_str().unwrap();
    let mut args = vec!["run", "--scenario", FIXTURE, "--out", out];
    args.extend_from_slice(extra);
    recal(&args)
}

fn lines(path: PathBuf) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(str::to_string)
        .collect()
}

fn write_scenario(dir: &Path, json: &str) -> String {
    let path = dir.join("scenario.json");
    std::fs::write(&path, json).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn run_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_into(dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let table = lines(dir.path().join("table.csv"));
    assert_eq!(table[0], "method,mean_probs,auc,mean_functional");
    assert_eq!(table.len(), 10);
    let curves = lines(dir.path().join("curves.csv"));
    assert_eq!(curves[0], "series,support,value");
    assert_eq!(curves.len(), 1 + 11 * 17);
    let diag: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag["all_converged"], true);
    assert_eq!(diag["methods"].as_array().unwrap().len(), 8);
    assert!(diag["methods"][2]["params"]["rho"].as_f64().unwrap() > 0.0);
    let raw = std::fs::read(dir.path().join("table.csv")).unwrap();
    assert!(!raw.contains(&b'\r'));
}

#[test]
fn method_subset_gives_two_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_into(dir.path(), &["--methods", "label_shift"]);
    assert_eq!(out.status.code(), Some(0));
    let table = lines(dir.path().join("table.csv"));
    assert_eq!(table.len(), 3);
    assert!(table[1].starts_with("Source,"));
    assert!(table[2].starts_with("Label shift,0.0601"));
}

#[test]
fn looser_mean_tolerance_keeps_display_table() {
    let table = |extra: &[&str]| {
        let mut args = vec!["table", "--scenario", FIXTURE];
        args.extend_from_slice(extra);
        let out = recal(&args);
        assert_eq!(out.status.code(), Some(0));
        String::from_utf8(out.stdout).unwrap()
    };
    assert_eq!(table(&[]), table(&["--tol-mean", "1e-6"]));

    let iterations = |extra: &[&str]| {
        let dir = tempfile::tempdir().unwrap();
        run_into(dir.path(), extra);
        let diag: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("diagnostics.json")).unwrap()).unwrap();
        diag["methods"][0]["solver"]["iterations"].as_u64().unwrap()
    };
    assert!(iterations(&["--tol-mean", "1e-6"]) < iterations(&[]));
}

#[test]
fn non_convergence_exits_two_and_still_writes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_into(dir.path(), &["--max-iter", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(dir.path().join("table.csv").exists());
    let diag = std::fs::read_to_string(dir.path().join("diagnostics.json")).unwrap();
    assert!(diag.contains("\"converged\": false"));
}

#[test]
fn invalid_prior_exits_one_and_names_key() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(FIXTURE).unwrap().replace("\"prior\": 0.05", "\"prior\": 0");
    let path = write_scenario(dir.path(), &text);
    let out = recal(&["table", "--scenario", &path]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("target.prior"));
}

#[test]
fn unwritable_output_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = run_into(&blocker.join("sub"), &[]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn two_point_capped_scaling_by_hand() {
    // 0.5 * 0.1 t + 0.5 * 0.2 t = 0.3 gives t = 2, so the curve is (0.2, 0.4).
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(
        dir.path(),
        r#"{"source": {"explicit": {"support": [0, 1], "probs": [0.5, 0.5], "posterior": [0.1, 0.2]}},
            "target": {"feature": {"explicit": {"probs": [0.5, 0.5]}}, "prior": 0.3},
            "methods": ["capped_scaling"]}"#,
    );
    let out = recal(&["curves", "--scenario", &path]);
    assert_eq!(out.status.code(), Some(0));
    let csv = String::from_utf8(out.stdout).unwrap();
    let capped: Vec<f64> = csv
        .lines()
        .filter(|l| l.starts_with("capped_scaling,"))
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(capped.len(), 2);
    assert!((capped[0] - 0.2).abs() < 1e-9 && (capped[1] - 0.4).abs() < 1e-9);
}

#[test]
fn tabulated_functional_flag() {
    let dir = tempfile::tempdir().unwrap();
    let func = dir.path().join("c.json");
    // Identity functional: the last column equals the mean column.
    std::fs::write(&func, r#"{"tabulated": {"grid": [0, 1], "values": [0, 1]}}"#).unwrap();
    let out = recal(&["table", "--csv", "--scenario", FIXTURE, "--methods", "fjs", "--functional", func.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    for row in stdout.lines().skip(1) {
        let cols: Vec<f64> = row.split(',').skip(1).map(|c| c.parse().unwrap()).collect();
        assert!((cols[0] - cols[2]).abs() < 1e-11, "{row}");
    }
}

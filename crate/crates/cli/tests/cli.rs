use std::path::Path;
use std::process::{Command, Output};

const HEADER: &str =
    "eta,L,N,h,qfi,cfi,gap,energy0,delta_h,richardson_err,residual,valid,wall_time";

fn starkprobe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_starkprobe"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn small_sweep(out: &Path, workers: &str) -> Output {
    starkprobe(&[
        "sweep",
        "--eta",
        "0,inf",
        "--sizes",
        "4,6,8,10",
        "--h-grid",
        "1e-2:1:5",
        "--workers",
        workers,
        "--out",
        out.to_str().unwrap(),
    ])
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(code(&starkprobe(&["--help"])), 0);
    assert_eq!(code(&starkprobe(&["sweep", "--no-such-flag"])), 1);
    assert_eq!(code(&starkprobe(&["sweep", "--format", "xml"])), 1);
}

#[test]
fn non_integral_filling_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = starkprobe(&[
        "sweep",
        "--sizes",
        "8,10",
        "--filling",
        "1/4",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("N = 2.5"));
}

#[test]
fn sweep_writes_schema_and_is_worker_independent() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(&small_sweep(&a, "1")), 0);
    assert_eq!(code(&small_sweep(&b, "3")), 0);
    let text = std::fs::read_to_string(a.join("sweep.csv")).unwrap();
    assert_eq!(text.lines().next(), Some(HEADER));
    assert!(text.lines().skip(1).any(|l| l.starts_with("inf,")));
    assert_eq!(text, std::fs::read_to_string(b.join("sweep.csv")).unwrap());
}

#[test]
fn analysis_subcommands_read_existing_records() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = starkprobe(&[
        "sweep",
        "--sizes",
        "6,8,10,12",
        "--h-grid",
        "1e-4:1:3",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&sweep), 0);
    let input = dir.path().join("sweep.csv");
    let input = input.to_str().unwrap();

    let peaks = starkprobe(&["peak", "--input", input, "--no-refine"]);
    let text = String::from_utf8_lossy(&peaks.stdout);
    assert!(
        text.starts_with("eta,L,N,h_max,qfi_max,edge_dominated"),
        "{text}"
    );
    assert_eq!(text.lines().count(), 5);

    let beta = starkprobe(&[
        "fit-beta",
        "--input",
        input,
        "--no-refine",
        "--format",
        "json",
    ]);
    assert_eq!(code(&beta), 0, "{}", String::from_utf8_lossy(&beta.stdout));
    let rows: serde_json::Value = serde_json::from_slice(&beta.stdout).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r["error"] == ""));

    let z = starkprobe(&["fit-z", "--input", input, "--no-refine"]);
    assert!(String::from_utf8_lossy(&z.stdout).contains("localized"));
}

#[test]
fn every_fit_failing_is_a_total_failure() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&small_sweep(dir.path(), "0")), 0);
    let input = dir.path().join("sweep.csv");
    // too few interior peaks and no h = 1e-4 sample: no exponent can be fitted
    let out = starkprobe(&[
        "fit-beta",
        "--input",
        input.to_str().unwrap(),
        "--no-refine",
    ]);
    assert_eq!(code(&out), 3);
}

#[test]
fn pipeline_writes_report_and_figures() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "eta = [0.0]\nsizes = [4, 6, 8, 10]\nh_grid = \"1e-2:1:5\"\nseed = 3\n",
    )
    .unwrap();
    let out = starkprobe(&[
        "pipeline",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "4",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        [0, 2].contains(&code(&out)),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["config"]["seed"], 4);
    assert_eq!(report["config"]["sizes"].as_array().unwrap().len(), 4);
    assert!(dir.path().join("qfi_vs_h_eta0.0.svg").exists());
    assert!(dir.path().join("qfi_peak_vs_L.svg").exists());
}

#[test]
fn missing_input_is_a_total_failure() {
    let out = starkprobe(&["peak", "--input", "/nonexistent/sweep.csv"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn oracle_check_passes_on_small_chains() {
    let out = starkprobe(&["oracle-check", "--max-sites", "5", "--eta", "0,inf"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(code(&out), 0, "{text}");
    assert!(text.lines().all(|l| l.starts_with("PASS")));
}

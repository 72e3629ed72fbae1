use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use starkprobe::criticality::{CollapseResult, FitResult, SweepRecord};
use starkprobe::experiment::pipeline::{self, GroundStateEvaluator};
use starkprobe::experiment::records::format_float;
use starkprobe::experiment::{
    analyse_stages, sweep, AnalysisOptions, ConfigLayer, EtaReport, ExperimentConfig, Filling,
    GridSpec, OutputFormat, Stages,
};
use starkprobe::{Error, Eta};

mod oracle_check;

#[derive(Parser, Debug)]
#[command(
    name = "starkprobe",
    version,
    about = "Ground-state Fisher-information sweeps and scaling analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// TOML file with default settings; flags override it.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Interaction exponents, e.g. `0,1,inf`.
    #[arg(long, global = true, value_delimiter = ',', value_parser = parse_eta)]
    eta: Option<Vec<Eta>>,
    /// Chain lengths, e.g. `8,10,12`.
    #[arg(long, global = true, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Excitations per site, e.g. `1/2`.
    #[arg(long, global = true, value_parser = parse_filling)]
    filling: Option<Filling>,
    /// Field grid as `start:stop:per_decade`.
    #[arg(long, global = true, value_parser = parse_grid)]
    h_grid: Option<GridSpec>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Seed for Lanczos start vectors and collapse restarts.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// `csv` or `json`, for the sweep file and for tables on stdout.
    #[arg(long, global = true, value_parser = parse_format)]
    format: Option<OutputFormat>,
    /// Eigensolver residual tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Density multiplier of the grid near each coarse peak.
    #[arg(long, global = true)]
    densify: Option<usize>,
    /// Record per-point wall time (makes the CSV run-dependent).
    #[arg(long, global = true)]
    timings: bool,
    /// Read sweep records from this file instead of running the sweep.
    #[arg(long, global = true, value_name = "PATH")]
    input: Option<PathBuf>,
    /// Analyse the swept records only, without fresh ground-state solves.
    #[arg(long, global = true)]
    no_refine: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate QFI, CFI and gap on the configured grid and write the records.
    Sweep,
    /// Locate the QFI maximum for every (eta, L).
    Peak,
    /// Localised-phase decay exponent of the QFI.
    FitAlpha,
    /// Size exponent of the QFI at the peak and in the extended phase.
    FitBeta,
    /// Gap-closing exponent in the extended, transition and localised regimes.
    FitZ,
    /// Finite-size-scaling collapse for (h_c, alpha, nu).
    Collapse,
    /// Sweep, full analysis, report.json and SVG figures.
    Pipeline,
    /// Compare the fast paths with the brute-force references.
    OracleCheck {
        /// Largest chain checked entrywise.
        #[arg(long, default_value_t = 8)]
        max_sites: usize,
    },
}

fn parse_eta(s: &str) -> Result<Eta, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_filling(s: &str) -> Result<Filling, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_grid(s: &str) -> Result<GridSpec, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_format(s: &str) -> Result<OutputFormat, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Exit statuses.
const CONFIG_ERROR: u8 = 1;
const PARTIAL: u8 = 2;
const TOTAL: u8 = 3;

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::InvalidArguments(_) => CONFIG_ERROR,
            _ => TOTAL,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure {
            code: TOTAL,
            message: e.to_string(),
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure {
            code: TOTAL,
            message: e.to_string(),
        }
    }
}

fn resolve(common: &Common) -> Result<ExperimentConfig, Error> {
    let base = match &common.config {
        Some(path) => ConfigLayer::from_file(path)?,
        None => ConfigLayer::default(),
    };
    let flags = ConfigLayer {
        eta: common.eta.clone(),
        sizes: common.sizes.clone(),
        filling: common.filling,
        h_grid: common.h_grid,
        densify: common.densify,
        tol: common.tol,
        workers: common.workers,
        seed: common.seed,
        out: common.out.clone(),
        format: common.format,
        timings: common.timings.then_some(true),
        ..ConfigLayer::default()
    };
    base.merged(flags).resolve()
}

/// Status from the number of failed items out of `total`.
fn status(failed: usize, total: usize) -> u8 {
    if total > 0 && failed == total {
        TOTAL
    } else if failed > 0 {
        PARTIAL
    } else {
        0
    }
}

fn records(common: &Common, cfg: &ExperimentConfig) -> Result<(Vec<SweepRecord>, usize), Failure> {
    if let Some(path) = &common.input {
        let all = sweep::read_records(path)?;
        let failed = all.iter().filter(|r| !r.valid).count();
        return Ok((all, failed));
    }
    let (outcome, path) = sweep::run_sweep_to_disk(cfg)?;
    eprintln!(
        "sweep: {} rows ({} reused, {} failed) -> {}",
        outcome.total(),
        outcome.reused,
        outcome.failed,
        path.display()
    );
    Ok((outcome.records, outcome.failed))
}

fn analysis(
    common: &Common,
    cfg: &ExperimentConfig,
    stages: Stages,
) -> Result<(Vec<EtaReport>, usize), Failure> {
    let (recs, failed) = records(common, cfg)?;
    if recs.iter().all(|r| !r.valid) {
        return Err(Failure {
            code: TOTAL,
            message: "no valid sweep records to analyse".into(),
        });
    }
    let evaluator = GroundStateEvaluator::new(cfg.fisher_options());
    let ev: Option<&dyn pipeline::Evaluator> = if common.no_refine {
        None
    } else {
        Some(&evaluator)
    };
    Ok((
        analyse_stages(&recs, ev, &AnalysisOptions::default(), stages),
        failed,
    ))
}

#[derive(Serialize)]
struct Row {
    eta: String,
    fields: Vec<(&'static str, String)>,
}

/// Print rows as CSV (header from the first row) or as a JSON array.
fn emit(rows: &[Row], format: OutputFormat) -> Result<(), Failure> {
    let mut out = std::io::stdout().lock();
    match format {
        OutputFormat::Csv => {
            if let Some(first) = rows.first() {
                let names: Vec<&str> = first.fields.iter().map(|f| f.0).collect();
                writeln!(out, "eta,{}", names.join(","))?;
            }
            for r in rows {
                let vals: Vec<&str> = r.fields.iter().map(|f| f.1.as_str()).collect();
                writeln!(out, "{},{}", r.eta, vals.join(","))?;
            }
        }
        OutputFormat::Json => {
            let objs: Vec<serde_json::Value> = rows
                .iter()
                .map(|r| {
                    let mut m = serde_json::Map::new();
                    m.insert("eta".into(), r.eta.clone().into());
                    for (k, v) in &r.fields {
                        let value = v
                            .parse::<f64>()
                            .ok()
                            .filter(|x| x.is_finite())
                            .map(serde_json::Value::from)
                            .unwrap_or_else(|| serde_json::Value::String(v.clone()));
                        m.insert((*k).into(), value);
                    }
                    serde_json::Value::Object(m)
                })
                .collect();
            serde_json::to_writer_pretty(&mut out, &objs)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

fn opt(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

fn fit_row(eta: Eta, rule: &str, fit: Option<&FitResult>, err: Option<&String>) -> Row {
    Row {
        eta: eta.to_string(),
        fields: vec![
            ("rule", rule.to_string()),
            ("exponent", opt(fit.map(|f| f.exponent))),
            ("stderr", opt(fit.map(|f| f.stderr))),
            ("amplitude", opt(fit.map(|f| f.amplitude))),
            ("r_squared", opt(fit.map(|f| f.r_squared))),
            (
                "points",
                fit.map(|f| f.points.to_string()).unwrap_or_default(),
            ),
            ("error", err.cloned().unwrap_or_default().replace(',', ";")),
        ],
    }
}

fn collapse_row(eta: Eta, c: Option<&CollapseResult>, err: Option<&String>) -> Row {
    Row {
        eta: eta.to_string(),
        fields: vec![
            ("h_c", opt(c.map(|c| c.h_c))),
            ("alpha", opt(c.map(|c| c.alpha))),
            ("nu", opt(c.map(|c| c.nu))),
            ("quality", opt(c.map(|c| c.quality))),
            ("h_c_spread", opt(c.map(|c| c.uncertainty.h_c))),
            ("alpha_spread", opt(c.map(|c| c.uncertainty.alpha))),
            ("nu_spread", opt(c.map(|c| c.uncertainty.nu))),
            ("error", err.cloned().unwrap_or_default().replace(',', ";")),
        ],
    }
}

/// Emit `(rule, fit, error key)` rows and derive the exit status.
fn emit_fits<'a, F>(
    reports: &'a [EtaReport],
    format: OutputFormat,
    failed_rows: usize,
    pick: F,
) -> Result<u8, Failure>
where
    F: Fn(&'a EtaReport) -> Vec<(&'static str, Option<&'a FitResult>, &'static str)>,
{
    let mut rows = Vec::new();
    let (mut missing, mut total) = (0, 0);
    for r in reports {
        for (rule, fit, key) in pick(r) {
            total += 1;
            missing += usize::from(fit.is_none());
            rows.push(fit_row(r.eta, rule, fit, r.errors.get(key)));
        }
    }
    emit(&rows, format)?;
    Ok(status(missing, total).max(if failed_rows > 0 { PARTIAL } else { 0 }))
}

fn run(cli: Cli) -> Result<u8, Failure> {
    let common = &cli.common;
    let cfg = resolve(common)?;
    let format = cfg.format;
    match cli.command {
        Command::Sweep => {
            let (outcome, path) = sweep::run_sweep_to_disk(&cfg)?;
            eprintln!(
                "sweep: {} rows ({} reused, {} failed) -> {}",
                outcome.total(),
                outcome.reused,
                outcome.failed,
                path.display()
            );
            Ok(status(outcome.failed, outcome.total()))
        }
        Command::Peak => {
            let (reports, failed) = analysis(common, &cfg, Stages::PEAKS)?;
            let mut rows = Vec::new();
            let mut missing = 0;
            let mut total = 0;
            for r in &reports {
                for (key, err) in r.errors.iter().filter(|(k, _)| k.starts_with("peak")) {
                    eprintln!("eta = {}: {key}: {err}", r.eta);
                    missing += 1;
                }
                total += r.peaks.len();
                for p in &r.peaks {
                    rows.push(Row {
                        eta: r.eta.to_string(),
                        fields: vec![
                            ("L", p.sites.to_string()),
                            ("N", p.excitations.to_string()),
                            ("h_max", format_float(p.h_max)),
                            ("qfi_max", format_float(p.qfi_max)),
                            ("edge_dominated", p.edge_dominated.to_string()),
                        ],
                    });
                }
            }
            emit(&rows, format)?;
            Ok(status(missing, total + missing).max(if failed > 0 { PARTIAL } else { 0 }))
        }
        Command::FitAlpha => {
            let stages = Stages {
                alpha: true,
                ..Stages::PEAKS
            };
            let (reports, failed) = analysis(common, &cfg, stages)?;
            emit_fits(&reports, format, failed, |r| {
                vec![
                    ("h_max", r.alpha.as_ref(), "alpha"),
                    ("origin", r.alpha_origin.as_ref(), "alpha_origin"),
                ]
            })
        }
        Command::FitBeta => {
            let stages = Stages {
                beta: true,
                ..Stages::PEAKS
            };
            let (reports, failed) = analysis(common, &cfg, stages)?;
            emit_fits(&reports, format, failed, |r| {
                vec![
                    ("h_max", r.beta_at_peak.as_ref(), "beta_at_peak"),
                    ("extended", r.beta_extended.as_ref(), "beta_extended"),
                ]
            })
        }
        Command::FitZ => {
            let stages = Stages {
                gap: true,
                ..Stages::PEAKS
            };
            let (reports, failed) = analysis(common, &cfg, stages)?;
            emit_fits(&reports, format, failed, |r| {
                vec![
                    ("extended", r.z_extended.as_ref(), "z_extended"),
                    ("h_max", r.z_transition.as_ref(), "z_transition"),
                    ("localized", r.z_localized.as_ref(), "z_localized"),
                ]
            })
        }
        Command::Collapse => {
            let stages = Stages {
                collapse: true,
                ..Stages::PEAKS
            };
            let (reports, failed) = analysis(common, &cfg, stages)?;
            let rows: Vec<Row> = reports
                .iter()
                .map(|r| collapse_row(r.eta, r.collapse.as_ref(), r.errors.get("collapse")))
                .collect();
            emit(&rows, format)?;
            let missing = reports.iter().filter(|r| r.collapse.is_none()).count();
            Ok(status(missing, reports.len()).max(if failed > 0 { PARTIAL } else { 0 }))
        }
        Command::Pipeline => {
            let report = if common.input.is_some() || common.no_refine {
                let (recs, failed) = records(common, &cfg)?;
                let evaluator = GroundStateEvaluator::new(cfg.fisher_options());
                let ev: Option<&dyn pipeline::Evaluator> = if common.no_refine {
                    None
                } else {
                    Some(&evaluator)
                };
                let opts = AnalysisOptions::default();
                let report = pipeline::PipelineReport {
                    config: Some(cfg.clone()),
                    analysis: opts,
                    records: recs.len(),
                    failed_records: failed,
                    etas: analyse_stages(&recs, ev, &opts, Stages::ALL),
                };
                pipeline::write_report(&cfg.out, &report, &recs)?;
                report
            } else {
                pipeline::run_pipeline(&cfg, &AnalysisOptions::default())?.0
            };
            for r in &report.etas {
                for (key, err) in &r.errors {
                    eprintln!("eta = {}: {key}: {err}", r.eta);
                }
            }
            eprintln!("report -> {}", cfg.out.join("report.json").display());
            if report.records > 0 && report.failed_records == report.records {
                return Ok(TOTAL);
            }
            let empty = report.etas.iter().filter(|e| e.is_empty()).count();
            if report.etas.is_empty() || empty == report.etas.len() {
                return Ok(TOTAL);
            }
            Ok(if report.failed_records > 0 || report.error_count() > 0 {
                PARTIAL
            } else {
                0
            })
        }
        Command::OracleCheck { max_sites } => {
            let etas = common
                .eta
                .clone()
                .unwrap_or_else(oracle_check::standard_etas);
            let lines = oracle_check::run(&etas, max_sites)?;
            let mut out = std::io::stdout().lock();
            let mut failed = 0;
            for line in &lines {
                failed += usize::from(!line.pass);
                writeln!(
                    out,
                    "{} {}",
                    if line.pass { "PASS" } else { "FAIL" },
                    line.text
                )?;
            }
            Ok(status(failed, lines.len()))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { CONFIG_ERROR } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

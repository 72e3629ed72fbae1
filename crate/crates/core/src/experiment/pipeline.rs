//! Sweep → peaks → exponents → collapse → report.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::svg::{Plot, Series};
use super::sweep::{self, SweepOutcome};
use crate::criticality::{
    self, check_scaling_relation, collapse, curves_by_size, fit_alpha, fit_beta, fit_z,
    normalized_qfi_exponent, scaling_series, AlphaOptions, CollapseOptions, CollapseParams,
    CollapseResult, Estimate, FitResult, PeakOptions, ScalingCheck, SweepRecord,
};
use crate::eigensolve;
use crate::error::Result;
use crate::hamiltonian::{Eta, ProbeParams, SectorOperator};
use crate::metrology::{self, FisherOptions};

/// Fresh ground-state quantities for points not on the sweep grid.
pub trait Evaluator {
    fn qfi(&self, params: &ProbeParams) -> Result<f64>;
    fn gap(&self, params: &ProbeParams) -> Result<f64>;
}

pub struct GroundStateEvaluator {
    pub fisher: FisherOptions,
}

impl GroundStateEvaluator {
    pub fn new(fisher: FisherOptions) -> Self {
        Self {
            fisher: FisherOptions {
                with_cfi: false,
                ..fisher
            },
        }
    }
}

impl Evaluator for GroundStateEvaluator {
    fn qfi(&self, params: &ProbeParams) -> Result<f64> {
        Ok(metrology::qfi(params, &self.fisher)?.qfi)
    }

    fn gap(&self, params: &ProbeParams) -> Result<f64> {
        eigensolve::gap(&SectorOperator::build(*params)?, &self.fisher.solver)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    /// Field standing in for the extended phase.
    pub extended_field: f64,
    /// Field standing in for the localised phase.
    pub localized_field: f64,
    pub peak: PeakOptions,
    pub alpha: AlphaOptions,
    pub collapse: CollapseOptions,
    /// Field window of the collapse; `None` uses every swept field.
    pub collapse_window: Option<(f64, f64)>,
    /// Sampling density of the fresh points added to the localised-phase
    /// fit window when an evaluator is available.
    pub alpha_per_decade: usize,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            extended_field: 1e-4,
            localized_field: 1.0,
            peak: PeakOptions::default(),
            alpha: AlphaOptions::default(),
            collapse: CollapseOptions::default(),
            collapse_window: None,
            alpha_per_decade: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizePeak {
    #[serde(rename = "L")]
    pub sites: usize,
    #[serde(rename = "N")]
    pub excitations: usize,
    pub h_max: f64,
    pub qfi_max: f64,
    pub edge_dominated: bool,
    pub gap_at_peak: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtaReport {
    pub eta: Eta,
    pub peaks: Vec<SizePeak>,
    pub beta_at_peak: Option<FitResult>,
    pub beta_extended: Option<FitResult>,
    pub z_extended: Option<FitResult>,
    pub z_transition: Option<FitResult>,
    pub z_localized: Option<FitResult>,
    pub collapse: Option<CollapseResult>,
    /// Localised-phase decay measured from the largest size's `h_max`.
    pub alpha: Option<FitResult>,
    /// Same decay measured from the collapse `h_c`.
    pub alpha_collapse_center: Option<FitResult>,
    /// Same decay measured from `h = 0`, where `h_max` heads as `L` grows.
    pub alpha_origin: Option<FitResult>,
    pub scaling: Option<ScalingCheck>,
    pub beta_minus_z: Option<Estimate>,
    pub errors: BTreeMap<String, String>,
}

impl EtaReport {
    fn new(eta: Eta) -> Self {
        Self {
            eta,
            peaks: Vec::new(),
            beta_at_peak: None,
            beta_extended: None,
            z_extended: None,
            z_transition: None,
            z_localized: None,
            collapse: None,
            alpha: None,
            alpha_collapse_center: None,
            alpha_origin: None,
            scaling: None,
            beta_minus_z: None,
            errors: BTreeMap::new(),
        }
    }

    /// Nothing at all could be extracted.
    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
            && self.beta_extended.is_none()
            && self.z_extended.is_none()
            && self.z_localized.is_none()
            && self.collapse.is_none()
    }

    fn keep<T>(&mut self, what: &str, r: Result<T>) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.errors.insert(what.to_string(), e.to_string());
                None
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub config: Option<ExperimentConfig>,
    pub analysis: AnalysisOptions,
    pub records: usize,
    pub failed_records: usize,
    pub etas: Vec<EtaReport>,
}

impl PipelineReport {
    pub fn error_count(&self) -> usize {
        self.etas.iter().map(|e| e.errors.len()).sum()
    }
}

/// Exact grid value or log–log interpolation between neighbours.
fn value_at(curve: &[(f64, f64)], h: f64) -> Option<f64> {
    if let Some(p) = curve.iter().find(|p| (p.0 / h - 1.0).abs() < 1e-9) {
        return Some(p.1);
    }
    let k = curve.partition_point(|p| p.0 < h);
    if k == 0 || k == curve.len() {
        return None;
    }
    let ((h0, f0), (h1, f1)) = (curve[k - 1], curve[k]);
    if f0 > 0.0 && f1 > 0.0 && h0 > 0.0 {
        let t = (h / h0).ln() / (h1 / h0).ln();
        Some((f0.ln() + t * (f1 / f0).ln()).exp())
    } else {
        Some(f0 + (h - h0) / (h1 - h0) * (f1 - f0))
    }
}

fn gap_curve(records: &[SweepRecord], sites: usize) -> Vec<(f64, f64)> {
    let mut v: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.sites == sites && r.valid)
        .filter_map(|r| r.gap.filter(|g| g.is_finite()).map(|g| (r.h, g)))
        .collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    v
}

/// Which parts of the analysis to run. Peaks are always located.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stages {
    pub beta: bool,
    pub gap: bool,
    pub collapse: bool,
    pub alpha: bool,
}

impl Stages {
    pub const ALL: Stages = Stages {
        beta: true,
        gap: true,
        collapse: true,
        alpha: true,
    };
    pub const PEAKS: Stages = Stages {
        beta: false,
        gap: false,
        collapse: false,
        alpha: false,
    };
}

/// Analyse the records of one `η` (all sizes, one filling).
pub fn analyse_eta(
    eta: Eta,
    records: &[SweepRecord],
    evaluator: Option<&dyn Evaluator>,
    opts: &AnalysisOptions,
) -> EtaReport {
    analyse_eta_stages(eta, records, evaluator, opts, Stages::ALL)
}

pub fn analyse_eta_stages(
    eta: Eta,
    records: &[SweepRecord],
    evaluator: Option<&dyn Evaluator>,
    opts: &AnalysisOptions,
    stages: Stages,
) -> EtaReport {
    let mut report = EtaReport::new(eta);
    let records: Vec<SweepRecord> = records.iter().filter(|r| r.eta == eta).cloned().collect();
    let curves = curves_by_size(&records);
    let fillings: BTreeMap<usize, usize> =
        records.iter().map(|r| (r.sites, r.excitations)).collect();
    let params = |l: usize, h: f64| ProbeParams::unit(l, fillings[&l], eta, h);

    for (&l, curve) in &curves {
        let hs: Vec<f64> = curve.iter().map(|p| p.0).collect();
        let fs: Vec<f64> = curve.iter().map(|p| p.1).collect();
        let peak = match evaluator {
            Some(ev) => {
                criticality::peak_from_scan(|h| ev.qfi(&params(l, h)?), &hs, &fs, &opts.peak)
            }
            None => criticality::scan_peak(&hs, &fs, &opts.peak),
        };
        let Some(peak) = report.keep(&format!("peak L={l}"), peak) else {
            continue;
        };
        let gap_at_peak = if stages.gap {
            let gap = match evaluator {
                Some(ev) => params(l, peak.h_max).and_then(|p| ev.gap(&p)),
                None => value_at(&gap_curve(&records, l), peak.h_max).ok_or_else(|| {
                    crate::Error::InsufficientWindow(format!(
                        "no gap data around h = {}",
                        peak.h_max
                    ))
                }),
            };
            report.keep(&format!("gap at peak L={l}"), gap)
        } else {
            None
        };
        report.peaks.push(SizePeak {
            sites: l,
            excitations: fillings[&l],
            h_max: peak.h_max,
            qfi_max: peak.qfi_max,
            edge_dominated: peak.edge_dominated,
            gap_at_peak,
        });
    }

    if stages.beta || stages.collapse {
        let peak_points: Vec<(usize, f64)> =
            report.peaks.iter().map(|p| (p.sites, p.qfi_max)).collect();
        let beta = fit_beta(&peak_points);
        report.beta_at_peak = report.keep("beta_at_peak", beta);
    }

    let at_field = |what: &str, h: f64, gap: bool| -> Result<Vec<(usize, f64)>> {
        curves
            .keys()
            .map(|&l| {
                let v = match evaluator {
                    Some(ev) => {
                        let p = params(l, h)?;
                        if gap {
                            ev.gap(&p)?
                        } else {
                            ev.qfi(&p)?
                        }
                    }
                    None => {
                        let c = if gap {
                            gap_curve(&records, l)
                        } else {
                            curves[&l].clone()
                        };
                        value_at(&c, h).ok_or_else(|| {
                            crate::Error::InsufficientWindow(format!(
                                "{what}: no data at h = {h} for L = {l}"
                            ))
                        })?
                    }
                };
                Ok((l, v))
            })
            .collect()
    };

    if stages.beta {
        let beta_ext =
            at_field("beta_extended", opts.extended_field, false).and_then(|p| fit_beta(&p));
        report.beta_extended = report.keep("beta_extended", beta_ext);
    }
    if stages.gap {
        let z_ext = at_field("z_extended", opts.extended_field, true).and_then(|p| fit_z(&p));
        report.z_extended = report.keep("z_extended", z_ext);
        let z_loc = at_field("z_localized", opts.localized_field, true).and_then(|p| fit_z(&p));
        report.z_localized = report.keep("z_localized", z_loc);
        let gaps: Vec<(usize, f64)> = report
            .peaks
            .iter()
            .filter_map(|p| p.gap_at_peak.map(|g| (p.sites, g)))
            .collect();
        report.z_transition = report.keep("z_transition", fit_z(&gaps));
    }

    if stages.collapse {
        if report.peaks.is_empty() {
            report
                .errors
                .insert("collapse".into(), "no peak located".into());
        } else {
            let (lo, hi) = opts
                .collapse_window
                .unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
            let series = scaling_series(&records, lo, hi);
            let init = CollapseParams {
                h_c: 0.0,
                alpha: report
                    .beta_at_peak
                    .as_ref()
                    .map_or(4.0, |b| b.exponent.max(0.5)),
                nu: 1.0,
            };
            let c = collapse(&series, init, &opts.collapse);
            report.collapse = report.keep("collapse", c);
        }
    }

    let largest = report.peaks.iter().max_by_key(|p| p.sites).map(|p| p.h_max);
    if let (true, Some(largest)) = (stages.alpha, largest) {
        let mut alpha_records = records.clone();
        if let Some(ev) = evaluator {
            let extra = alpha_window_records(eta, &curves, &fillings, largest, ev, opts);
            alpha_records.extend(report.keep("alpha window", extra).unwrap_or_default());
        }
        let a = fit_alpha(
            &alpha_records,
            largest,
            &AlphaOptions {
                center: None,
                ..opts.alpha
            },
        );
        report.alpha = report.keep("alpha", a);
        if let Some(c) = &report.collapse {
            let a = fit_alpha(
                &alpha_records,
                largest,
                &AlphaOptions {
                    center: Some(c.h_c),
                    ..opts.alpha
                },
            );
            report.alpha_collapse_center = report.keep("alpha_collapse_center", a);
        }
        let a = fit_alpha(
            &alpha_records,
            largest,
            &AlphaOptions {
                center: Some(0.0),
                ..opts.alpha
            },
        );
        report.alpha_origin = report.keep("alpha_origin", a);
    }

    if stages.collapse && stages.beta {
        match (&report.collapse, &report.beta_at_peak) {
            (Some(c), Some(b)) => {
                report.scaling = Some(check_scaling_relation(c.alpha, c.nu, b.exponent))
            }
            _ => {
                report
                    .errors
                    .entry("scaling".into())
                    .or_insert_with(|| "needs collapse and beta".into());
            }
        }
    }
    if stages.beta && stages.gap {
        match (&report.beta_at_peak, &report.z_transition) {
            (Some(b), Some(z)) => report.beta_minus_z = Some(normalized_qfi_exponent(b, z)),
            _ => {
                report
                    .errors
                    .entry("beta_minus_z".into())
                    .or_insert_with(|| "needs beta and z at the peak".into());
            }
        }
    }
    report
}

/// Fresh samples on the localised-phase fit window for the screened sizes.
fn alpha_window_records(
    eta: Eta,
    curves: &BTreeMap<usize, Vec<(f64, f64)>>,
    fillings: &BTreeMap<usize, usize>,
    h_max: f64,
    evaluator: &dyn Evaluator,
    opts: &AnalysisOptions,
) -> Result<Vec<SweepRecord>> {
    let lo = opts.alpha.window_factor * h_max;
    if !(lo < opts.alpha.upper) {
        return Ok(Vec::new());
    }
    let grid = criticality::log_grid(lo, opts.alpha.upper, opts.alpha_per_decade)?;
    let keep = if opts.alpha.screen_sizes == 0 {
        curves.len()
    } else {
        opts.alpha.screen_sizes
    };
    let mut out = Vec::new();
    for &l in curves.keys().rev().take(keep) {
        for &h in &grid {
            if curves[&l].iter().any(|p| (p.0 / h - 1.0).abs() < 1e-9) {
                continue;
            }
            let params = ProbeParams::unit(l, fillings[&l], eta, h)?;
            let qfi = evaluator.qfi(&params)?;
            out.push(SweepRecord {
                qfi,
                cfi: None,
                gap: None,
                energy0: f64::NAN,
                delta_h: f64::NAN,
                richardson_err: f64::NAN,
                residual: f64::NAN,
                valid: true,
                ..SweepRecord::failed(&params, 0.0)
            });
        }
    }
    Ok(out)
}

/// Analyse every `η` present in `records`.
pub fn analyse(
    records: &[SweepRecord],
    evaluator: Option<&dyn Evaluator>,
    opts: &AnalysisOptions,
) -> Vec<EtaReport> {
    analyse_stages(records, evaluator, opts, Stages::ALL)
}

pub fn analyse_stages(
    records: &[SweepRecord],
    evaluator: Option<&dyn Evaluator>,
    opts: &AnalysisOptions,
    stages: Stages,
) -> Vec<EtaReport> {
    let mut etas: Vec<Eta> = Vec::new();
    for r in records {
        if !etas.iter().any(|e| e.sort_key() == r.eta.sort_key()) {
            etas.push(r.eta);
        }
    }
    etas.sort_by(|a, b| a.sort_key().total_cmp(&b.sort_key()));
    etas.into_iter()
        .map(|eta| analyse_eta_stages(eta, records, evaluator, opts, stages))
        .collect()
}

fn eta_tag(eta: Eta) -> String {
    format!("eta{eta}")
}

/// SVG figures for a finished analysis, as `(file name, contents)`.
pub fn figures(records: &[SweepRecord], reports: &[EtaReport]) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut peak_series = Vec::new();
    for rep in reports {
        let recs: Vec<SweepRecord> = records
            .iter()
            .filter(|r| r.eta == rep.eta)
            .cloned()
            .collect();
        let curves = curves_by_size(&recs);
        out.push((
            format!("qfi_vs_h_{}.svg", eta_tag(rep.eta)),
            Plot {
                title: format!("QFI vs field, eta = {}", rep.eta),
                x_label: "h/J".into(),
                y_label: "F_Q".into(),
                log_x: true,
                log_y: true,
                series: curves
                    .iter()
                    .map(|(l, c)| Series {
                        label: format!("L={l}"),
                        points: c.clone(),
                    })
                    .collect(),
            }
            .to_svg(),
        ));
        peak_series.push(Series {
            label: format!("eta={}", rep.eta),
            points: rep
                .peaks
                .iter()
                .map(|p| (p.sites as f64, p.qfi_max))
                .collect(),
        });
        if let Some(c) = &rep.collapse {
            let series = curves
                .iter()
                .map(|(&l, c_l)| {
                    let lf = l as f64;
                    Series {
                        label: format!("L={l}"),
                        points: c_l
                            .iter()
                            .map(|&(h, f)| {
                                (
                                    lf.powf(1.0 / c.nu) * (h - c.h_c),
                                    lf.powf(-c.alpha / c.nu) * f,
                                )
                            })
                            .collect(),
                    }
                })
                .collect::<Vec<_>>();
            let all_positive = series.iter().flat_map(|s| &s.points).all(|p| p.0 > 0.0);
            out.push((
                format!("collapse_{}.svg", eta_tag(rep.eta)),
                Plot {
                    title: format!(
                        "Collapse, eta = {}: h_c = {:.3e}, alpha = {:.3}, nu = {:.3}",
                        rep.eta, c.h_c, c.alpha, c.nu
                    ),
                    x_label: "L^(1/nu) (h - h_c)".into(),
                    y_label: "L^(-alpha/nu) F_Q".into(),
                    log_x: all_positive,
                    log_y: true,
                    series,
                }
                .to_svg(),
            ));
        }
        let mut gap_series = Vec::new();
        let gaps: Vec<(f64, f64)> = rep
            .peaks
            .iter()
            .filter_map(|p| p.gap_at_peak.map(|g| (p.sites as f64, g)))
            .collect();
        gap_series.push(Series {
            label: "h = h_max".into(),
            points: gaps,
        });
        for (label, fit) in [
            ("extended", &rep.z_extended),
            ("localized", &rep.z_localized),
        ] {
            if let Some(f) = fit {
                let pts = rep.peaks.iter().map(|p| {
                    (
                        p.sites as f64,
                        f.amplitude * (p.sites as f64).powf(-f.exponent),
                    )
                });
                gap_series.push(Series {
                    label: format!("{label} fit"),
                    points: pts.collect(),
                });
            }
        }
        out.push((
            format!("gap_vs_L_{}.svg", eta_tag(rep.eta)),
            Plot {
                title: format!("Gap vs size, eta = {}", rep.eta),
                x_label: "L".into(),
                y_label: "Delta E".into(),
                log_x: true,
                log_y: true,
                series: gap_series,
            }
            .to_svg(),
        ));
    }
    out.push((
        "qfi_peak_vs_L.svg".into(),
        Plot {
            title: "Peak QFI vs size".into(),
            x_label: "L".into(),
            y_label: "F_Q(h_max)".into(),
            log_x: true,
            log_y: true,
            series: peak_series,
        }
        .to_svg(),
    ));
    out
}

pub fn write_report(dir: &Path, report: &PipelineReport, records: &[SweepRecord]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    std::fs::write(dir.join("report.json"), text)?;
    for (name, svg) in figures(records, &report.etas) {
        std::fs::write(dir.join(name), svg)?;
    }
    Ok(())
}

/// Full pipeline: resumable sweep, analysis with fresh evaluations, report.
pub fn run_pipeline(
    cfg: &ExperimentConfig,
    opts: &AnalysisOptions,
) -> Result<(PipelineReport, SweepOutcome)> {
    let (outcome, _) = sweep::run_sweep_to_disk(cfg)?;
    let evaluator = GroundStateEvaluator::new(cfg.fisher_options());
    let etas = analyse(&outcome.records, Some(&evaluator), opts);
    let report = PipelineReport {
        config: Some(cfg.clone()),
        analysis: *opts,
        records: outcome.total(),
        failed_records: outcome.failed,
        etas,
    };
    write_report(&cfg.out, &report, &outcome.records)?;
    Ok((report, outcome))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation_between_grid_points() {
        let c = [(1.0, 1.0), (10.0, 100.0)];
        assert!((value_at(&c, 10f64.sqrt()).unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(value_at(&c, 1.0), Some(1.0));
        assert_eq!(value_at(&c, 20.0), None);
    }
}

//! Peak location, power-law exponents and finite-size-scaling collapse.

pub mod collapse;
pub mod simplex;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{Eta, ProbeParams, SectorOperator};
use crate::metrology::{self, FisherOptions, FisherPoint};

pub use collapse::{
    collapse, collapse_quality, synthetic_series, CollapseOptions, CollapseParams, CollapseResult,
    ScalingSeries,
};

/// Largest `|α/ν − β|` still accepted as consistent.
pub const SCALING_TOLERANCE: f64 = 0.35;

/// One sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub eta: Eta,
    #[serde(rename = "L")]
    pub sites: usize,
    #[serde(rename = "N")]
    pub excitations: usize,
    pub h: f64,
    pub qfi: f64,
    pub cfi: Option<f64>,
    pub gap: Option<f64>,
    pub energy0: f64,
    pub delta_h: f64,
    pub richardson_err: f64,
    pub residual: f64,
    pub valid: bool,
    pub wall_time: f64,
}

impl SweepRecord {
    pub fn from_point(p: &FisherPoint, wall_time: f64) -> Self {
        Self {
            eta: p.params.eta,
            sites: p.params.sites,
            excitations: p.params.excitations,
            h: p.params.field,
            qfi: p.qfi,
            cfi: p.cfi,
            gap: p.gap,
            energy0: p.energy0,
            delta_h: p.delta_h,
            richardson_err: p.richardson_err,
            residual: p.residual,
            valid: p.valid,
            wall_time,
        }
    }

    /// Placeholder row for a point whose computation failed.
    pub fn failed(params: &ProbeParams, wall_time: f64) -> Self {
        Self {
            eta: params.eta,
            sites: params.sites,
            excitations: params.excitations,
            h: params.field,
            qfi: f64::NAN,
            cfi: None,
            gap: None,
            energy0: f64::NAN,
            delta_h: f64::NAN,
            richardson_err: f64::NAN,
            residual: f64::NAN,
            valid: false,
            wall_time,
        }
    }

    /// Sort key `(η, L, h)`; `N` breaks ties so mixed fillings stay ordered.
    pub fn order_key(&self) -> (f64, usize, usize, f64) {
        (self.eta.sort_key(), self.sites, self.excitations, self.h)
    }
}

/// Sort records by `(η, L, N, h)`.
pub fn sort_records(records: &mut [SweepRecord]) {
    records.sort_by(|a, b| {
        let (ka, kb) = (a.order_key(), b.order_key());
        ka.0.total_cmp(&kb.0)
            .then(ka.1.cmp(&kb.1))
            .then(ka.2.cmp(&kb.2))
            .then(ka.3.total_cmp(&kb.3))
    });
}

/// Valid `(h, F_Q)` samples grouped by size, each sorted by `h`.
pub fn curves_by_size(records: &[SweepRecord]) -> BTreeMap<usize, Vec<(f64, f64)>> {
    let mut out: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.valid && r.qfi.is_finite()) {
        out.entry(r.sites).or_default().push((r.h, r.qfi));
    }
    for v in out.values_mut() {
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    out
}

/// Collapse input from records restricted to `lo ≤ h ≤ hi`.
pub fn scaling_series(records: &[SweepRecord], lo: f64, hi: f64) -> Vec<ScalingSeries> {
    curves_by_size(records)
        .into_iter()
        .map(|(size, pts)| ScalingSeries {
            size,
            points: pts
                .into_iter()
                .filter(|&(h, _)| h >= lo && h <= hi)
                .collect(),
        })
        .collect()
}

/// `lo..=hi` with `per_decade` logarithmically spaced points per decade.
pub fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) || per_decade == 0 {
        return Err(Error::InvalidArguments(format!(
            "bad log grid {lo}..{hi} at {per_decade}/decade"
        )));
    }
    if hi == lo {
        return Ok(vec![lo]);
    }
    let decades = (hi / lo).log10();
    let steps = ((decades * per_decade as f64) - 1e-9).ceil().max(1.0) as usize;
    let mut grid: Vec<f64> = (0..=steps)
        .map(|k| lo * 10f64.powf(decades * k as f64 / steps as f64))
        .collect();
    grid[0] = lo;
    grid[steps] = hi;
    Ok(grid)
}

// ---------------------------------------------------------------- peaks

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakOptions {
    pub per_decade: usize,
    /// Stop refining once `(b − a)/h` falls below this.
    pub rel_bracket: f64,
    /// When the scan maximum sits on an edge, or on a plateau within this
    /// relative margin of an edge, an interior local maximum is accepted if it
    /// rises this much above the lowest value between it and that edge.
    pub prominence: f64,
}

impl Default for PeakOptions {
    fn default() -> Self {
        Self {
            per_decade: 25,
            rel_bracket: 1e-4,
            prominence: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakResult {
    pub h_max: f64,
    pub qfi_max: f64,
    pub bracket: (f64, f64),
    /// Final relative bracket width.
    pub grid_resolution: f64,
    pub evaluations: usize,
    /// The scan maximum was on the range edge and an interior peak was used.
    pub edge_dominated: bool,
}

fn interior_peak(values: &[f64], from_lower_edge: bool, prominence: f64) -> Option<usize> {
    let n = values.len();
    let mut best: Option<usize> = None;
    for i in 1..n.saturating_sub(1) {
        if !(values[i] >= values[i - 1] && values[i] > values[i + 1]) {
            continue;
        }
        let dip = if from_lower_edge {
            values[..i].iter().copied().fold(f64::INFINITY, f64::min)
        } else {
            values[i + 1..]
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min)
        };
        if values[i] < (1.0 + prominence) * dip {
            continue;
        }
        if best.is_none_or(|b| values[i] > values[b]) {
            best = Some(i);
        }
    }
    best
}

fn select_peak(grid: &[f64], values: &[f64], opts: &PeakOptions) -> Result<(usize, bool)> {
    if grid.len() != values.len() || grid.len() < 3 {
        return Err(Error::InvalidArguments(
            "peak scan needs at least 3 matching points".into(),
        ));
    }
    let n = grid.len();
    let mut argmax = (0..n)
        .max_by(|&a, &b| values[a].total_cmp(&values[b]))
        .expect("non-empty");
    // a maximum on a plateau that stays flat out to an edge belongs to that edge
    let flat = |range: &[f64]| {
        range
            .iter()
            .all(|&v| values[argmax] <= (1.0 + opts.prominence) * v)
    };
    if flat(&values[..argmax]) {
        argmax = 0;
    } else if flat(&values[argmax + 1..]) {
        argmax = n - 1;
    } else {
        return Ok((argmax, false));
    }
    match interior_peak(values, argmax == 0, opts.prominence) {
        Some(i) => Ok((i, true)),
        None => Err(Error::PeakAtBoundary {
            h: grid[argmax],
            qfi: values[argmax],
        }),
    }
}

/// Peak of a scan without further evaluations; the bracket is the
/// neighbouring grid points.
pub fn scan_peak(grid: &[f64], values: &[f64], opts: &PeakOptions) -> Result<PeakResult> {
    let (i, edge_dominated) = select_peak(grid, values, opts)?;
    Ok(PeakResult {
        h_max: grid[i],
        qfi_max: values[i],
        bracket: (grid[i - 1], grid[i + 1]),
        grid_resolution: (grid[i + 1] - grid[i - 1]) / grid[i],
        evaluations: 0,
        edge_dominated,
    })
}

/// Refine a peak from an already evaluated log scan `(grid, values)`.
///
/// The scan maximum is bracketed by its neighbours and refined by golden
/// section in `log h`.
pub fn peak_from_scan<F>(
    mut f: F,
    grid: &[f64],
    values: &[f64],
    opts: &PeakOptions,
) -> Result<PeakResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (i, edge_dominated) = select_peak(grid, values, opts)?;
    let n = grid.len();
    let g = |t: f64| t.exp();
    let (mut a, mut b) = (grid[i - 1].ln(), grid[i + 1].ln());
    let (mut best_h, mut best_f) = (grid[i], values[i]);
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let mut f1 = f(g(x1))?;
    let mut f2 = f(g(x2))?;
    let mut evaluations = n + 2;
    for (x, v) in [(x1, f1), (x2, f2)] {
        if v > best_f {
            best_f = v;
            best_h = g(x);
        }
    }
    while (g(b) - g(a)) / best_h > opts.rel_bracket && evaluations < n + 200 {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = f(g(x1))?;
            if f1 > best_f {
                best_f = f1;
                best_h = g(x1);
            }
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = f(g(x2))?;
            if f2 > best_f {
                best_f = f2;
                best_h = g(x2);
            }
        }
        evaluations += 1;
    }
    let (lo, hi) = (g(a), g(b));
    Ok(PeakResult {
        h_max: best_h,
        qfi_max: best_f,
        bracket: (lo.min(best_h), hi.max(best_h)),
        grid_resolution: (hi - lo) / best_h,
        evaluations,
        edge_dominated,
    })
}

/// Maximise `f` over `range` with a log scan and golden-section refinement.
pub fn find_peak_with<F>(mut f: F, range: (f64, f64), opts: &PeakOptions) -> Result<PeakResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    let grid = log_grid(range.0, range.1, opts.per_decade)?;
    let values = grid.iter().map(|&h| f(h)).collect::<Result<Vec<_>>>()?;
    peak_from_scan(f, &grid, &values, opts)
}

/// Peak of the ground-state QFI in `h` for one `(η, L, N)`.
pub fn find_peak(
    eta: Eta,
    sites: usize,
    excitations: usize,
    range: (f64, f64),
    fisher: &FisherOptions,
    opts: &PeakOptions,
) -> Result<PeakResult> {
    let params = ProbeParams::unit(sites, excitations, eta, range.0)?;
    let op = SectorOperator::build(params)?;
    let fisher = FisherOptions {
        with_cfi: false,
        ..*fisher
    };
    find_peak_with(
        |h| Ok(metrology::qfi_with_operator(&op, h, &fisher)?.qfi),
        range,
        opts,
    )
}

// ---------------------------------------------------------------- fits

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub exponent: f64,
    pub amplitude: f64,
    pub stderr: f64,
    pub r_squared: f64,
    /// Range of the independent variable used.
    pub window: (f64, f64),
    pub points: usize,
}

/// Least-squares line `ln y = ln A + s ln x`; returns `(s, A, stderr(s), R²)`.
fn loglog_line(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidArguments(
            "power-law fit needs at least two points".into(),
        ));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidArguments(
            "power-law fit needs positive finite data".into(),
        ));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArguments(
            "power-law fit needs distinct x values".into(),
        ));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let stderr = if lx.len() > 2 {
        (ssr / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    let r2 = if syy > 0.0 {
        (1.0 - ssr / syy).min(1.0)
    } else {
        1.0
    };
    Ok((slope, intercept.exp(), stderr, r2))
}

/// `y = A x^p`; `exponent` is `p`.
pub fn power_law_fit(xs: &[f64], ys: &[f64]) -> Result<FitResult> {
    let (slope, amplitude, stderr, r_squared) = loglog_line(xs, ys)?;
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(FitResult {
        exponent: slope,
        amplitude,
        stderr,
        r_squared,
        window: (lo, hi),
        points: xs.len(),
    })
}

fn size_fit(points: &[(usize, f64)], sign: f64) -> Result<FitResult> {
    let mut sizes: Vec<usize> = points.iter().map(|p| p.0).collect();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.len() < 4 {
        return Err(Error::InsufficientSizes {
            needed: 4,
            got: sizes.len(),
        });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0 as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let mut fit = power_law_fit(&xs, &ys)?;
    fit.exponent *= sign;
    Ok(fit)
}

/// `F_Q ∝ L^β` from `(L, F_Q)` pairs (at least four sizes).
pub fn fit_beta(points: &[(usize, f64)]) -> Result<FitResult> {
    size_fit(points, 1.0)
}

/// `ΔE ∝ L^{−z}` from `(L, ΔE)` pairs (at least four sizes).
pub fn fit_z(points: &[(usize, f64)]) -> Result<FitResult> {
    size_fit(points, -1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaOptions {
    /// Point subtracted from `h` in the fit; `None` uses `h_max`.
    pub center: Option<f64>,
    /// Window starts at `window_factor · h_max`.
    pub window_factor: f64,
    pub upper: f64,
    /// Successive sizes must agree to this relative difference.
    pub agreement: f64,
    /// Only the largest this many sizes take part in the screen (0 = all).
    pub screen_sizes: usize,
    pub min_points: usize,
}

impl Default for AlphaOptions {
    fn default() -> Self {
        Self {
            center: None,
            window_factor: 3.0,
            upper: 1.0,
            agreement: 0.03,
            screen_sizes: 3,
            min_points: 6,
        }
    }
}

/// Localised-phase decay `F_Q ∝ |h − h_c|^{−α}`.
///
/// Points are kept where every pair of successive sizes (the largest
/// `screen_sizes` of them) agrees within `agreement`; the fit runs on the
/// largest size.
pub fn fit_alpha(records: &[SweepRecord], h_max: f64, opts: &AlphaOptions) -> Result<FitResult> {
    let lo = opts.window_factor * h_max;
    let mut curves = curves_by_size(records);
    if opts.screen_sizes > 0 {
        while curves.len() > opts.screen_sizes {
            curves.pop_first();
        }
    }
    let Some((&largest, ref_curve)) = curves.iter().next_back() else {
        return Err(Error::InsufficientWindow("no valid records".into()));
    };
    let center = opts.center.unwrap_or(h_max);
    let lookup = |curve: &[(f64, f64)], h: f64| {
        curve
            .iter()
            .find(|p| (p.0 - h).abs() <= 1e-12 * h.abs().max(1e-300))
            .map(|p| p.1)
    };
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &(h, f) in ref_curve.iter().filter(|p| p.0 >= lo && p.0 <= opts.upper) {
        let column: Option<Vec<f64>> = curves.values().map(|c| lookup(c, h)).collect();
        let Some(column) = column else { continue };
        let agree = column
            .windows(2)
            .all(|w| (w[1] - w[0]).abs() <= opts.agreement * w[0].abs().max(w[1].abs()));
        if agree && h != center {
            xs.push((h - center).abs());
            ys.push(f);
        }
    }
    if xs.len() < opts.min_points {
        return Err(Error::InsufficientWindow(format!(
            "{} size-independent points in [{lo:.4e}, {}] (L ≤ {largest}), need {}",
            xs.len(),
            opts.upper,
            opts.min_points
        )));
    }
    let mut fit = power_law_fit(&xs, &ys)?;
    fit.exponent = -fit.exponent;
    Ok(fit)
}

// ---------------------------------------------------------------- relations

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingCheck {
    pub alpha_over_nu: f64,
    pub beta: f64,
    pub deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Compare `α/ν` with `β`.
pub fn check_scaling_relation(alpha: f64, nu: f64, beta: f64) -> ScalingCheck {
    let ratio = alpha / nu;
    let deviation = (ratio - beta).abs();
    ScalingCheck {
        alpha_over_nu: ratio,
        beta,
        deviation,
        tolerance: SCALING_TOLERANCE,
        pass: deviation <= SCALING_TOLERANCE,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

/// Exponent `β − z` of the time-normalised QFI.
pub fn normalized_qfi_exponent(beta: &FitResult, z: &FitResult) -> Estimate {
    Estimate {
        value: beta.exponent - z.exponent,
        stderr: beta.stderr.hypot(z.stderr),
    }
}

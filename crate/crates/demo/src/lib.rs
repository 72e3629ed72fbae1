//! Browser bindings: QFI curves, site occupations and a collapse viewer.
//!
//! Results cross the boundary as flat `Float64Array`s so the page needs no
//! glue beyond the generated module.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use wasm_bindgen::prelude::*;

use starkprobe::criticality::{collapse_quality, CollapseParams, ScalingSeries};
use starkprobe::eigensolve::{self, SolverOptions};
use starkprobe::metrology::{self, FisherOptions};
use starkprobe::{Eta, ProbeParams, SectorOperator};

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// Any non-finite `eta` (e.g. `Infinity`) selects nearest-neighbour coupling.
fn eta_of(eta: f64) -> Eta {
    if eta.is_finite() {
        Eta::Finite(eta)
    } else {
        Eta::Infinite
    }
}

fn log_grid(h_min: f64, h_max: f64, points: usize) -> Vec<f64> {
    let (a, b) = (h_min.ln(), h_max.ln());
    (0..points)
        .map(|k| (a + (b - a) * k as f64 / (points.max(2) - 1) as f64).exp())
        .collect()
}

/// QFI and CFI on a log grid: `[h0, qfi0, cfi0, h1, qfi1, cfi1, ...]`.
#[wasm_bindgen]
pub fn qfi_curve(
    sites: usize,
    excitations: usize,
    eta: f64,
    h_min: f64,
    h_max: f64,
    points: usize,
) -> Result<Vec<f64>, JsError> {
    if !(h_min > 0.0 && h_max > h_min) || points < 2 {
        return Err(JsError::new(
            "need 0 < h_min < h_max and at least two points",
        ));
    }
    let op = SectorOperator::build(
        ProbeParams::unit(sites, excitations, eta_of(eta), h_min).map_err(js_err)?,
    )
    .map_err(js_err)?;
    let opts = FisherOptions::default();
    let mut out = Vec::with_capacity(3 * points);
    for h in log_grid(h_min, h_max, points) {
        let p = metrology::qfi_with_operator(&op, h, &opts).map_err(js_err)?;
        out.extend([h, p.qfi, p.cfi.unwrap_or(f64::NAN)]);
    }
    Ok(out)
}

/// Ground-state occupation `⟨n_i⟩` of every site at field `h`.
#[wasm_bindgen]
pub fn occupation_profile(
    sites: usize,
    excitations: usize,
    eta: f64,
    h: f64,
) -> Result<Vec<f64>, JsError> {
    let op = SectorOperator::build(
        ProbeParams::unit(sites, excitations, eta_of(eta), h).map_err(js_err)?,
    )
    .map_err(js_err)?;
    let sol = eigensolve::ground_state(&op, &SolverOptions::default(), false).map_err(js_err)?;
    Ok(occupations(op.basis().states(), &sol.vector0, sites))
}

fn occupations(states: &[u32], amplitudes: &[f64], sites: usize) -> Vec<f64> {
    let mut n = vec![0.0; sites];
    for (&mask, &c) in states.iter().zip(amplitudes) {
        for (i, slot) in n.iter_mut().enumerate() {
            if mask >> i & 1 == 1 {
                *slot += c * c;
            }
        }
    }
    n
}

/// Rescale QFI curves with `(h_c, α, ν)`.
///
/// `curves` is `[L, count, h0, F0, h1, F1, ..., L', count', ...]`. The
/// result has the same layout with `(x, y)` in place of `(h, F)`, followed
/// by the collapse objective as the final element (NaN when the rescaled
/// curves do not overlap enough to score).
#[wasm_bindgen]
pub fn collapse_view(curves: &[f64], h_c: f64, alpha: f64, nu: f64) -> Result<Vec<f64>, JsError> {
    let series = parse_curves(curves).ok_or_else(|| JsError::new("malformed curve buffer"))?;
    let p = CollapseParams { h_c, alpha, nu };
    if !(nu > 0.0) {
        return Err(JsError::new("nu must be positive"));
    }
    let quality = collapse_quality(&series, p, 0.01).unwrap_or(f64::NAN);
    let mut out = Vec::with_capacity(curves.len() + 1);
    for s in &series {
        let l = s.size as f64;
        out.extend([l, s.points.len() as f64]);
        for &(h, f) in &s.points {
            out.extend([l.powf(1.0 / nu) * (h - h_c), l.powf(-alpha / nu) * f]);
        }
    }
    out.push(quality);
    Ok(out)
}

fn parse_curves(flat: &[f64]) -> Option<Vec<ScalingSeries>> {
    let mut series = Vec::new();
    let mut rest = flat;
    while !rest.is_empty() {
        let [size, count, tail @ ..] = rest else {
            return None;
        };
        let count = *count as usize;
        if tail.len() < 2 * count {
            return None;
        }
        let points = tail[..2 * count]
            .chunks_exact(2)
            .map(|c| (c[0], c[1]))
            .collect();
        series.push(ScalingSeries {
            size: *size as usize,
            points,
        });
        rest = &tail[2 * count..];
    }
    Some(series)
}

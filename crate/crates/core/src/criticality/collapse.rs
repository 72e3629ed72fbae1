//! Finite-size-scaling collapse `F = L^{α/ν} g(L^{1/ν}(h − h_c))`.
//!
//! Quality of a candidate `(h_c, α, ν)`: every rescaled point is compared
//! against the other sizes' curves interpolated at the same `x`. The squared
//! mismatch is normalised by `ε²(y² + Y²)` so curves spanning many decades
//! weigh evenly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::simplex::{self, SimplexOptions};
use crate::error::{Error, Result};

/// `(h, F)` samples of one system size, any order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingSeries {
    pub size: usize,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollapseParams {
    pub h_c: f64,
    pub alpha: f64,
    pub nu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollapseOptions {
    pub restarts: usize,
    pub seed: u64,
    /// Relative noise level used in the normalisation.
    pub epsilon: f64,
    /// Relative spread of the restart points in `α` and `ν`.
    pub restart_spread: f64,
    pub min_points: usize,
    pub simplex: SimplexOptions,
}

impl Default for CollapseOptions {
    fn default() -> Self {
        Self {
            restarts: 8,
            seed: 0xc011_a95e,
            epsilon: 0.01,
            restart_spread: 0.2,
            min_points: 15,
            simplex: SimplexOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseResult {
    pub h_c: f64,
    pub alpha: f64,
    pub nu: f64,
    pub quality: f64,
    pub iterations: usize,
    /// Standard deviation of `(h_c, α, ν)` across restart optima.
    pub uncertainty: CollapseParams,
    /// Objective at each restart's final point.
    pub restart_qualities: Vec<f64>,
}

impl CollapseResult {
    pub fn params(&self) -> CollapseParams {
        CollapseParams {
            h_c: self.h_c,
            alpha: self.alpha,
            nu: self.nu,
        }
    }
}

struct Rescaled {
    size: usize,
    xs: Vec<f64>,
    ys: Vec<f64>,
}

fn rescale(series: &[ScalingSeries], p: CollapseParams) -> Vec<Rescaled> {
    series
        .iter()
        .map(|s| {
            let l = s.size as f64;
            let sx = l.powf(1.0 / p.nu);
            let sy = l.powf(-p.alpha / p.nu);
            let mut pts: Vec<(f64, f64)> = s
                .points
                .iter()
                .map(|&(h, f)| (sx * (h - p.h_c), sy * f))
                .collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            Rescaled {
                size: s.size,
                xs: pts.iter().map(|p| p.0).collect(),
                ys: pts.iter().map(|p| p.1).collect(),
            }
        })
        .collect()
}

/// Interpolate `(xs, ys)` at `x`; `None` outside the sampled range.
fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> Option<f64> {
    let (first, last) = (*xs.first()?, *xs.last()?);
    if x < first || x > last {
        return None;
    }
    let k = xs.partition_point(|&v| v < x);
    if k < xs.len() && xs[k] == x {
        return Some(ys[k]);
    }
    let (x0, x1, y0, y1) = (xs[k - 1], xs[k], ys[k - 1], ys[k]);
    if x1 == x0 {
        return Some(0.5 * (y0 + y1));
    }
    if x0 > 0.0 && y0 > 0.0 && y1 > 0.0 {
        let t = (x.ln() - x0.ln()) / (x1.ln() - x0.ln());
        Some((y0.ln() + t * (y1.ln() - y0.ln())).exp())
    } else {
        let t = (x - x0) / (x1 - x0);
        Some(y0 + t * (y1 - y0))
    }
}

/// Collapse objective at `p`. Lower is better; zero is a perfect collapse.
pub fn collapse_quality(series: &[ScalingSeries], p: CollapseParams, epsilon: f64) -> Result<f64> {
    if !(p.nu > 0.0) || !p.alpha.is_finite() || !p.h_c.is_finite() {
        return Err(Error::InvalidArguments(format!(
            "bad collapse parameters {p:?}"
        )));
    }
    let curves = rescale(series, p);
    let mut total = 0.0;
    let mut counted = 0usize;
    for (i, c) in curves.iter().enumerate() {
        let mut contributed = 0usize;
        for (&x, &y) in c.xs.iter().zip(&c.ys) {
            let (mut sum, mut n) = (0.0, 0usize);
            for (j, other) in curves.iter().enumerate() {
                if j == i {
                    continue;
                }
                if let Some(v) = interpolate(&other.xs, &other.ys, x) {
                    sum += v;
                    n += 1;
                }
            }
            if n == 0 {
                continue;
            }
            let mean = sum / n as f64;
            let norm = epsilon * epsilon * (y * y + mean * mean);
            total += if norm > 0.0 {
                (y - mean).powi(2) / norm
            } else {
                0.0
            };
            contributed += 1;
        }
        if contributed < 3 {
            return Err(Error::DegenerateCollapse {
                size: c.size,
                points: contributed,
            });
        }
        counted += contributed;
    }
    Ok(total / counted as f64)
}

fn check_series(series: &[ScalingSeries], min_points: usize) -> Result<()> {
    if series.len() < 3 {
        return Err(Error::InsufficientSizes {
            needed: 3,
            got: series.len(),
        });
    }
    for s in series {
        if s.points.len() < min_points {
            return Err(Error::InsufficientWindow(format!(
                "size {} has {} points, collapse needs {min_points}",
                s.size,
                s.points.len()
            )));
        }
        if s.points
            .iter()
            .any(|&(h, f)| !h.is_finite() || !f.is_finite())
        {
            return Err(Error::InvalidArguments(format!(
                "non-finite data for size {}",
                s.size
            )));
        }
    }
    Ok(())
}

/// Fit `(h_c, α, ν)` by simplex descent with seeded restarts around `init`.
pub fn collapse(
    series: &[ScalingSeries],
    init: CollapseParams,
    opts: &CollapseOptions,
) -> Result<CollapseResult> {
    check_series(series, opts.min_points)?;
    if !(init.nu > 0.0 && init.alpha > 0.0) {
        return Err(Error::InvalidArguments(format!(
            "collapse start must have α, ν > 0, got {init:?}"
        )));
    }
    let h_scale = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.0.abs()))
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let h_c_bound = 0.5 * h_scale;
    let objective = |v: &[f64]| -> f64 {
        let p = CollapseParams {
            h_c: v[0],
            alpha: v[1],
            nu: v[2],
        };
        if !(0.05..=20.0).contains(&p.nu)
            || !(0.0..=40.0).contains(&p.alpha)
            || p.h_c.abs() > h_c_bound
        {
            return f64::INFINITY;
        }
        collapse_quality(series, p, opts.epsilon).unwrap_or(f64::INFINITY)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let h_c_spread = init.h_c.abs().max(0.01 * h_scale);
    let restarts = opts.restarts.max(1);
    let mut finals: Vec<(Vec<f64>, f64)> = Vec::with_capacity(restarts);
    let mut iterations = 0;
    for r in 0..restarts {
        let start = if r == 0 {
            vec![init.h_c, init.alpha, init.nu]
        } else {
            let s = opts.restart_spread;
            vec![
                (init.h_c + h_c_spread * rng.gen_range(-1.0..1.0)).clamp(-h_c_bound, h_c_bound),
                init.alpha * (1.0 + s * rng.gen_range(-1.0..1.0)),
                init.nu * (1.0 + s * rng.gen_range(-1.0..1.0)),
            ]
        };
        let steps = [
            (0.1 * start[0].abs()).max(1e-3 * h_scale),
            0.1 * start[1].abs().max(0.1),
            0.1 * start[2].abs().max(0.1),
        ];
        let out = simplex::minimize(objective, &start, &steps, &opts.simplex);
        iterations += out.iterations;
        finals.push((out.x, out.value));
    }

    let best = finals
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .cloned()
        .expect("at least one restart");
    if !best.1.is_finite() {
        // surface the reason at the starting point
        collapse_quality(series, init, opts.epsilon)?;
        return Err(Error::DegenerateCollapse {
            size: series[0].size,
            points: 0,
        });
    }
    let finite: Vec<&Vec<f64>> = finals
        .iter()
        .filter(|f| f.1.is_finite())
        .map(|f| &f.0)
        .collect();
    let std = |k: usize| {
        let n = finite.len() as f64;
        let mean = finite.iter().map(|v| v[k]).sum::<f64>() / n;
        (finite.iter().map(|v| (v[k] - mean).powi(2)).sum::<f64>() / n).sqrt()
    };
    Ok(CollapseResult {
        h_c: best.0[0],
        alpha: best.0[1],
        nu: best.0[2],
        quality: best.1,
        iterations,
        uncertainty: CollapseParams {
            h_c: std(0),
            alpha: std(1),
            nu: std(2),
        },
        restart_qualities: finals.iter().map(|f| f.1).collect(),
    })
}

/// Samples of `L^{α/ν} g(L^{1/ν}(h − h_c))` with `g(x) = 1/(1 + x²)`.
pub fn synthetic_series(sizes: &[usize], hs: &[f64], p: CollapseParams) -> Vec<ScalingSeries> {
    sizes
        .iter()
        .map(|&l| {
            let lf = l as f64;
            let points = hs
                .iter()
                .map(|&h| {
                    let x = lf.powf(1.0 / p.nu) * (h - p.h_c);
                    (h, lf.powf(p.alpha / p.nu) / (1.0 + x * x))
                })
                .collect();
            ScalingSeries { size: l, points }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64))
            .collect()
    }

    #[test]
    fn interpolation_modes() {
        let xs = [1.0, 10.0];
        let ys = [1.0, 100.0];
        // log-log on positive data
        assert!((interpolate(&xs, &ys, 3.0).unwrap() - 9.0).abs() < 1e-12);
        let xs = [-1.0, 1.0];
        let ys = [0.0, 2.0];
        assert!((interpolate(&xs, &ys, 0.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(interpolate(&xs, &ys, 1.5).is_none());
    }

    #[test]
    fn perfect_collapse_scores_zero() {
        let p = CollapseParams {
            h_c: 0.0,
            alpha: 4.0,
            nu: 1.0,
        };
        let s = synthetic_series(&[8, 12, 16], &log_grid(1e-3, 1.0, 40), p);
        let q = collapse_quality(&s, p, 0.01).unwrap();
        assert!(q < 0.05, "{q}");
        let off = CollapseParams { alpha: 4.5, ..p };
        assert!(collapse_quality(&s, off, 0.01).unwrap() > 1.0);
    }

    #[test]
    fn recovers_generator() {
        let truth = CollapseParams {
            h_c: 0.0,
            alpha: 4.0,
            nu: 1.0,
        };
        let hs = log_grid(1e-3, 1.0, 40);
        let s = synthetic_series(&[8, 10, 12, 14, 16], &hs, truth);
        let init = CollapseParams {
            h_c: 0.01,
            alpha: 3.5,
            nu: 1.2,
        };
        let r = collapse(&s, init, &CollapseOptions::default()).unwrap();
        assert!((r.alpha - 4.0).abs() < 0.08, "{r:?}");
        assert!((r.nu - 1.0).abs() < 0.02, "{r:?}");
        assert!(r.h_c.abs() < 0.02, "{r:?}");
        assert!(r.restart_qualities.iter().all(|&q| r.quality <= q));
    }

    #[test]
    fn too_few_sizes() {
        let p = CollapseParams {
            h_c: 0.0,
            alpha: 4.0,
            nu: 1.0,
        };
        let s = synthetic_series(&[8, 12], &log_grid(1e-3, 1.0, 20), p);
        assert!(matches!(
            collapse(&s, p, &CollapseOptions::default()),
            Err(Error::InsufficientSizes { .. })
        ));
    }

    #[test]
    fn disjoint_windows_are_degenerate() {
        let p = CollapseParams {
            h_c: 0.0,
            alpha: 4.0,
            nu: 1.0,
        };
        let mut s = synthetic_series(&[8, 12, 16], &log_grid(1e-3, 1e-2, 20), p);
        s[2] = synthetic_series(&[16], &log_grid(10.0, 100.0, 20), p).remove(0);
        assert!(matches!(
            collapse_quality(&s, p, 0.01),
            Err(Error::DegenerateCollapse { size: 16, .. })
        ));
    }
}

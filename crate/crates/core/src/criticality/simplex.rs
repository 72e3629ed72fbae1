//! Nelder–Mead simplex minimisation.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplexOptions {
    pub max_iterations: usize,
    /// Stop when the spread of function values across the simplex is below this.
    pub f_tol: f64,
    /// Stop when every vertex is within this (per coordinate) of the best one.
    pub x_tol: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            max_iterations: 2000,
            f_tol: 1e-12,
            x_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimise `f` starting from a simplex with edges `steps` around `start`.
///
/// Non-finite objective values are treated as `+∞`, which keeps the
/// simplex out of forbidden regions.
pub fn minimize<F>(mut f: F, start: &[f64], steps: &[f64], opts: &SimplexOptions) -> SimplexResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = start.len();
    let mut eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut verts: Vec<Vec<f64>> = vec![start.to_vec()];
    for i in 0..n {
        let mut v = start.to_vec();
        v[i] += steps[i];
        verts.push(v);
    }
    let mut vals: Vec<f64> = verts.iter().map(|v| eval(v)).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        verts = order.iter().map(|&i| verts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let spread = (vals[n] - vals[0]).abs();
        let size = verts[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&verts[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if vals[0].is_finite() && spread <= opts.f_tol * (1.0 + vals[0].abs()) && size <= opts.x_tol
        {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..n)
            .map(|k| verts[..n].iter().map(|v| v[k]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&verts[n])
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };

        let reflected = along(-1.0);
        let fr = eval(&reflected);
        if fr < vals[0] {
            let expanded = along(-2.0);
            let fe = eval(&expanded);
            if fe < fr {
                verts[n] = expanded;
                vals[n] = fe;
            } else {
                verts[n] = reflected;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            verts[n] = reflected;
            vals[n] = fr;
            continue;
        }
        let (contracted, fc) = if fr < vals[n] {
            let c = along(-0.5);
            let fc = eval(&c);
            (c, fc)
        } else {
            let c = along(0.5);
            let fc = eval(&c);
            (c, fc)
        };
        if fc < vals[n].min(fr) {
            verts[n] = contracted;
            vals[n] = fc;
            continue;
        }
        // shrink towards the best vertex
        let best = verts[0].clone();
        for i in 1..=n {
            verts[i] = verts[i]
                .iter()
                .zip(&best)
                .map(|(v, b)| b + 0.5 * (v - b))
                .collect();
            vals[i] = eval(&verts[i]);
        }
    }

    let best = (0..=n)
        .min_by(|&a, &b| vals[a].total_cmp(&vals[b]))
        .unwrap_or(0);
    SimplexResult {
        x: verts[best].clone(),
        value: vals[best],
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let r = minimize(
            f,
            &[-1.2, 1.0],
            &[0.1, 0.1],
            &SimplexOptions {
                max_iterations: 5000,
                ..Default::default()
            },
        );
        assert!(r.converged);
        assert!(
            (r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] - 1.0).abs() < 1e-5,
            "{:?}",
            r.x
        );
    }

    #[test]
    fn respects_forbidden_region() {
        let f = |x: &[f64]| {
            if x[0] < 0.5 {
                f64::INFINITY
            } else {
                (x[0] - 0.2).powi(2)
            }
        };
        let r = minimize(f, &[2.0], &[0.3], &SimplexOptions::default());
        assert!(r.x[0] >= 0.5 && r.x[0] < 0.5 + 1e-6, "{:?}", r.x);
    }
}

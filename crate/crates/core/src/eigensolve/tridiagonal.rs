//! Lowest eigenpairs of a small symmetric tridiagonal matrix: Sturm-sequence
//! bisection for the values, inverse iteration for the vectors.

/// Number of eigenvalues strictly below `x`.
fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..diag.len() {
        let b2 = if i == 0 { 0.0 } else { off[i - 1] * off[i - 1] };
        q = diag[i] - x - if i == 0 { 0.0 } else { b2 / q };
        if q == 0.0 {
            q = f64::EPSILON * (diag[i].abs() + off.get(i).copied().unwrap_or(0.0).abs() + 1.0);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn gershgorin(diag: &[f64], off: &[f64]) -> (f64, f64) {
    let n = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r =
            if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    (lo, hi)
}

/// `k`-th smallest eigenvalue (0-based).
pub fn eigenvalue(diag: &[f64], off: &[f64], k: usize) -> f64 {
    let (mut lo, mut hi) = gershgorin(diag, off);
    let scale = lo.abs().max(hi.abs()).max(1.0);
    lo -= 1e-12 * scale;
    hi += 1e-12 * scale;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(diag, off, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Solve `(T - shift) x = rhs` by Gaussian elimination with partial pivoting.
fn shifted_solve(diag: &[f64], off: &[f64], shift: f64, rhs: &mut [f64]) {
    let n = diag.len();
    if n == 1 {
        let d = diag[0] - shift;
        rhs[0] /= if d == 0.0 { f64::EPSILON } else { d };
        return;
    }
    // Row i holds (a[i], b[i], c[i]) at columns (i, i+1, i+2) after pivoting.
    let mut a: Vec<f64> = diag.iter().map(|d| d - shift).collect();
    let mut b: Vec<f64> = off.to_vec();
    b.push(0.0);
    let mut c = vec![0.0; n];
    let mut sub: Vec<f64> = off.to_vec();
    let tiny = f64::EPSILON * (diag.iter().map(|d| d.abs()).fold(0.0, f64::max) + 1.0);

    for i in 0..n - 1 {
        if sub[i].abs() > a[i].abs() {
            // swap rows i and i+1
            let (ai, bi, ci) = (a[i], b[i], c[i]);
            a[i] = sub[i];
            b[i] = a[i + 1];
            c[i] = b[i + 1];
            let next_a = bi;
            let next_b = ci;
            rhs.swap(i, i + 1);
            let m = ai / a[i];
            a[i + 1] = next_a - m * b[i];
            b[i + 1] = next_b - m * c[i];
            rhs[i + 1] -= m * rhs[i];
        } else {
            if a[i] == 0.0 {
                a[i] = tiny;
            }
            let m = sub[i] / a[i];
            a[i + 1] -= m * b[i];
            b[i + 1] -= m * c[i];
            rhs[i + 1] -= m * rhs[i];
        }
        sub[i] = 0.0;
    }
    if a[n - 1] == 0.0 {
        a[n - 1] = tiny;
    }
    for i in (0..n).rev() {
        let mut s = rhs[i];
        if i + 1 < n {
            s -= b[i] * rhs[i + 1];
        }
        if i + 2 < n {
            s -= c[i] * rhs[i + 2];
        }
        rhs[i] = s / a[i];
    }
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

/// Lowest `count` eigenpairs, eigenvalues ascending, vectors orthonormal.
pub fn lowest_eigenpairs(diag: &[f64], off: &[f64], count: usize) -> Vec<(f64, Vec<f64>)> {
    let n = diag.len();
    let count = count.min(n);
    let mut out: Vec<(f64, Vec<f64>)> = Vec::with_capacity(count);
    for k in 0..count {
        let theta = eigenvalue(diag, off, k);
        // Deterministic, non-special start vector.
        let mut y: Vec<f64> = (0..n)
            .map(|i| 1.0 + 0.1 * ((i * 7 + 3) % 11) as f64)
            .collect();
        for _ in 0..3 {
            shifted_solve(diag, off, theta, &mut y);
            for (_, prev) in &out {
                let d: f64 = prev.iter().zip(&y).map(|(a, b)| a * b).sum();
                y.iter_mut().zip(prev).for_each(|(a, b)| *a -= d * b);
            }
            normalize(&mut y);
        }
        out.push((theta, y));
    }
    out
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{dot, normalize, tridiagonal};
use crate::error::{Error, Result};
use crate::hamiltonian::LinearOperator;

#[derive(Debug, Clone)]
pub struct LanczosOutcome {
    /// Ascending Ritz values.
    pub values: Vec<f64>,
    /// Normalised Ritz vectors, same order as `values`.
    pub vectors: Vec<Vec<f64>>,
    /// True residual norms `‖A x − θ x‖`.
    pub residuals: Vec<f64>,
    pub matvecs: usize,
}

/// Orthogonalise `w` against every column of `basis`, twice.
fn reorthogonalize(basis: &[Vec<f64>], w: &mut [f64]) {
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, w);
            w.iter_mut().zip(q).for_each(|(x, qi)| *x -= c * qi);
        }
    }
}

/// Lowest `wanted` eigenpairs of the symmetric operator `op`.
///
/// Runs Lanczos with full reorthogonalisation from `start`. When the Krylov
/// basis reaches `krylov_max` without convergence the iteration restarts from
/// the sum of the current Ritz vectors. Converged means every wanted Ritz pair
/// has true residual `<= tol`.
pub fn lanczos_lowest<O: LinearOperator + ?Sized>(
    op: &O,
    start: &[f64],
    wanted: usize,
    tol: f64,
    max_matvecs: usize,
    krylov_max: usize,
    seed: u64,
) -> Result<LanczosOutcome> {
    let dim = op.dim();
    let wanted = wanted.min(dim).max(1);
    let krylov_max = krylov_max.min(dim).max(wanted + 1).min(dim);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);

    let mut q0 = start.to_vec();
    if normalize(&mut q0) == 0.0 {
        return Err(Error::InvalidArguments(
            "Lanczos start vector is zero".into(),
        ));
    }

    let mut matvecs = 0usize;
    let mut last_residual = f64::INFINITY;
    let mut w = vec![0.0; dim];

    loop {
        let mut basis: Vec<Vec<f64>> = vec![q0.clone()];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut ritz: Vec<(f64, Vec<f64>)> = Vec::new();

        loop {
            let j = basis.len() - 1;
            op.apply_into(&basis[j], &mut w);
            matvecs += 1;
            let a = dot(&basis[j], &w);
            alpha.push(a);
            reorthogonalize(&basis, &mut w);
            let b = normalize(&mut w);

            let size = alpha.len();
            if size >= wanted {
                ritz = tridiagonal::lowest_eigenpairs(&alpha, &beta, wanted);
                let scale = ritz.iter().map(|(t, _)| t.abs()).fold(1.0f64, f64::max);
                let converged = ritz
                    .iter()
                    .all(|(_, y)| (b * y[size - 1]).abs() <= 0.1 * tol);
                let exhausted = size == dim;
                // estimate has reached the rounding floor
                let floor = ritz
                    .iter()
                    .all(|(_, y)| (b * y[size - 1]).abs() <= 1e-3 * f64::EPSILON * scale);
                if converged || exhausted || floor || size >= krylov_max || matvecs >= max_matvecs {
                    break;
                }
            }

            if b <= 10.0 * f64::EPSILON * alpha.iter().map(|x| x.abs()).fold(1.0, f64::max) {
                // Invariant subspace: continue with a fresh random direction.
                let mut fresh: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() - 0.5).collect();
                reorthogonalize(&basis, &mut fresh);
                if normalize(&mut fresh) == 0.0 {
                    break;
                }
                beta.push(0.0);
                basis.push(fresh);
            } else {
                beta.push(b);
                basis.push(w.clone());
            }
        }

        // Ritz vectors from the first alpha.len() basis vectors.
        let size = alpha.len();
        let mut vectors = Vec::with_capacity(ritz.len());
        let mut values = Vec::with_capacity(ritz.len());
        let mut residuals = Vec::with_capacity(ritz.len());
        for (_, y) in &ritz {
            let mut x = vec![0.0; dim];
            for (coef, q) in y.iter().zip(&basis[..size]) {
                x.iter_mut().zip(q).for_each(|(xi, qi)| *xi += coef * qi);
            }
            normalize(&mut x);
            // Rayleigh quotient of the assembled vector
            op.apply_into(&x, &mut w);
            matvecs += 1;
            let rq = dot(&x, &w);
            let r = w
                .iter()
                .zip(&x)
                .map(|(a, b)| (a - rq * b).powi(2))
                .sum::<f64>()
                .sqrt();
            values.push(rq);
            residuals.push(r);
            vectors.push(x);
        }

        let worst = residuals.iter().copied().fold(0.0, f64::max);
        if worst <= tol {
            return Ok(LanczosOutcome {
                values,
                vectors,
                residuals,
                matvecs,
            });
        }
        if matvecs >= max_matvecs || (worst >= last_residual && size == dim) {
            return Err(Error::NoConvergence {
                iterations: matvecs,
                residual: worst,
            });
        }
        last_residual = worst;

        // explicit restart from the combined Ritz vectors
        q0 = vec![0.0; dim];
        for x in &vectors {
            q0.iter_mut().zip(x).for_each(|(a, b)| *a += b);
        }
        normalize(&mut q0);
    }
}

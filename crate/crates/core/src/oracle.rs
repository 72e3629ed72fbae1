//! Brute-force references used to check the fast paths.
//!
//! The full `2^L`-dimensional Hamiltonian is assembled term by term from
//! explicit products of single-site Pauli matrices (complex `σ^y` included)
//! without touching [`crate::basis`] or [`crate::hamiltonian`]'s bit tricks.
//! Sector blocks are cut out by popcount filtering, and ground states come
//! from full dense diagonalisation.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hamiltonian::{Eta, ProbeParams};

/// Largest chain the oracle accepts.
pub const MAX_ORACLE_SITES: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    X,
    Y,
    Z,
}

impl Pauli {
    /// `⟨out|σ|inp⟩` with bit value 1 meaning spin up (`σ^z = +1`).
    fn element(self, out: u8, inp: u8) -> Complex<f64> {
        let zero = Complex::new(0.0, 0.0);
        // row/column 0 is |up>, 1 is |down>
        let (r, c) = (1 - out, 1 - inp);
        match (self, r, c) {
            (Pauli::X, 0, 1) | (Pauli::X, 1, 0) => Complex::new(1.0, 0.0),
            (Pauli::Y, 0, 1) => Complex::new(0.0, -1.0),
            (Pauli::Y, 1, 0) => Complex::new(0.0, 1.0),
            (Pauli::Z, 0, 0) => Complex::new(1.0, 0.0),
            (Pauli::Z, 1, 1) => Complex::new(-1.0, 0.0),
            _ => zero,
        }
    }

    fn flips(self) -> bool {
        !matches!(self, Pauli::Z)
    }
}

/// `coefficient · Π σ^{p_k}_{site_k}` with 1-based sites.
#[derive(Debug, Clone)]
pub struct PauliTerm {
    pub coefficient: f64,
    pub factors: Vec<(usize, Pauli)>,
}

/// Every term of the Hamiltonian, written out literally.
pub fn hamiltonian_terms(params: &ProbeParams) -> Vec<PauliTerm> {
    let l = params.sites;
    let mut terms = Vec::new();
    for i in 1..l {
        for p in [Pauli::X, Pauli::Y] {
            terms.push(PauliTerm {
                coefficient: params.exchange,
                factors: vec![(i, p), (i + 1, p)],
            });
        }
    }
    for i in 1..=l {
        for j in i + 1..=l {
            let d = (j - i) as f64;
            let c = match params.eta {
                Eta::Infinite => {
                    if j - i == 1 {
                        1.0
                    } else {
                        continue;
                    }
                }
                Eta::Finite(e) => d.powf(-e),
            };
            terms.push(PauliTerm {
                coefficient: c,
                factors: vec![(i, Pauli::Z), (j, Pauli::Z)],
            });
        }
    }
    for i in 1..=l {
        terms.push(PauliTerm {
            coefficient: params.field * i as f64,
            factors: vec![(i, Pauli::Z)],
        });
    }
    terms
}

/// Full-space Hamiltonian built from Pauli products.
#[derive(Debug, Clone)]
pub struct DenseReference {
    pub sites: usize,
    pub matrix: DMatrix<f64>,
    /// Largest imaginary part met while summing terms (must be zero).
    pub max_imaginary: f64,
}

impl DenseReference {
    pub fn new(params: &ProbeParams) -> Result<Self> {
        let l = params.sites;
        if l > MAX_ORACLE_SITES {
            return Err(Error::TooLarge {
                dim: 1 << l,
                cap: 1 << MAX_ORACLE_SITES,
            });
        }
        if l == 0 {
            return Err(Error::InvalidArguments(
                "oracle needs at least one site".into(),
            ));
        }
        let full = 1usize << l;
        let mut matrix = DMatrix::<f64>::zeros(full, full);
        let mut max_imaginary: f64 = 0.0;
        for term in hamiltonian_terms(params) {
            for col in 0..full {
                let mut row = col;
                for &(site, p) in &term.factors {
                    if p.flips() {
                        row ^= 1 << (site - 1);
                    }
                }
                let mut amp = Complex::new(term.coefficient, 0.0);
                for &(site, p) in &term.factors {
                    let out = ((row >> (site - 1)) & 1) as u8;
                    let inp = ((col >> (site - 1)) & 1) as u8;
                    amp *= p.element(out, inp);
                }
                max_imaginary = max_imaginary.max(amp.im.abs());
                matrix[(row, col)] += amp.re;
            }
        }
        Ok(Self {
            sites: l,
            matrix,
            max_imaginary,
        })
    }

    /// Full-space masks with `excitations` up spins, ascending.
    pub fn sector_masks(&self, excitations: usize) -> Vec<usize> {
        (0..1usize << self.sites)
            .filter(|m| m.count_ones() as usize == excitations)
            .collect()
    }

    /// Block of the full matrix on the given sector, in ascending-mask order.
    pub fn sector_block(&self, excitations: usize) -> DMatrix<f64> {
        let masks = self.sector_masks(excitations);
        DMatrix::from_fn(masks.len(), masks.len(), |r, c| {
            self.matrix[(masks[r], masks[c])]
        })
    }

    /// Frobenius norm of `[H, S_z]`, `S_z = ½ Σ σ^z`.
    pub fn sz_commutator_norm(&self) -> f64 {
        let full = 1usize << self.sites;
        let sz = |m: usize| m.count_ones() as f64 - 0.5 * self.sites as f64;
        let mut acc = 0.0;
        for r in 0..full {
            for c in 0..full {
                let h = self.matrix[(r, c)];
                if h != 0.0 {
                    acc += (h * (sz(c) - sz(r))).powi(2);
                }
            }
        }
        acc.sqrt()
    }

    /// Sizes of the excitation sectors that the matrix splits into.
    pub fn sector_sizes(&self) -> Vec<usize> {
        (0..=self.sites)
            .map(|n| self.sector_masks(n).len())
            .collect()
    }
}

/// Dense eigen-decomposition of a sector block: `(E0, E1, ψ0)`.
///
/// The ground vector is polished by shifted inverse iteration, since the QR
/// sweep alone does not always reach full accuracy.
pub fn dense_ground_state(block: &DMatrix<f64>) -> (f64, Option<f64>, Vec<f64>) {
    let eig = block.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let e1 = order.get(1).map(|&i| eig.eigenvalues[i]);
    let mut x: DVector<f64> = eig.eigenvectors.column(order[0]).into_owned();
    let mut e0 = eig.eigenvalues[order[0]];
    let n = block.nrows();
    let scale = block.abs().max().max(1.0);
    for _ in 0..6 {
        let r = (block * &x - &x * e0).norm();
        if r <= 1e-14 * scale * (n as f64).sqrt() {
            break;
        }
        let shifted = block - DMatrix::<f64>::identity(n, n) * e0;
        match shifted.lu().solve(&x) {
            Some(y) if y.norm().is_finite() && y.norm() > 0.0 => x = &y / y.norm(),
            _ => break,
        }
        e0 = x.dot(&(block * &x));
    }
    (e0, e1, x.iter().copied().collect())
}

fn oracle_sector_ground_state(params: &ProbeParams) -> Result<(f64, Option<f64>, Vec<f64>)> {
    let reference = DenseReference::new(params)?;
    Ok(dense_ground_state(
        &reference.sector_block(params.excitations),
    ))
}

/// `F_Q = 4(⟨∂ψ|∂ψ⟩ − ⟨ψ|∂ψ⟩²)` with `∂ψ` from a central difference of
/// dense ground states at `h ± δ`, each sign-aligned with `ψ(h)`.
pub fn qfi_by_differentiation(params: &ProbeParams, delta_h: f64) -> Result<f64> {
    if params.sites > MAX_ORACLE_SITES {
        return Err(Error::TooLarge {
            dim: 1 << params.sites,
            cap: 1 << MAX_ORACLE_SITES,
        });
    }
    if !(delta_h > 0.0) {
        return Err(Error::InvalidArguments(format!(
            "delta_h must be positive, got {delta_h}"
        )));
    }
    let h = params.field;
    let (e0, e1, psi) = oracle_sector_ground_state(params)?;
    if let Some(e1) = e1 {
        if e1 - e0 < crate::eigensolve::degeneracy_tolerance(e0) {
            return Err(Error::DegenerateGroundState { gap: e1 - e0 });
        }
    }
    // negative shifted fields are fine for the raw matrix
    let shifted = |field: f64| -> Result<Vec<f64>> {
        let p = ProbeParams { field, ..*params };
        let (_, _, mut v) = oracle_sector_ground_state(&p)?;
        let ov: f64 = v.iter().zip(&psi).map(|(a, b)| a * b).sum();
        if ov < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        Ok(v)
    };
    let plus = shifted(h + delta_h)?;
    let minus = shifted(h - delta_h)?;
    let dpsi: Vec<f64> = plus
        .iter()
        .zip(&minus)
        .map(|(p, m)| (p - m) / (2.0 * delta_h))
        .collect();
    let norm2: f64 = dpsi.iter().map(|x| x * x).sum();
    let proj: f64 = dpsi.iter().zip(&psi).map(|(a, b)| a * b).sum();
    Ok(4.0 * (norm2 - proj * proj))
}

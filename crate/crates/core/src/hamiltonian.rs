//! Sector-restricted Stark Hamiltonian
//!
//! ```text
//! H(h) = J Σ_{i=1}^{L-1} (σx_i σx_{i+1} + σy_i σy_{i+1})
//!      + Σ_{i<j} |i-j|^{-η} σz_i σz_j
//!      + h Σ_{i=1}^{L} i σz_i
//! ```
//!
//! with open boundaries. In the fixed-excitation basis the hopping term flips
//! an anti-aligned neighbour pair with amplitude `2J` and everything else is
//! diagonal.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::basis::SectorBasis;
use crate::error::{Error, Result};

/// Largest sector dimension for which [`SectorOperator::dense_matrix`] is allowed.
pub const DENSE_CAP: usize = 4096;

/// Power-law exponent of the ZZ interaction. `Infinite` is the
/// nearest-neighbour limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Eta {
    Finite(f64),
    Infinite,
}

impl Eta {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_infinite() && value > 0.0 {
            Ok(Eta::Infinite)
        } else if value.is_finite() && value >= 0.0 {
            Ok(Eta::Finite(value))
        } else {
            Err(Error::InvalidArguments(format!(
                "eta must be >= 0, got {value}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Eta::Finite(v) => v,
            Eta::Infinite => f64::INFINITY,
        }
    }

    /// Key usable for sorting and equality that treats `inf` as largest.
    pub fn sort_key(self) -> f64 {
        self.value()
    }
}

impl fmt::Display for Eta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Eta::Finite(v) => write!(f, "{v:?}"),
            Eta::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Eta {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "inf" | "Inf" | "infinity" | "∞" => Ok(Eta::Infinite),
            _ => s
                .parse::<f64>()
                .map_err(|e| Error::InvalidArguments(format!("bad eta {s:?}: {e}")))
                .and_then(Eta::new),
        }
    }
}

impl Serialize for Eta {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Eta::Finite(v) => serializer.serialize_f64(*v),
            Eta::Infinite => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Eta {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Num(v) => Eta::new(v).map_err(serde::de::Error::custom),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// ZZ coupling strength at distance `d >= 1`.
pub fn coupling(eta: Eta, d: usize) -> f64 {
    debug_assert!(d >= 1);
    match eta {
        Eta::Infinite => {
            if d == 1 {
                1.0
            } else {
                0.0
            }
        }
        Eta::Finite(0.0) => 1.0,
        Eta::Finite(e) => (d as f64).powf(-e),
    }
}

/// Physical specification of one Hamiltonian instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeParams {
    pub sites: usize,
    pub excitations: usize,
    pub eta: Eta,
    /// Exchange coupling `J`; the ZZ term carries no factor of `J`.
    pub exchange: f64,
    /// Stark field amplitude `h`.
    pub field: f64,
}

impl ProbeParams {
    pub fn new(
        sites: usize,
        excitations: usize,
        eta: Eta,
        exchange: f64,
        field: f64,
    ) -> Result<Self> {
        let p = Self {
            sites,
            excitations,
            eta,
            exchange,
            field,
        };
        p.validate()?;
        Ok(p)
    }

    /// `J = 1` convenience constructor.
    pub fn unit(sites: usize, excitations: usize, eta: Eta, field: f64) -> Result<Self> {
        Self::new(sites, excitations, eta, 1.0, field)
    }

    pub fn validate(&self) -> Result<()> {
        if excitations_invalid(self.sites, self.excitations) {
            return Err(Error::InvalidArguments(format!(
                "N = {} exceeds L = {}",
                self.excitations, self.sites
            )));
        }
        if let Eta::Finite(e) = self.eta {
            if !(e.is_finite() && e >= 0.0) {
                return Err(Error::InvalidArguments(format!(
                    "eta must be >= 0, got {e}"
                )));
            }
        }
        if !(self.exchange.is_finite() && self.exchange > 0.0) {
            return Err(Error::InvalidArguments(format!(
                "J must be positive, got {}",
                self.exchange
            )));
        }
        if !(self.field.is_finite() && self.field >= 0.0) {
            return Err(Error::InvalidArguments(format!(
                "h must be finite and >= 0, got {}",
                self.field
            )));
        }
        Ok(())
    }

    pub fn with_field(&self, field: f64) -> Self {
        Self { field, ..*self }
    }
}

fn excitations_invalid(sites: usize, excitations: usize) -> bool {
    excitations > sites
}

/// Matrix-free action on plain slices, shared by the eigensolvers.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    /// `y = A x`; both slices have length [`Self::dim`].
    fn apply_into(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
}

/// Nearest-neighbour hopping connectivity in CSR form.
#[derive(Debug)]
struct HopTable {
    offsets: Vec<usize>,
    targets: Vec<u32>,
}

impl HopTable {
    fn build(basis: &SectorBasis) -> Self {
        let sites = basis.sites();
        let mut offsets = Vec::with_capacity(basis.dim() + 1);
        let mut targets = Vec::new();
        offsets.push(0);
        for &mask in basis.states() {
            for i in 0..sites - 1 {
                let pair = (mask >> i) & 0b11;
                if pair == 0b01 || pair == 0b10 {
                    let flipped = mask ^ (0b11 << i);
                    targets.push(basis.rank_unchecked(flipped) as u32);
                }
            }
            offsets.push(targets.len());
        }
        Self { offsets, targets }
    }
}

/// `H(h)` on a [`SectorBasis`]. Cloning and [`Self::at_field`] share the basis,
/// hopping table and field-independent diagonal parts.
#[derive(Debug, Clone)]
pub struct SectorOperator {
    params: ProbeParams,
    basis: Arc<SectorBasis>,
    zz: Arc<Vec<f64>>,
    ramp: Arc<Vec<f64>>,
    hops: Arc<HopTable>,
    diag: Vec<f64>,
}

impl SectorOperator {
    pub fn new(params: ProbeParams, basis: Arc<SectorBasis>) -> Result<Self> {
        params.validate()?;
        if basis.sites() != params.sites || basis.excitations() != params.excitations {
            return Err(Error::DimensionMismatch {
                expected: crate::basis::binomial(params.sites, params.excitations) as usize,
                got: basis.dim(),
            });
        }

        let sites = params.sites;
        let couplings: Vec<f64> = (0..sites)
            .map(|d| if d == 0 { 0.0 } else { coupling(params.eta, d) })
            .collect();
        let mut zz = Vec::with_capacity(basis.dim());
        let mut ramp = Vec::with_capacity(basis.dim());
        let mut z = vec![0.0f64; sites];
        for &mask in basis.states() {
            for (i, zi) in z.iter_mut().enumerate() {
                *zi = if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
            }
            let mut e = 0.0;
            for i in 0..sites {
                for j in i + 1..sites {
                    e += couplings[j - i] * z[i] * z[j];
                }
            }
            zz.push(e);
            ramp.push(
                z.iter()
                    .enumerate()
                    .map(|(i, zi)| (i + 1) as f64 * zi)
                    .sum(),
            );
        }

        let hops = HopTable::build(&basis);
        let mut op = Self {
            params,
            basis,
            zz: Arc::new(zz),
            ramp: Arc::new(ramp),
            hops: Arc::new(hops),
            diag: Vec::new(),
        };
        op.diag = op.diagonal_at(params.field);
        Ok(op)
    }

    /// Build the basis and the operator in one go.
    pub fn build(params: ProbeParams) -> Result<Self> {
        let basis = SectorBasis::new(params.sites, params.excitations)?;
        Self::new(params, Arc::new(basis))
    }

    /// ZZ part plus `h·i·σz_i`, added site by site in the order the
    /// Hamiltonian is written.
    fn diagonal_at(&self, field: f64) -> Vec<f64> {
        let weights: Vec<f64> = (1..=self.params.sites).map(|i| field * i as f64).collect();
        self.basis
            .states()
            .iter()
            .zip(self.zz.iter())
            .map(|(&mask, &e)| {
                weights.iter().enumerate().fold(e, |acc, (i, w)| {
                    if mask >> i & 1 == 1 {
                        acc + w
                    } else {
                        acc - w
                    }
                })
            })
            .collect()
    }

    /// Same operator at another field value. Negative fields are allowed here so
    /// that symmetric finite differences around `h = 0` are possible.
    pub fn at_field(&self, field: f64) -> Self {
        Self {
            params: ProbeParams {
                field,
                ..self.params
            },
            basis: Arc::clone(&self.basis),
            zz: Arc::clone(&self.zz),
            ramp: Arc::clone(&self.ramp),
            hops: Arc::clone(&self.hops),
            diag: self.diagonal_at(field),
        }
    }

    pub fn params(&self) -> &ProbeParams {
        &self.params
    }

    pub fn basis(&self) -> &SectorBasis {
        &self.basis
    }

    pub fn basis_arc(&self) -> Arc<SectorBasis> {
        Arc::clone(&self.basis)
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Diagonal matrix elements (ZZ plus field) in basis order.
    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    /// Field-independent ZZ part of the diagonal.
    pub fn zz_diag(&self) -> &[f64] {
        &self.zz
    }

    /// `Σ_i i σz_i` for each basis state.
    pub fn ramp(&self) -> &[f64] {
        &self.ramp
    }

    /// `H v`.
    pub fn apply_h(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: v.len(),
            });
        }
        let mut out = vec![0.0; v.len()];
        self.apply_into(v, &mut out);
        Ok(out)
    }

    /// Dense sector matrix, for `dim <= DENSE_CAP`.
    pub fn dense_matrix(&self) -> Result<DMatrix<f64>> {
        let dim = self.dim();
        if dim > DENSE_CAP {
            return Err(Error::TooLarge {
                dim,
                cap: DENSE_CAP,
            });
        }
        let hop = 2.0 * self.params.exchange;
        let mut m = DMatrix::zeros(dim, dim);
        for k in 0..dim {
            m[(k, k)] = self.diag[k];
            for &t in &self.hops.targets[self.hops.offsets[k]..self.hops.offsets[k + 1]] {
                m[(k, t as usize)] += hop;
            }
        }
        Ok(m)
    }
}

impl LinearOperator for SectorOperator {
    fn dim(&self) -> usize {
        self.basis.dim()
    }

    #[inline]
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim());
        assert_eq!(y.len(), self.dim());
        let hop = 2.0 * self.params.exchange;
        let offsets = &self.hops.offsets;
        let targets = &self.hops.targets;
        for (k, yk) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for &t in &targets[offsets[k]..offsets[k + 1]] {
                acc += x[t as usize];
            }
            *yk = self.diag[k] * x[k] + hop * acc;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn op(l: usize, n: usize, eta: Eta, h: f64) -> SectorOperator {
        SectorOperator::build(ProbeParams::unit(l, n, eta, h).unwrap()).unwrap()
    }

    #[test]
    fn coupling_limits() {
        assert_eq!(coupling(Eta::Finite(0.0), 7), 1.0);
        assert_eq!(coupling(Eta::Finite(1.0), 2), 0.5);
        assert_eq!(coupling(Eta::Infinite, 2), 0.0);
        assert_eq!(coupling(Eta::Infinite, 1), 1.0);
    }

    #[test]
    fn two_site_sector_matrix() {
        for eta in [Eta::Finite(0.0), Eta::Finite(1.3), Eta::Infinite] {
            for h in [0.0, 0.5, 2.0] {
                let m = op(2, 1, eta, h).dense_matrix().unwrap();
                // states: 01 (site 1 up), 10 (site 2 up)
                assert_relative_eq!(m[(0, 0)], -1.0 - h);
                assert_relative_eq!(m[(1, 1)], -1.0 + h);
                assert_eq!(m[(0, 1)], 2.0);
                assert_eq!(m[(1, 0)], 2.0);
            }
        }
    }

    #[test]
    fn apply_two_site_example() {
        let out = op(2, 1, Eta::Finite(1.0), 0.5)
            .apply_h(&[1.0, 0.0])
            .unwrap();
        assert_relative_eq!(out[0], -1.5);
        assert_relative_eq!(out[1], 2.0);
    }

    #[test]
    fn apply_zero_vector() {
        let o = op(6, 3, Eta::Finite(0.5), 0.2);
        assert!(o
            .apply_h(&vec![0.0; o.dim()])
            .unwrap()
            .iter()
            .all(|&x| x == 0.0));
    }

    #[test]
    fn apply_length_mismatch() {
        let o = op(4, 2, Eta::Finite(1.0), 0.1);
        assert!(matches!(
            o.apply_h(&[1.0; 5]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn dense_cap() {
        let o = op(16, 8, Eta::Finite(1.0), 0.1);
        assert!(matches!(o.dense_matrix(), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn dense_is_symmetric() {
        let m = op(8, 3, Eta::Finite(0.7), 0.3).dense_matrix().unwrap();
        assert_eq!(m, m.transpose());
    }

    #[test]
    fn three_site_diagonal_per_state() {
        // L=3, N=1, eta=2, h=0: per-state evaluation by hand.
        // z-patterns: site1 up (+,-,-), site2 up (-,+,-), site3 up (-,-,+)
        // pairs (1,2) d=1 c=1, (2,3) d=1 c=1, (1,3) d=2 c=1/4
        let m = op(3, 1, Eta::Finite(2.0), 0.0).dense_matrix().unwrap();
        let expect = [
            -1.0 + 1.0 - 0.25, // (+-)(--)(+-): z1z2=-1, z2z3=+1, z1z3=-1
            -1.0 - 1.0 + 0.25,
            1.0 - 1.0 - 0.25,
        ];
        for (k, e) in expect.iter().enumerate() {
            assert_relative_eq!(m[(k, k)], *e, epsilon = 1e-15);
        }
    }

    #[test]
    fn mismatched_basis_rejected() {
        let basis = Arc::new(SectorBasis::new(4, 2).unwrap());
        let p = ProbeParams::unit(4, 1, Eta::Infinite, 0.0).unwrap();
        assert!(matches!(
            SectorOperator::new(p, basis),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn params_validation() {
        assert!(ProbeParams::unit(4, 2, Eta::Finite(1.0), -0.1).is_err());
        assert!(ProbeParams::new(4, 2, Eta::Finite(1.0), 0.0, 0.1).is_err());
        assert!(ProbeParams::unit(4, 2, Eta::Finite(-1.0), 0.1).is_err());
        assert!(ProbeParams::unit(4, 5, Eta::Finite(1.0), 0.1).is_err());
        assert!(Eta::new(f64::NAN).is_err());
    }

    #[test]
    fn eta_text_round_trip() {
        assert_eq!("inf".parse::<Eta>().unwrap(), Eta::Infinite);
        assert_eq!("0.3".parse::<Eta>().unwrap(), Eta::Finite(0.3));
        assert_eq!(Eta::Infinite.to_string(), "inf");
        assert_eq!(Eta::Finite(0.3).to_string(), "0.3");
        assert_eq!(serde_json::to_string(&Eta::Infinite).unwrap(), "\"inf\"");
        let e: Eta = serde_json::from_str("\"inf\"").unwrap();
        assert_eq!(e, Eta::Infinite);
        let e: Eta = serde_json::from_str("2.5").unwrap();
        assert_eq!(e, Eta::Finite(2.5));
    }

    #[test]
    fn zz_is_sector_constant_when_fully_connected() {
        // With eta = 0 the ZZ sum is ((2N-L)^2 - L)/2 for every state.
        for (l, n) in [(8, 4), (9, 2), (10, 7)] {
            let o = op(l, n, Eta::Finite(0.0), 0.0);
            let m = (2 * n) as f64 - l as f64;
            let expected = (m * m - l as f64) / 2.0;
            assert!(o.zz_diag().iter().all(|&z| (z - expected).abs() < 1e-12));
        }
    }
}

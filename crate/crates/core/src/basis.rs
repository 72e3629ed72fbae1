//! Fixed-excitation sector of an `L`-site spin-1/2 chain.
//!
//! Site `i` (1-based, as in the Hamiltonian) maps to bit `i - 1`; a set bit is
//! an up spin, i.e. an excitation with `σ^z = +1`. States are ordered by their
//! integer value, which for a fixed popcount is colexicographic order, so the
//! rank of a mask is its combinadic number.

use crate::error::{Error, Result};

/// Largest chain length representable in the `u32` masks.
pub const MAX_SITES: usize = 32;

/// `binomial(n, k)` for `n <= 64` using the multiplicative recurrence.
///
/// Returns `0` when `k > n`.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as u64
}

#[derive(Debug, Clone)]
pub struct SectorBasis {
    sites: usize,
    excitations: usize,
    states: Vec<u32>,
    // pascal[n][k] = binomial(n, k) for n <= MAX_SITES
    pascal: Vec<[u64; MAX_SITES + 1]>,
}

impl SectorBasis {
    /// Enumerate all `L`-bit masks with exactly `N` set bits in increasing order.
    pub fn new(sites: usize, excitations: usize) -> Result<Self> {
        if !(2..=MAX_SITES).contains(&sites) {
            return Err(Error::InvalidArguments(format!(
                "L = {sites} outside supported range 2..={MAX_SITES}"
            )));
        }
        if excitations > sites {
            return Err(Error::InvalidArguments(format!(
                "N = {excitations} exceeds L = {sites}"
            )));
        }

        let mut pascal = vec![[0u64; MAX_SITES + 1]; MAX_SITES + 1];
        for n in 0..=MAX_SITES {
            pascal[n][0] = 1;
            for k in 1..=n {
                pascal[n][k] = pascal[n - 1][k - 1] + if k < n { pascal[n - 1][k] } else { 0 };
            }
        }

        let dim = pascal[sites][excitations] as usize;
        let mut states = Vec::with_capacity(dim);
        if excitations == 0 {
            states.push(0);
        } else {
            // Gosper's hack: next integer with the same popcount.
            let limit: u64 = 1u64 << sites;
            let mut mask: u64 = (1u64 << excitations) - 1;
            while mask < limit {
                states.push(mask as u32);
                let c = mask & mask.wrapping_neg();
                let r = mask + c;
                mask = (((r ^ mask) >> 2) / c) | r;
            }
        }
        debug_assert_eq!(states.len(), dim);

        Ok(Self {
            sites,
            excitations,
            states,
            pascal,
        })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn excitations(&self) -> usize {
        self.excitations
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[u32] {
        &self.states
    }

    #[inline]
    pub fn state(&self, index: usize) -> u32 {
        self.states[index]
    }

    /// Filling factor `N / L`.
    pub fn filling(&self) -> f64 {
        self.excitations as f64 / self.sites as f64
    }

    /// Ordinal of `mask` in [`Self::states`].
    pub fn rank(&self, mask: u64) -> Result<usize> {
        if mask >> self.sites != 0 || mask.count_ones() as usize != self.excitations {
            return Err(Error::NotInSector {
                mask,
                sites: self.sites,
                excitations: self.excitations,
            });
        }
        Ok(self.rank_unchecked(mask as u32))
    }

    /// Combinadic rank; `mask` must already be in the sector.
    #[inline]
    pub fn rank_unchecked(&self, mask: u32) -> usize {
        let mut rank = 0u64;
        let mut rest = mask;
        let mut k = 1;
        while rest != 0 {
            let pos = rest.trailing_zeros() as usize;
            rank += self.pascal[pos][k];
            k += 1;
            rest &= rest - 1;
        }
        rank as usize
    }

    /// `σ^z` eigenvalue (`±1`) of 1-based site `site` in basis state `index`.
    #[inline]
    pub fn spin_z(&self, index: usize, site: usize) -> f64 {
        if self.states[index] >> (site - 1) & 1 == 1 {
            1.0
        } else {
            -1.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_sites_one_excitation() {
        let b = SectorBasis::new(2, 1).unwrap();
        assert_eq!(b.dim(), 2);
        assert_eq!(b.states(), &[0b01, 0b10]);
        assert_eq!(b.rank(0b01).unwrap(), 0);
        assert_eq!(b.rank(0b10).unwrap(), 1);
    }

    #[test]
    fn four_sites_half_filling() {
        let b = SectorBasis::new(4, 2).unwrap();
        assert_eq!(b.dim(), 6);
        assert_eq!(b.rank(0b0011).unwrap(), 0);
        assert_eq!(b.states().last(), Some(&0b1100));
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(matches!(
            SectorBasis::new(4, 5),
            Err(Error::InvalidArguments(_))
        ));
        assert!(matches!(
            SectorBasis::new(1, 0),
            Err(Error::InvalidArguments(_))
        ));
        assert!(matches!(
            SectorBasis::new(33, 1),
            Err(Error::InvalidArguments(_))
        ));
    }

    #[test]
    fn rank_rejects_out_of_sector_masks() {
        let b = SectorBasis::new(4, 2).unwrap();
        assert!(matches!(b.rank(0b0111), Err(Error::NotInSector { .. })));
        assert!(matches!(b.rank(0b1_0001), Err(Error::NotInSector { .. })));
    }

    #[test]
    fn empty_and_full_sectors() {
        let empty = SectorBasis::new(5, 0).unwrap();
        assert_eq!(empty.states(), &[0]);
        let full = SectorBasis::new(5, 5).unwrap();
        assert_eq!(full.states(), &[0b11111]);
        assert_eq!(full.rank(0b11111).unwrap(), 0);
    }

    #[test]
    fn thirty_two_sites_fit_in_u32() {
        let b = SectorBasis::new(32, 1).unwrap();
        assert_eq!(b.dim(), 32);
        assert_eq!(b.rank(1u64 << 31).unwrap(), 31);
        let b = SectorBasis::new(32, 31).unwrap();
        assert_eq!(b.dim(), 32);
    }
}

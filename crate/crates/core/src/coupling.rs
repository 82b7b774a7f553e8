//! Coupling multi-indices `i ∈ {0,1}^m` and coupling-strength maps.
//!
//! A [`CouplingIndex`] is stored as a bitmask with bit `k` holding the entry
//! for tensor axis `k` (0-based). Its canonical text spelling is a string of
//! `'0'`/`'1'` characters, character `k` being axis `k`; so for rank 2 the
//! mask `0b10` spells `"01"`. "Bitmask order" everywhere in this crate means
//! ascending integer mask.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{LoheError, Result};

/// Tensors of rank above this are rejected; 2^m coupling terms and 32-bit masks.
pub const MAX_RANK: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CouplingIndex {
    rank: usize,
    mask: u32,
}

impl CouplingIndex {
    pub fn from_mask(rank: usize, mask: u32) -> Result<Self> {
        if rank > MAX_RANK {
            return Err(LoheError::param("rank", format!("rank {rank} exceeds {MAX_RANK}")));
        }
        if rank < 32 && mask >> rank != 0 {
            return Err(LoheError::param(
                "mask",
                format!("mask {mask:#b} has bits beyond rank {rank}"),
            ));
        }
        Ok(Self { rank, mask })
    }

    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        let mut mask = 0u32;
        for (k, &b) in bits.iter().enumerate() {
            match b {
                0 => {}
                1 => mask |= 1 << k,
                _ => {
                    return Err(LoheError::param("bits", format!("entry {k} is {b}, not 0/1")));
                }
            }
        }
        Self::from_mask(bits.len(), mask)
    }

    /// Parses the canonical `"0101"` spelling; the empty string is the rank-0 index.
    pub fn parse(key: &str) -> Result<Self> {
        let bits = key
            .chars()
            .map(|c| match c {
                '0' => Ok(0u8),
                '1' => Ok(1u8),
                _ => Err(LoheError::CouplingKey(key.to_string())),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_bits(&bits)
    }

    pub fn zeros(rank: usize) -> Self {
        Self { rank, mask: 0 }
    }

    pub fn ones(rank: usize) -> Self {
        Self {
            rank,
            mask: full_mask(rank),
        }
    }

    /// All `2^rank` indices in bitmask order.
    pub fn all(rank: usize) -> impl Iterator<Item = CouplingIndex> {
        (0..(1u32 << rank)).map(move |mask| CouplingIndex { rank, mask })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn mask(&self) -> u32 {
        self.mask
    }

    pub fn bit(&self, axis: usize) -> u8 {
        ((self.mask >> axis) & 1) as u8
    }

    pub fn bits(&self) -> Vec<u8> {
        (0..self.rank).map(|k| self.bit(k)).collect()
    }

    /// `1 - i`, bitwise.
    pub fn complement(&self) -> Self {
        Self {
            rank: self.rank,
            mask: !self.mask & full_mask(self.rank),
        }
    }

    pub fn count_zeros(&self) -> usize {
        self.rank - self.mask.count_ones() as usize
    }

    /// True when all zeros precede all ones (axis order), i.e. the reshape permutation is the identity.
    pub fn is_standard_form(&self) -> bool {
        let n = self.count_zeros();
        self.mask == full_mask(self.rank) & !full_mask(n)
    }

    pub fn key(&self) -> String {
        (0..self.rank)
            .map(|k| if self.bit(k) == 1 { '1' } else { '0' })
            .collect()
    }
}

fn full_mask(rank: usize) -> u32 {
    if rank >= 32 {
        u32::MAX
    } else {
        (1u32 << rank) - 1
    }
}

impl fmt::Display for CouplingIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.key())
    }
}

/// Map `i ↦ κ_i` over the `2^m` coupling indices of one rank; absent entries are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingSet {
    rank: usize,
    kappas: BTreeMap<u32, f64>,
}

impl CouplingSet {
    pub fn new(rank: usize) -> Self {
        Self {
            rank,
            kappas: BTreeMap::new(),
        }
    }

    /// Builder-style insert; panics on a rank mismatch or non-finite κ, use [`CouplingSet::set`] for fallible input.
    pub fn with(mut self, index: CouplingIndex, kappa: f64) -> Self {
        self.set(index, kappa).expect("valid coupling entry");
        self
    }

    pub fn with_key(self, key: &str, kappa: f64) -> Result<Self> {
        let index = CouplingIndex::parse(key)?;
        let mut out = self;
        out.set(index, kappa)?;
        Ok(out)
    }

    pub fn set(&mut self, index: CouplingIndex, kappa: f64) -> Result<()> {
        if index.rank() != self.rank {
            return Err(LoheError::RankMismatch {
                expected: self.rank,
                found: index.rank(),
            });
        }
        if !kappa.is_finite() {
            return Err(LoheError::NonFinite("coupling strength"));
        }
        if kappa == 0.0 {
            self.kappas.remove(&index.mask());
        } else {
            self.kappas.insert(index.mask(), kappa);
        }
        Ok(())
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn get(&self, index: CouplingIndex) -> f64 {
        self.kappas.get(&index.mask()).copied().unwrap_or(0.0)
    }

    /// Principal coupling κ_{0…0}.
    pub fn principal(&self) -> f64 {
        self.get(CouplingIndex::zeros(self.rank))
    }

    /// Nonzero couplings in bitmask order.
    pub fn active(&self) -> impl Iterator<Item = (CouplingIndex, f64)> + '_ {
        self.kappas.iter().map(move |(&mask, &k)| {
            (
                CouplingIndex {
                    rank: self.rank,
                    mask,
                },
                k,
            )
        })
    }

    pub fn is_empty(&self) -> bool {
        self.kappas.is_empty()
    }

    /// κ_{0…0} > 0 and every other κ ≥ 0: the regime with guaranteed aggregation dichotomy.
    pub fn in_aggregation_regime(&self) -> bool {
        self.principal() > 0.0 && self.kappas.values().all(|&k| k >= 0.0)
    }

    pub fn all_nonnegative(&self) -> bool {
        self.kappas.values().all(|&k| k >= 0.0)
    }

    /// Σ_{i ≠ 0} κ_i.
    pub fn off_principal_sum(&self) -> f64 {
        self.kappas
            .iter()
            .filter(|(&mask, _)| mask != 0)
            .map(|(_, &k)| k)
            .sum()
    }

    pub fn to_key_map(&self) -> BTreeMap<String, f64> {
        self.active().map(|(i, k)| (i.key(), k)).collect()
    }

    pub fn from_key_map(rank: usize, map: &BTreeMap<String, f64>) -> Result<Self> {
        let mut set = CouplingSet::new(rank);
        for (key, &kappa) in map {
            let index = CouplingIndex::parse(key)?;
            if index.rank() != rank {
                return Err(LoheError::CouplingKey(key.clone()));
            }
            set.set(index, kappa)?;
        }
        Ok(set)
    }
}

impl Serialize for CouplingIndex {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.key())
    }
}

impl<'de> Deserialize<'de> for CouplingIndex {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let key = String::deserialize(d)?;
        CouplingIndex::parse(&key).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_round_trip_and_order() {
        let keys: Vec<String> = CouplingIndex::all(2).map(|i| i.key()).collect();
        assert_eq!(keys, vec!["00", "10", "01", "11"]);
        for k in &keys {
            assert_eq!(&CouplingIndex::parse(k).unwrap().key(), k);
        }
        assert_eq!(CouplingIndex::parse("").unwrap().rank(), 0);
    }

    #[test]
    fn rejects_bad_keys() {
        assert!(CouplingIndex::parse("012").is_err());
        assert!(CouplingIndex::parse("0a").is_err());
        assert!(CouplingIndex::from_mask(2, 0b100).is_err());
    }

    #[test]
    fn complement_and_standard_form() {
        let i = CouplingIndex::parse("010").unwrap();
        assert_eq!(i.complement().key(), "101");
        assert!(!i.is_standard_form());
        assert!(CouplingIndex::parse("0011").unwrap().is_standard_form());
        assert!(CouplingIndex::parse("").unwrap().is_standard_form());
        assert!(CouplingIndex::ones(3).is_standard_form());
        assert!(!CouplingIndex::parse("10").unwrap().is_standard_form());
    }

    #[test]
    fn coupling_set_regime_flags() {
        let c = CouplingSet::new(2)
            .with_key("00", 1.0)
            .unwrap()
            .with_key("11", 0.3)
            .unwrap();
        assert!(c.in_aggregation_regime());
        assert_eq!(c.off_principal_sum(), 0.3);
        let c = c.with_key("01", -0.1).unwrap();
        assert!(!c.in_aggregation_regime());
        let only_off = CouplingSet::new(1).with_key("1", 1.0).unwrap();
        assert!(!only_off.in_aggregation_regime());
        assert!(CouplingSet::new(1).with_key("01", 1.0).is_err());
    }

    #[test]
    fn zero_kappa_is_absent() {
        let c = CouplingSet::new(1).with_key("0", 0.0).unwrap();
        assert!(c.is_empty());
    }
}

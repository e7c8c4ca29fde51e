//! Bloom filter over a packed bit array, with the hash subset supplied per
//! call so one filter can serve keys with customized hash chains.

use crate::error::{HabfError, Result};
use crate::hashing::{HashFamily, HashId, PreparedKey};

/// A Bloom filter of `m` bits whose per-key hash set is chosen by the
/// caller. [`BloomFilter::insert`] and [`BloomFilter::contains`] use the
/// default set `h0`; the `_with` variants accept any `k` distinct member ids
/// of the same family, which is how customized chains are queried.
///
/// Bits are stored in 64-bit words; bit `i` lives at word `i / 64`, bit
/// position `i % 64`, so the byte serialization is little-endian in both
/// byte and bit order.
#[derive(Clone, Debug)]
pub struct BloomFilter {
    m: u64,
    k: u16,
    h0: Vec<HashId>,
    family: HashFamily,
    words: Vec<u64>,
    ones: u64,
}

impl BloomFilter {
    /// Creates an all-zero filter of `m` bits with default hash set `h0`.
    ///
    /// Requirements: `m >= 1`, `1 <= h0.len() <= 64`, ids in `h0` distinct
    /// and valid for `family`, and `m >= h0.len()`.
    pub fn new(m: u64, h0: Vec<HashId>, family: HashFamily) -> Result<Self> {
        if m == 0 {
            return Err(HabfError::Config("bloom filter needs at least 1 bit".into()));
        }
        if h0.is_empty() || h0.len() > 64 {
            return Err(HabfError::Config(format!(
                "default hash set must have 1..=64 members, got {}",
                h0.len()
            )));
        }
        if (h0.len() as u64) > m {
            return Err(HabfError::Config(format!(
                "bit count {m} is smaller than the hash count {}",
                h0.len()
            )));
        }
        let mut sorted = h0.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(HabfError::Config("default hash set has duplicate ids".into()));
        }
        if sorted[0] == 0 || *sorted.last().unwrap() > family.size() {
            return Err(HabfError::Config(format!(
                "default hash set ids must lie in 1..={}",
                family.size()
            )));
        }
        let words = vec![0u64; m.div_ceil(64) as usize];
        Ok(Self {
            m,
            k: h0.len() as u16,
            h0,
            family,
            words,
            ones: 0,
        })
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    /// Number of hashes in the default set.
    pub fn k(&self) -> u16 {
        self.k
    }

    pub fn h0(&self) -> &[HashId] {
        &self.h0
    }

    pub fn family(&self) -> &HashFamily {
        &self.family
    }

    /// Number of set bits.
    pub fn popcount(&self) -> u64 {
        self.ones
    }

    /// Fraction of bits still zero.
    pub fn fraction_zero_bits(&self) -> f64 {
        (self.m - self.ones) as f64 / self.m as f64
    }

    #[inline]
    pub fn test_bit(&self, i: u64) -> bool {
        assert!(i < self.m, "bit {i} out of range for {} bits", self.m);
        self.words[(i / 64) as usize] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub fn set_bit(&mut self, i: u64) {
        assert!(i < self.m, "bit {i} out of range for {} bits", self.m);
        let w = &mut self.words[(i / 64) as usize];
        let mask = 1u64 << (i % 64);
        if *w & mask == 0 {
            *w |= mask;
            self.ones += 1;
        }
    }

    #[inline]
    pub fn clear_bit(&mut self, i: u64) {
        assert!(i < self.m, "bit {i} out of range for {} bits", self.m);
        let w = &mut self.words[(i / 64) as usize];
        let mask = 1u64 << (i % 64);
        if *w & mask != 0 {
            *w &= !mask;
            self.ones -= 1;
        }
    }

    /// Inserts `key` under the default hash set.
    pub fn insert(&mut self, key: &[u8]) {
        let pk = self.family.prepare(key);
        for i in 0..self.k as usize {
            let id = self.h0[i];
            let bit = pk.eval(id, self.m);
            let w = &mut self.words[(bit / 64) as usize];
            let mask = 1u64 << (bit % 64);
            if *w & mask == 0 {
                *w |= mask;
                self.ones += 1;
            }
        }
    }

    /// Inserts `key` under an arbitrary hash set of the same arity.
    ///
    /// # Panics
    ///
    /// Panics if `ids.len() != self.k()`.
    pub fn insert_with(&mut self, key: &[u8], ids: &[HashId]) {
        assert_eq!(
            ids.len(),
            self.k as usize,
            "hash set arity {} does not match filter arity {}",
            ids.len(),
            self.k
        );
        let pk = self.family.prepare(key);
        for &id in ids {
            let bit = pk.eval(id, self.m);
            let w = &mut self.words[(bit / 64) as usize];
            let mask = 1u64 << (bit % 64);
            if *w & mask == 0 {
                *w |= mask;
                self.ones += 1;
            }
        }
    }

    /// Membership test under the default hash set.
    #[inline]
    pub fn contains(&self, key: &[u8]) -> bool {
        self.contains_prepared(&self.family.prepare(key), &self.h0)
    }

    /// Membership test under an arbitrary hash set of the same arity.
    ///
    /// # Panics
    ///
    /// Panics if `ids.len() != self.k()`.
    #[inline]
    pub fn contains_with(&self, key: &[u8], ids: &[HashId]) -> bool {
        assert_eq!(
            ids.len(),
            self.k as usize,
            "hash set arity {} does not match filter arity {}",
            ids.len(),
            self.k
        );
        self.contains_prepared(&self.family.prepare(key), ids)
    }

    /// Membership test for an already prepared key; `ids` arity is the
    /// caller's responsibility here, which the build pipeline uses to test
    /// partial prefixes cheaply.
    #[inline]
    pub(crate) fn contains_prepared(&self, pk: &PreparedKey<'_>, ids: &[HashId]) -> bool {
        ids.iter().all(|&id| {
            let bit = pk.eval(id, self.m);
            self.words[(bit / 64) as usize] >> (bit % 64) & 1 == 1
        })
    }

    /// Raw bit array, little-endian bytes, `ceil(m / 8)` long; bits past `m`
    /// are zero.
    pub fn bit_bytes(&self) -> Vec<u8> {
        let n = self.m.div_ceil(8) as usize;
        let mut out = vec![0u8; n];
        for (i, w) in self.words.iter().enumerate() {
            let bytes = w.to_le_bytes();
            let start = i * 8;
            let take = bytes.len().min(n - start.min(n));
            out[start..start + take].copy_from_slice(&bytes[..take]);
        }
        out
    }

    /// Rebuilds a filter from [`Self::bit_bytes`] output. The byte length
    /// must be exactly `ceil(m / 8)` and bits at positions `>= m` must be
    /// zero.
    pub(crate) fn from_bit_bytes(
        m: u64,
        h0: Vec<HashId>,
        family: HashFamily,
        bytes: &[u8],
    ) -> Result<Self> {
        let mut filter = Self::new(m, h0, family)?;
        let expect = m.div_ceil(8) as usize;
        if bytes.len() != expect {
            return Err(HabfError::Config(format!(
                "bit array length {} does not match {expect} bytes for {m} bits",
                bytes.len()
            )));
        }
        for (i, &b) in bytes.iter().enumerate() {
            let word = i / 8;
            filter.words[word] |= u64::from(b) << (8 * (i % 8));
        }
        if !m.is_multiple_of(8) {
            let last = bytes[expect - 1];
            if u32::from(last >> (m % 8)) != 0 {
                return Err(HabfError::Config(format!(
                    "bit array has set bits past position {m}"
                )));
            }
        }
        filter.ones = filter.words.iter().map(|w| u64::from(w.count_ones())).sum();
        Ok(filter)
    }
}

/// Closed-form false-positive rate `(1 - e^{-k/b})^k` of a Bloom filter with
/// `k` hashes and `b` bits per key.
pub fn theoretical_fpr(k: u32, bits_per_key: f64) -> f64 {
    assert!(k >= 1, "k must be at least 1");
    assert!(
        bits_per_key.is_finite() && bits_per_key > 0.0,
        "bits per key must be positive"
    );
    (1.0 - (-(f64::from(k)) / bits_per_key).exp()).powi(k as i32)
}

/// Hash count minimizing the false-positive rate at `bits_per_key` bits per
/// key: `round(ln 2 * b)`, at least 1.
pub fn optimal_k(bits_per_key: f64) -> u32 {
    assert!(
        bits_per_key.is_finite() && bits_per_key > 0.0,
        "bits per key must be positive"
    );
    ((std::f64::consts::LN_2 * bits_per_key).round() as u32).max(1)
}

//! The global hash family `H` shared by the Bloom filter and the cell array.
//!
//! Members of a family are addressed by 1-based [`HashId`]s; id 0 is the
//! reserved sentinel stored in empty cells and never names a real member. A
//! family is fully determined by its 64-bit seed, its size, and its
//! [`FamilyMode`], so filters rebuilt from the same parameters evaluate
//! identically across runs and platforms.
//!
//! Three realizations share one interface:
//!
//! * [`FamilyMode::Seeded`] — member `i` is the base hash re-seeded with a
//!   per-member seed; every evaluation costs one full hash of the key.
//! * [`FamilyMode::DoubleHashing`] — one 128-bit hash of the key yields a
//!   base pair `(h1, h2)`, and member `i` evaluates to
//!   `(h1 + (i-1)*h2) mod range`. Arbitrarily many members then cost a single
//!   hash computation per key; this is the realization used by the fast
//!   build.
//! * [`FamilyMode::Distinct`] — members cycle through genuinely different
//!   byte-at-a-time algorithms (djb2, sdbm, FNV-1a, ...), each perturbed by a
//!   per-member seed and finalized with a 64-bit avalanche so outputs are
//!   uniform. This mode exists as the extension point for families whose
//!   members are not a single re-seeded primitive.
//!
//! Hash outputs map to `[0, range)` with the multiply-shift reduction
//! `(h * range) >> 64`, which is branch-free and bias-free for ranges far
//! below 2^64. The double-hashing chain instead reduces its base pair once
//! and advances with exact mod-`range` arithmetic, preserving the affine
//! recurrence `g_{i+1} - g_i ≡ h2 (mod range)`.

use std::cell::Cell;

use xxhash_rust::xxh3::{xxh3_128_with_seed, xxh3_64_with_seed};

use crate::error::{HabfError, Result};

/// 1-based index of a member within a [`HashFamily`].
pub type HashId = u16;

/// Sentinel id stored in empty cells; never a valid family member.
pub const EMPTY_ID: HashId = 0;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// Deterministic 64-bit avalanche mixer used for seed derivation throughout
/// the crate (the SplitMix64 finalizer).
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    z
}

/// Maps a full-width hash to `[0, range)` without modulo bias.
#[inline]
pub(crate) fn reduce(h: u64, range: u64) -> u64 {
    (((h as u128) * (range as u128)) >> 64) as u64
}

/// How the members of a family are realized. See the module docs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum FamilyMode {
    /// Independently re-seeded base hash per member.
    Seeded,
    /// One 128-bit hash per key; members are an affine chain over its halves.
    DoubleHashing,
    /// Genuinely different per-member byte-loop algorithms.
    Distinct,
}

/// A deterministic family of hash functions over byte-string keys.
#[derive(Clone, Debug)]
pub struct HashFamily {
    seed: u64,
    size: u16,
    mode: FamilyMode,
    /// Per-member derived seeds, indexed directly by id (slot 0 unused).
    member_seeds: Vec<u64>,
}

/// Constructs a [`FamilyMode::Seeded`] family, the default realization.
pub fn make_family(seed: u64, size: u16) -> Result<HashFamily> {
    HashFamily::new(seed, size, FamilyMode::Seeded)
}

impl HashFamily {
    /// Creates a family of `size` members derived from `seed`.
    ///
    /// `size` must be at least 2 (double hashing and filter configurations
    /// both need a second member).
    pub fn new(seed: u64, size: u16, mode: FamilyMode) -> Result<Self> {
        if size < 2 {
            return Err(HabfError::Config(format!(
                "hash family needs at least 2 members, got {size}"
            )));
        }
        let member_seeds = (0..=u64::from(size))
            .map(|i| mix64(seed.wrapping_add(i.wrapping_mul(GOLDEN))))
            .collect();
        Ok(Self {
            seed,
            size,
            mode,
            member_seeds,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn size(&self) -> u16 {
        self.size
    }

    pub fn mode(&self) -> FamilyMode {
        self.mode
    }

    /// Evaluates member `id` on `key`, mapped to `[0, range)`.
    ///
    /// # Panics
    ///
    /// Panics if `id` is 0 or exceeds the family size, or if `range` is 0.
    #[inline]
    pub fn eval(&self, id: HashId, key: &[u8], range: u64) -> u64 {
        self.prepare(key).eval(id, range)
    }

    /// Performs the per-key preprocessing shared by every member evaluation
    /// on `key`. In [`FamilyMode::DoubleHashing`] this is where the single
    /// hash computation happens; evaluating members of the returned
    /// [`PreparedKey`] is then hash-free.
    #[inline]
    pub fn prepare<'a>(&'a self, key: &'a [u8]) -> PreparedKey<'a> {
        let base = match self.mode {
            FamilyMode::DoubleHashing => Some(self.digest_pair(key)),
            FamilyMode::Seeded | FamilyMode::Distinct => None,
        };
        PreparedKey {
            family: self,
            key,
            base,
            cache: Cell::new(DhCache::empty()),
        }
    }

    /// The key's raw 128-bit base pair, computed in one hash call. Chain
    /// evaluation in [`FamilyMode::DoubleHashing`] derives every member from
    /// this pair, so callers that store it can re-derive positions later
    /// without touching the key bytes again.
    #[inline]
    pub(crate) fn digest_pair(&self, key: &[u8]) -> (u64, u64) {
        debug_assert!(
            self.mode == FamilyMode::DoubleHashing,
            "base pairs drive chains only in double-hashing mode",
        );
        let h = xxh3_128_with_seed(key, self.member_seeds[1]);
        (h as u64, (h >> 64) as u64)
    }

    /// Returns the first `count` indices of the double-hashing chain
    /// `g_i = (h1 + (i-1) * h2) mod range`, where `(h1, h2)` is the key's
    /// reduced base pair. Chain element `i` equals `eval(i, key, range)` when
    /// the family is in [`FamilyMode::DoubleHashing`]; for other modes the
    /// base pair is the first two members, making this a mode-independent way
    /// to derive many indices from two evaluations.
    ///
    /// # Panics
    ///
    /// Panics if `count` is 0 or `range` is 0.
    pub fn double_hash_indices(&self, key: &[u8], range: u64, count: u16) -> Vec<u64> {
        assert!(count >= 1, "count must be at least 1");
        assert!(range >= 1, "range must be at least 1");
        let (b1, b2) = match self.mode {
            FamilyMode::DoubleHashing => {
                let h = xxh3_128_with_seed(key, self.member_seeds[1]);
                (h as u64, (h >> 64) as u64)
            }
            FamilyMode::Seeded | FamilyMode::Distinct => {
                (self.raw_member(1, key), self.raw_member(2, key))
            }
        };
        let h1 = reduce(b1, range);
        let h2 = reduce(b2, range);
        let mut out = Vec::with_capacity(count as usize);
        let mut g = h1;
        for _ in 0..count {
            out.push(g);
            g += h2;
            if g >= range {
                g -= range;
            }
        }
        out
    }

    /// Full-width (unreduced) output of member `id` for the non-chained
    /// modes.
    #[inline]
    fn raw_member(&self, id: HashId, key: &[u8]) -> u64 {
        debug_assert!(id >= 1 && id <= self.size);
        let seed = self.member_seeds[id as usize];
        match self.mode {
            FamilyMode::Seeded => xxh3_64_with_seed(key, seed),
            FamilyMode::Distinct => classic_hash((id as usize - 1) % CLASSIC_ALGOS, seed, key),
            FamilyMode::DoubleHashing => unreachable!("chained mode has no per-member raw hash"),
        }
    }
}

/// Memo for the reduced double-hashing chain state of one `(key, range)`
/// pair, so consecutive member evaluations advance by one addition.
#[derive(Clone, Copy)]
struct DhCache {
    range: u64,
    b1r: u64,
    b2r: u64,
    last_id: HashId,
    last_g: u64,
}

impl DhCache {
    fn empty() -> Self {
        DhCache {
            range: 0,
            b1r: 0,
            b2r: 0,
            last_id: 0,
            last_g: 0,
        }
    }
}

/// A key with its per-key hash preprocessing done; see
/// [`HashFamily::prepare`]. Borrows the key and family, so it is meant for
/// the span of one operation, not for storage.
pub struct PreparedKey<'a> {
    family: &'a HashFamily,
    key: &'a [u8],
    /// Raw (unreduced) chain base pair; `Some` only in double-hashing mode.
    base: Option<(u64, u64)>,
    cache: Cell<DhCache>,
}

impl<'a> PreparedKey<'a> {
    pub fn key(&self) -> &'a [u8] {
        self.key
    }

    /// Evaluates member `id` on the prepared key, mapped to `[0, range)`.
    ///
    /// # Panics
    ///
    /// Panics if `id` is 0 or exceeds the family size, or if `range` is 0.
    #[inline]
    pub fn eval(&self, id: HashId, range: u64) -> u64 {
        assert!(
            id >= 1 && id <= self.family.size,
            "hash id {id} outside family of size {}",
            self.family.size
        );
        assert!(range >= 1, "range must be at least 1");
        match self.base {
            None => reduce(self.family.raw_member(id, self.key), range),
            Some((b1, b2)) => self.chain_eval(b1, b2, id, range),
        }
    }

    /// Evaluates each id in `ids` into `out` (cleared first). Equivalent to
    /// mapping [`Self::eval`] over `ids`.
    #[inline]
    pub fn positions(&self, ids: &[HashId], range: u64, out: &mut Vec<u64>) {
        out.clear();
        out.extend(ids.iter().map(|&id| self.eval(id, range)));
    }

    #[inline]
    fn chain_eval(&self, b1: u64, b2: u64, id: HashId, range: u64) -> u64 {
        debug_assert!(range < 1 << 62, "range too large for chained arithmetic");
        let mut c = self.cache.get();
        if c.range != range {
            c = DhCache {
                range,
                b1r: reduce(b1, range),
                b2r: reduce(b2, range),
                last_id: 1,
                last_g: reduce(b1, range),
            };
        }
        let g = if id == c.last_id {
            c.last_g
        } else if id == c.last_id + 1 {
            let mut g = c.last_g + c.b2r;
            if g >= range {
                g -= range;
            }
            g
        } else {
            let steps = u64::from(id - 1);
            // steps * b2r stays below 2^126; one u128 mod covers every case.
            ((u128::from(c.b1r) + u128::from(steps) * u128::from(c.b2r)) % u128::from(range)) as u64
        };
        c.last_id = id;
        c.last_g = g;
        self.cache.set(c);
        g
    }
}

const CLASSIC_ALGOS: usize = 8;

/// One of the classic byte-at-a-time string hashes, perturbed by `seed` and
/// finalized with [`mix64`] so the output fills all 64 bits.
fn classic_hash(alg: usize, seed: u64, key: &[u8]) -> u64 {
    let mut h: u64 = match alg {
        0 => 5381 ^ seed,           // djb2
        1 => seed,                  // sdbm
        2 => 0xcbf2_9ce4_8422_2325, // fnv-1a (seed folded per byte)
        3 => seed,                  // bkdr
        4 => seed,                  // one-at-a-time
        5 => seed & 0x00ff_ffff,    // elf / pjw
        6 => 0xaaaa_aaaa ^ seed,    // ap
        _ => 1_315_423_911 ^ seed,  // js
    };
    match alg {
        0 => {
            for &b in key {
                h = h.wrapping_mul(33).wrapping_add(u64::from(b));
            }
        }
        1 => {
            for &b in key {
                h = u64::from(b)
                    .wrapping_add(h << 6)
                    .wrapping_add(h << 16)
                    .wrapping_sub(h);
            }
        }
        2 => {
            h ^= seed;
            for &b in key {
                h = (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        3 => {
            for &b in key {
                h = h.wrapping_mul(131).wrapping_add(u64::from(b));
            }
        }
        4 => {
            for &b in key {
                h = h.wrapping_add(u64::from(b));
                h = h.wrapping_add(h << 10);
                h ^= h >> 6;
            }
            h = h.wrapping_add(h << 3);
            h ^= h >> 11;
            h = h.wrapping_add(h << 15);
        }
        5 => {
            for &b in key {
                h = (h << 4).wrapping_add(u64::from(b));
                let high = h & 0xf000_0000_0000_0000;
                if high != 0 {
                    h ^= high >> 56;
                }
                h &= !high;
            }
        }
        6 => {
            for (i, &b) in key.iter().enumerate() {
                if i & 1 == 0 {
                    h ^= (h << 7) ^ u64::from(b).wrapping_mul(h >> 3);
                } else {
                    h ^= !((h << 11).wrapping_add(u64::from(b) ^ (h >> 5)));
                }
            }
        }
        _ => {
            for &b in key {
                h ^= (h << 5).wrapping_add(u64::from(b)).wrapping_add(h >> 2);
            }
        }
    }
    mix64(h ^ (key.len() as u64).wrapping_mul(GOLDEN))
}

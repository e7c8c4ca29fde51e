//! Construction pipeline: joint optimization of the bit array and the chain
//! cell array against a cost-weighted negative set.
//!
//! Construction proceeds in two phases. Phase one inserts every positive key
//! under the default chain while recording, per bit, whether exactly one
//! positive key owns it. Phase two drains a cost-ordered queue of colliding
//! negative keys; for each it tries to *adjust* one owning positive key —
//! swap one default hash of that key for a replacement and store the
//! customized chain in the cell array — so that the collision bit can be
//! cleared. Candidate adjustments fall into three classes by their side
//! effects: the replacement bit is already set (pure win), it is zero and
//! setting it collides with no protected key, or setting it displaces
//! already-protected keys of smaller total cost (which are then re-queued).
//! Each positive key is adjusted at most once, so the queue drains.

use std::collections::{HashMap, HashSet, VecDeque};

use crate::bloom::BloomFilter;
use crate::error::{HabfError, Result};
use crate::expressor::{HashExpressor, InsertionPlan};
use crate::filter::HabfConfig;
use crate::hashing::{FamilyMode, HashFamily, HashId, PreparedKey, EMPTY_ID};

/// Construction counters and measurements, reported by
/// [`crate::Habf::stats`]. Not persisted by serialization.
#[derive(Clone, Debug, Default, PartialEq, serde::Serialize)]
pub struct BuildStats {
    /// Negative keys that collided right after the positive set was
    /// inserted; the initial optimization-queue length.
    pub initial_collisions: u64,
    /// Committed chain adjustments (equals the cell array's chain count).
    pub optimized: u64,
    /// Positive keys whose chain was customized (each at most once).
    pub adjusted_keys: u64,
    /// Queue entries that had turned negative by the time they were popped.
    pub skipped_negative: u64,
    /// Queue entries whose only candidate adjustments would have displaced
    /// more query cost than the entry carries.
    pub skipped_unprofitable: u64,
    /// Queue entries with no workable adjustment.
    pub failed: u64,
    /// Protected keys displaced by a cost exchange and put back in line.
    pub requeued: u64,
    /// Fraction of the negative set colliding before optimization.
    pub initial_bloom_fpr: f64,
    /// Estimate of the fraction of the negative set still colliding on the
    /// default chain afterwards, from the commit/displacement balance. Bits
    /// set by adjustments can create collisions this estimate does not see,
    /// and displaced keys that ended up negative are still counted, so it is
    /// an estimate, not a measurement.
    pub residual_bloom_fpr_estimate: f64,
    /// Fraction of processed (still-positive) queue entries that had at
    /// least one candidate adjustment.
    pub candidate_rate: f64,
    /// Fraction of zero bits right after the positive set was inserted.
    pub zero_bit_fraction_initial: f64,
    /// Bits set right after the positive set was inserted.
    pub bits_set_initial: u64,
    /// Bits set when construction finished.
    pub bits_set_final: u64,
    /// Bytes held by construction-only structures (ownership units,
    /// collision buckets, queue, scratch), measured from final capacities;
    /// these structures only grow during a build.
    pub aux_bytes_peak: u64,
}

/// Internal construction state exposed for white-box testing.
#[doc(hidden)]
#[derive(Clone, Debug, Default)]
pub struct BuildDebug {
    /// Collision buckets at the end of the build: (bit, negative-set
    /// indices in insertion order).
    pub gamma: Vec<(u64, Vec<u32>)>,
    /// Per bit: whether any key currently hashes onto it according to the
    /// ownership units.
    pub unit_has_key: Vec<bool>,
    /// Final bit array as booleans.
    pub bloom_bits: Vec<bool>,
    /// Per cost exchange: (cost of the resolved key, displaced cost).
    pub trades: Vec<(f64, f64)>,
}

const V_SINGLE: u32 = 1 << 31;

/// Per-bit ownership units. Bit 31 holds the "at most one owner so far"
/// flag; the low 31 bits hold the owner's key index plus one (0 = none).
/// Inserting onto a unit a second time — even by the same key — clears the
/// flag for good; clearing the underlying bit resets the unit entirely.
struct OwnerUnits {
    units: Vec<u32>,
}

impl OwnerUnits {
    fn new(m: u64) -> Self {
        Self {
            units: vec![V_SINGLE; m as usize],
        }
    }

    #[inline]
    fn note_insert(&mut self, unit: u64, key: u32) {
        let cur = self.units[unit as usize];
        if cur & V_SINGLE == 0 {
            // already shared
        } else if cur == V_SINGLE {
            self.units[unit as usize] = V_SINGLE | (key + 1);
        } else {
            self.units[unit as usize] = cur & !V_SINGLE;
        }
    }

    /// The owner's key index, when the unit has exactly one owner.
    #[inline]
    fn single_owner(&self, unit: u64) -> Option<u32> {
        let cur = self.units[unit as usize];
        if cur & V_SINGLE != 0 && cur != V_SINGLE {
            Some((cur & !V_SINGLE) - 1)
        } else {
            None
        }
    }

    /// Whether any insertion ever touched this unit (tracks the bit array:
    /// a bit is set exactly when its unit has a key).
    #[inline]
    fn has_key(&self, unit: u64) -> bool {
        self.units[unit as usize] & !V_SINGLE != 0
    }

    #[inline]
    fn reset(&mut self, unit: u64) {
        self.units[unit as usize] = V_SINGLE;
    }

    fn bytes(&self) -> u64 {
        (self.units.capacity() * 4) as u64
    }
}

/// Ownership units kept only for the bits that can matter to the optimizer:
/// the default positions of colliding negative keys. The fast build derives
/// this index in a deferred pass over the stored per-key digests instead of
/// maintaining a dense array inline during insertion; a bitmap gates the map
/// probes so positive keys that touch no tracked bit cost three bit tests.
///
/// An untracked unit reports no single owner, which is exactly what a dense
/// index would report for it by the time ownership is consulted: the queue
/// only ever asks about bits on colliding negatives' default chains, and
/// those are all tracked.
struct SparseOwners {
    tracked: Vec<u64>,
    units: HashMap<u64, u32>,
}

impl SparseOwners {
    fn new(m: u64) -> Self {
        Self {
            tracked: vec![0; m.div_ceil(64) as usize],
            units: HashMap::new(),
        }
    }

    #[inline]
    fn is_tracked(&self, unit: u64) -> bool {
        self.tracked[(unit / 64) as usize] >> (unit % 64) & 1 == 1
    }

    /// Starts following `unit` with the same initial state as a fresh dense
    /// unit. Must precede the ownership pass.
    fn track(&mut self, unit: u64) {
        self.tracked[(unit / 64) as usize] |= 1 << (unit % 64);
        self.units.entry(unit).or_insert(V_SINGLE);
    }

    /// Replays one default-chain insertion; only tracked units are updated.
    #[inline]
    fn observe_insert(&mut self, unit: u64, key: u32) {
        if !self.is_tracked(unit) {
            return;
        }
        let cur = self.units.get_mut(&unit).expect("tracked unit present");
        if *cur & V_SINGLE == 0 {
            // already shared
        } else if *cur == V_SINGLE {
            *cur = V_SINGLE | (key + 1);
        } else {
            *cur &= !V_SINGLE;
        }
    }

    /// Commit-time insertion. An untracked target needs no entry: such a bit
    /// was already set (the fast path never sets new bits), so a dense index
    /// would answer "shared or unknown owner" for it too, and recording
    /// nothing preserves that answer.
    #[inline]
    fn note_insert(&mut self, unit: u64, key: u32) {
        if self.is_tracked(unit) {
            self.observe_insert(unit, key);
        }
    }

    #[inline]
    fn single_owner(&self, unit: u64) -> Option<u32> {
        if !self.is_tracked(unit) {
            return None;
        }
        let cur = self.units[&unit];
        if cur & V_SINGLE != 0 && cur != V_SINGLE {
            Some((cur & !V_SINGLE) - 1)
        } else {
            None
        }
    }

    #[inline]
    fn reset(&mut self, unit: u64) {
        debug_assert!(self.is_tracked(unit), "only tracked bits get cleared");
        if let Some(cur) = self.units.get_mut(&unit) {
            *cur = V_SINGLE;
        }
    }

    fn bytes(&self) -> u64 {
        // Bitmap plus map slots (u64 key, u32 value, control byte, padding).
        (self.tracked.capacity() * 8 + self.units.capacity() * 24) as u64
    }
}

/// The ownership index behind the optimizer, dense for full builds (every
/// bit, maintained inline during insertion) and sparse for fast builds
/// (tracked bits only, filled by a deferred digest pass).
enum Owners {
    Dense(OwnerUnits),
    Sparse(SparseOwners),
}

impl Owners {
    #[inline]
    fn note_insert(&mut self, unit: u64, key: u32) {
        match self {
            Owners::Dense(o) => o.note_insert(unit, key),
            Owners::Sparse(o) => o.note_insert(unit, key),
        }
    }

    #[inline]
    fn single_owner(&self, unit: u64) -> Option<u32> {
        match self {
            Owners::Dense(o) => o.single_owner(unit),
            Owners::Sparse(o) => o.single_owner(unit),
        }
    }

    #[inline]
    fn has_key(&self, unit: u64) -> bool {
        match self {
            Owners::Dense(o) => o.has_key(unit),
            // Conflict detection only runs in full builds, which are dense.
            Owners::Sparse(_) => unreachable!("fast builds never test coverage"),
        }
    }

    #[inline]
    fn reset(&mut self, unit: u64) {
        match self {
            Owners::Dense(o) => o.reset(unit),
            Owners::Sparse(o) => o.reset(unit),
        }
    }

    fn bytes(&self) -> u64 {
        match self {
            Owners::Dense(o) => o.bytes(),
            Owners::Sparse(o) => o.bytes(),
        }
    }
}

/// Walks the default chain of a key from its stored digest pair, calling
/// `visit` with each position; stops early (returning false) when `visit`
/// does. Matches [`PreparedKey`] evaluation of member ids `1..=k` under
/// [`FamilyMode::DoubleHashing`].
#[inline]
fn digest_chain(digest: (u64, u64), k: usize, m: u64, mut visit: impl FnMut(u64) -> bool) -> bool {
    debug_assert!(m < 1 << 62, "bit count limited to keep sums in range");
    let mut g = crate::hashing::reduce(digest.0, m);
    let step = crate::hashing::reduce(digest.1, m);
    for _ in 0..k {
        if !visit(g) {
            return false;
        }
        g += step;
        if g >= m {
            g -= m;
        }
    }
    true
}

/// Collision buckets: for each bit, which protected negative keys rely on
/// it. A negative key is *protected* once the optimizer has made it test
/// negative (or, in the protect-everything variant, from the start); its
/// entry under each of its default-chain bits lets later adjustments detect
/// that setting a bit would re-cover it.
struct CollisionBuckets {
    buckets: HashMap<u64, Vec<u32>>,
    member: Vec<bool>,
    peak_entries: u64,
}

impl CollisionBuckets {
    fn new(n: usize) -> Self {
        Self {
            buckets: HashMap::new(),
            member: vec![false; n],
            peak_entries: 0,
        }
    }

    /// Registers `neg` under each of `positions` (deduplicated by the
    /// caller). No-op if already registered.
    fn insert(&mut self, neg: u32, positions: &[u64]) {
        if std::mem::replace(&mut self.member[neg as usize], true) {
            return;
        }
        for &p in positions {
            self.buckets.entry(p).or_default().push(neg);
            self.peak_entries += 1;
        }
    }

    fn remove(&mut self, neg: u32, positions: &[u64]) {
        if !std::mem::replace(&mut self.member[neg as usize], false) {
            return;
        }
        for &p in positions {
            if let Some(v) = self.buckets.get_mut(&p) {
                v.retain(|&x| x != neg);
                if v.is_empty() {
                    self.buckets.remove(&p);
                }
            }
        }
    }

    fn bucket(&self, bit: u64) -> &[u32] {
        self.buckets.get(&bit).map_or(&[], |v| v.as_slice())
    }

    fn bytes(&self) -> u64 {
        // HashMap slot (~key + value vec header) plus vec payloads, using
        // peak entry count since retain() keeps capacity anyway.
        (self.buckets.capacity() * 56) as u64 + self.peak_entries * 4 + self.member.capacity() as u64
    }
}

/// The negative keys in `bucket` that would fully collide on their default
/// chain if `bit` were set: every default position either equals `bit` or
/// already carries a key according to `covered`.
pub(crate) fn conflict_members(
    bucket: &[u32],
    negatives: &[(Vec<u8>, f64)],
    family: &HashFamily,
    h0: &[HashId],
    m: u64,
    bit: u64,
    covered: impl Fn(u64) -> bool,
) -> Vec<u32> {
    let mut out = Vec::new();
    for &neg in bucket {
        let pk = family.prepare(&negatives[neg as usize].0);
        if h0.iter().all(|&id| {
            let p = pk.eval(id, m);
            p == bit || covered(p)
        }) {
            out.push(neg);
        }
    }
    out
}

/// [`conflict_members`] with the per-bit key coverage supplied as a plain
/// slice; the white-box hook used to cross-check the production detection
/// against brute force.
#[doc(hidden)]
pub fn conflict_members_with(
    bucket: &[u32],
    negatives: &[(Vec<u8>, f64)],
    family: &HashFamily,
    h0: &[HashId],
    m: u64,
    bit: u64,
    unit_has_key: &[bool],
) -> Vec<u32> {
    conflict_members(bucket, negatives, family, h0, m, bit, |p| {
        unit_has_key[p as usize]
    })
}

/// Two-round membership test shared by build-time re-tests and
/// [`crate::Habf::query`]: the default chain first, then the stored chain
/// when the cell array has a complete walk for the key.
pub(crate) fn two_round_query(
    bloom: &BloomFilter,
    expressor: Option<&HashExpressor>,
    key: &[u8],
) -> bool {
    let pk = bloom.family().prepare(key);
    if bloom.contains_prepared(&pk, bloom.h0()) {
        return true;
    }
    let Some(he) = expressor else {
        return false;
    };
    match he.query_prepared(&pk, bloom.h0().len()) {
        Some(chain) => bloom.contains_prepared(&pk, &chain),
        None => false,
    }
}

/// One qualifying ownership unit of the popped key: `unit` is owned solely
/// by `owner`, which lands on it through default hash `via`.
struct XiUnit {
    unit: u64,
    owner: u32,
    via: HashId,
}

/// One candidate adjustment: move `owner` (of `xi_idx`) off its unit by
/// replacing hash `via` with `alt`, whose bit is `target`.
struct Candidate {
    /// 0: target bit already set. 1: target zero, no protected key covered.
    /// 2: target zero, displaces `zeta` (total cost `theta`).
    class: u8,
    theta: f64,
    /// Enumeration order; the final deterministic tiebreaker.
    seq: u32,
    xi_idx: usize,
    alt: HashId,
    target: u64,
    zeta: Vec<u32>,
}

#[derive(Default)]
struct Workspace {
    pos_ck: Vec<u64>,
    pos_scratch: Vec<u64>,
    xi: Vec<XiUnit>,
    cands: Vec<Candidate>,
    phi: Vec<HashId>,
}

pub(crate) struct BuildOutput {
    pub bloom: BloomFilter,
    pub expressor: Option<HashExpressor>,
    pub stats: BuildStats,
    pub debug: Option<BuildDebug>,
}

struct Builder<'a> {
    positives: &'a [Vec<u8>],
    negatives: &'a [(Vec<u8>, f64)],
    config: &'a HabfConfig,
    h0: Vec<HashId>,
    bloom: BloomFilter,
    expressor: HashExpressor,
    owners: Owners,
    buckets: CollisionBuckets,
    queue: VecDeque<u32>,
    queue_peak: usize,
    locked: Vec<bool>,
    stats: BuildStats,
    processed: u64,
    had_candidates: u64,
    net_resolved: i64,
    trades: Vec<(f64, f64)>,
    ws: Workspace,
}

pub(crate) fn run_build(
    positives: &[Vec<u8>],
    negatives: &[(Vec<u8>, f64)],
    config: &HabfConfig,
    capture_debug: bool,
) -> Result<BuildOutput> {
    config.validate()?;
    let (m, omega) = config.geometry();
    if positives.is_empty() {
        return Err(HabfError::Input("positive set is empty".into()));
    }
    if positives.len() as u64 > (1 << 31) - 1 {
        return Err(HabfError::Input("positive set exceeds 2^31 - 1 keys".into()));
    }
    for (i, (_, cost)) in negatives.iter().enumerate() {
        if !cost.is_finite() || *cost < 0.0 {
            return Err(HabfError::Input(format!(
                "negative key {i} has invalid cost {cost}; costs must be finite and non-negative"
            )));
        }
    }
    if !config.fast_mode {
        // Disjointness check. The fast path folds this into its deferred
        // digest pass instead of hashing every key an extra time here.
        let set: HashSet<&[u8]> = positives.iter().map(|k| k.as_slice()).collect();
        for (i, (key, _)) in negatives.iter().enumerate() {
            if set.contains(key.as_slice()) {
                return Err(HabfError::Input(format!(
                    "negative key {i} also appears in the positive set"
                )));
            }
        }
    }

    let mode = if config.fast_mode {
        FamilyMode::DoubleHashing
    } else {
        config.family_mode
    };
    // One member beyond the chain-eligible set serves as the entry hash.
    let family = HashFamily::new(config.family_seed, config.family_size + 1, mode)?;
    let h0: Vec<HashId> = (1..=config.k).collect();
    let entry_id = config.family_size + 1;
    let mut bloom = BloomFilter::new(m, h0.clone(), family.clone())?;
    let mut stats = BuildStats::default();

    // Phase one: insert every positive key and find the colliding negatives.
    // The full build maintains the dense per-bit ownership index inline as
    // it inserts. The fast build instead computes one digest per key, reuses
    // it for insertion and scanning, and then fills a sparse ownership index
    // over just the colliding bits in one deferred pass — where it also
    // confirms the two key sets are disjoint byte-for-byte.
    let owners: Owners;
    let mut colliding: Vec<u32>;
    let mut phase_one_bytes = 0u64;
    let mut scratch = Vec::with_capacity(h0.len());
    if config.fast_mode {
        let k = h0.len();
        let digests: Vec<(u64, u64)> = positives
            .iter()
            .map(|key| family.digest_pair(key))
            .collect();
        for &d in &digests {
            digest_chain(d, k, m, |p| {
                bloom.set_bit(p);
                true
            });
        }
        stats.bits_set_initial = bloom.popcount();
        stats.zero_bit_fraction_initial = bloom.fraction_zero_bits();

        // A negative collides when its whole default chain lands on set
        // bits. Keep each colliding digest with its first negative index:
        // any positive equal to a negative shares that digest exactly.
        let mut sparse = SparseOwners::new(m);
        let mut collision_digests: HashMap<(u64, u64), u32> = HashMap::new();
        colliding = Vec::new();
        for (i, (key, _)) in negatives.iter().enumerate() {
            let d = family.digest_pair(key);
            if digest_chain(d, k, m, |p| bloom.test_bit(p)) {
                colliding.push(i as u32);
                collision_digests.entry(d).or_insert(i as u32);
                digest_chain(d, k, m, |p| {
                    sparse.track(p);
                    true
                });
            }
        }

        // Deferred pass: replay ownership onto the tracked bits and verify
        // disjointness. Equal keys hash equally, so an overlapping pair is
        // always a colliding negative; a digest match confirmed by byte
        // comparison therefore catches every overlap and nothing else.
        for (idx, &d) in digests.iter().enumerate() {
            if let Some(&neg) = collision_digests.get(&d) {
                if positives[idx] == negatives[neg as usize].0 {
                    return Err(HabfError::Input(format!(
                        "negative key {neg} also appears in the positive set"
                    )));
                }
            }
            digest_chain(d, k, m, |p| {
                sparse.observe_insert(p, idx as u32);
                true
            });
        }
        phase_one_bytes = (digests.capacity() * 16 + collision_digests.capacity() * 28) as u64
            + sparse.bytes();
        owners = Owners::Sparse(sparse);
    } else {
        let mut dense = OwnerUnits::new(m);
        for (idx, key) in positives.iter().enumerate() {
            let pk = family.prepare(key);
            pk.positions(&h0, m, &mut scratch);
            for &bit in &scratch {
                bloom.set_bit(bit);
                dense.note_insert(bit, idx as u32);
            }
        }
        stats.bits_set_initial = bloom.popcount();
        stats.zero_bit_fraction_initial = bloom.fraction_zero_bits();
        colliding = (0..negatives.len() as u32)
            .filter(|&i| bloom.contains_prepared(&family.prepare(&negatives[i as usize].0), &h0))
            .collect();
        owners = Owners::Dense(dense);
    }

    // Phase two setup: queue colliding negatives, highest cost first with
    // key bytes (then index) as deterministic tiebreakers.
    colliding.sort_unstable_by(|&a, &b| {
        let (ka, ca) = &negatives[a as usize];
        let (kb, cb) = &negatives[b as usize];
        cb.total_cmp(ca).then_with(|| ka.cmp(kb)).then(a.cmp(&b))
    });
    stats.initial_collisions = colliding.len() as u64;
    stats.initial_bloom_fpr = if negatives.is_empty() {
        0.0
    } else {
        colliding.len() as f64 / negatives.len() as f64
    };

    let mut buckets = CollisionBuckets::new(negatives.len());
    let expressor = match omega {
        0 => None,
        _ => Some(HashExpressor::new(omega, config.cell_width, entry_id)?),
    };

    let Some(expressor) = expressor else {
        // Plain Bloom filter: nothing can be adjusted.
        stats.failed = colliding.len() as u64;
        stats.bits_set_final = bloom.popcount();
        stats.residual_bloom_fpr_estimate = stats.initial_bloom_fpr;
        stats.aux_bytes_peak = owners.bytes().max(phase_one_bytes);
        return Ok(BuildOutput {
            bloom,
            expressor: None,
            stats,
            debug: capture_debug.then(BuildDebug::default),
        });
    };

    if config.protect_all_negatives && !config.fast_mode {
        for i in 0..negatives.len() as u32 {
            let pk = family.prepare(&negatives[i as usize].0);
            pk.positions(&h0, m, &mut scratch);
            scratch.sort_unstable();
            scratch.dedup();
            buckets.insert(i, &scratch);
        }
    }

    let queue: VecDeque<u32> = colliding.into();
    let mut b = Builder {
        positives,
        negatives,
        config,
        h0,
        bloom,
        expressor,
        owners,
        buckets,
        queue_peak: queue.len(),
        queue,
        locked: vec![false; positives.len()],
        stats,
        processed: 0,
        had_candidates: 0,
        net_resolved: 0,
        trades: Vec::new(),
        ws: Workspace::default(),
    };
    while let Some(ck) = b.queue.pop_front() {
        b.queue_peak = b.queue_peak.max(b.queue.len() + 1);
        b.process(&family, ck);
    }

    b.stats.optimized = b.expressor.t();
    b.stats.bits_set_final = b.bloom.popcount();
    b.stats.candidate_rate = if b.processed == 0 {
        0.0
    } else {
        b.had_candidates as f64 / b.processed as f64
    };
    let resolved = b.net_resolved.max(0) as u64;
    b.stats.residual_bloom_fpr_estimate = if negatives.is_empty() {
        0.0
    } else {
        b.stats.initial_collisions.saturating_sub(resolved) as f64 / negatives.len() as f64
    };
    b.stats.aux_bytes_peak = (b.owners.bytes()
        + b.buckets.bytes()
        + (b.queue_peak * 4) as u64
        + b.locked.capacity() as u64)
        .max(phase_one_bytes);

    #[cfg(debug_assertions)]
    for key in positives {
        debug_assert!(
            two_round_query(&b.bloom, Some(&b.expressor), key),
            "construction lost a positive key"
        );
    }

    let debug = capture_debug.then(|| {
        let mut gamma: Vec<(u64, Vec<u32>)> = b
            .buckets
            .buckets
            .iter()
            .map(|(&bit, v)| (bit, v.clone()))
            .collect();
        gamma.sort_unstable_by_key(|e| e.0);
        BuildDebug {
            gamma,
            // The sparse index does not record coverage; a bit carries a key
            // exactly when it is set, so read coverage off the bit array.
            unit_has_key: match &b.owners {
                Owners::Dense(o) => (0..m).map(|u| o.has_key(u)).collect(),
                Owners::Sparse(_) => (0..m).map(|u| b.bloom.test_bit(u)).collect(),
            },
            bloom_bits: (0..m).map(|u| b.bloom.test_bit(u)).collect(),
            trades: b.trades.clone(),
        }
    });
    Ok(BuildOutput {
        bloom: b.bloom,
        expressor: Some(b.expressor),
        stats: b.stats,
        debug,
    })
}

impl<'a> Builder<'a> {
    fn process(&mut self, family: &HashFamily, ck: u32) {
        let m = self.bloom.m();
        let k = self.h0.len();
        let (positives, negatives) = (self.positives, self.negatives);
        let (key, cost) = &negatives[ck as usize];
        let pk = family.prepare(key);
        pk.positions(&self.h0, m, &mut self.ws.pos_ck);

        // Re-test: earlier adjustments may have already resolved this key —
        // or, if it only passes through its stored chain, made it
        // unresolvable by further bit clearing.
        if !self.ws.pos_ck.iter().all(|&p| self.bloom.test_bit(p)) {
            let round2 = self
                .expressor
                .query_prepared(&pk, k)
                .is_some_and(|chain| self.bloom.contains_prepared(&pk, &chain));
            if round2 {
                self.stats.failed += 1;
            } else {
                self.stats.skipped_negative += 1;
            }
            return;
        }
        self.processed += 1;

        // Qualifying units: bits of this key owned by exactly one
        // not-yet-adjusted positive key, in default-hash order, first
        // occurrence only.
        self.ws.xi.clear();
        for (i, &unit) in self.ws.pos_ck.iter().enumerate() {
            if self.ws.pos_ck[..i].contains(&unit) {
                continue;
            }
            let Some(owner) = self.owners.single_owner(unit) else {
                continue;
            };
            if self.locked[owner as usize] {
                continue;
            }
            let pko = family.prepare(&positives[owner as usize]);
            let Some(&via) = self.h0.iter().find(|&&id| pko.eval(id, m) == unit) else {
                debug_assert!(false, "unit owner does not hash onto its unit");
                continue;
            };
            self.ws.xi.push(XiUnit { unit, owner, via });
        }

        // Prepared owners, reused across candidate enumeration and
        // planning (in chained mode this is one hash per owner).
        let prepared: Vec<PreparedKey<'_>> = self
            .ws
            .xi
            .iter()
            .map(|x| family.prepare(&positives[x.owner as usize]))
            .collect();

        // Enumerate candidates.
        self.ws.cands.clear();
        let mut saw_unprofitable = false;
        let mut seq = 0u32;
        for (xi_idx, x) in self.ws.xi.iter().enumerate() {
            for alt in 1..=self.config.family_size {
                if self.h0.contains(&alt) {
                    continue;
                }
                seq += 1;
                let target = prepared[xi_idx].eval(alt, m);
                if target == x.unit {
                    continue;
                }
                if self.bloom.test_bit(target) {
                    self.ws.cands.push(Candidate {
                        class: 0,
                        theta: 0.0,
                        seq,
                        xi_idx,
                        alt,
                        target,
                        zeta: Vec::new(),
                    });
                } else if self.config.fast_mode {
                    // Fast builds never set bits.
                    continue;
                } else {
                    let zeta = conflict_members(
                        self.buckets.bucket(target),
                        negatives,
                        family,
                        &self.h0,
                        m,
                        target,
                        |p| self.owners.has_key(p),
                    );
                    if zeta.is_empty() {
                        self.ws.cands.push(Candidate {
                            class: 1,
                            theta: 0.0,
                            seq,
                            xi_idx,
                            alt,
                            target,
                            zeta,
                        });
                    } else {
                        let theta: f64 = zeta.iter().map(|&z| negatives[z as usize].1).sum();
                        if theta <= *cost {
                            self.ws.cands.push(Candidate {
                                class: 2,
                                theta,
                                seq,
                                xi_idx,
                                alt,
                                target,
                                zeta,
                            });
                        } else {
                            saw_unprofitable = true;
                        }
                    }
                }
            }
        }

        if self.ws.cands.is_empty() {
            if saw_unprofitable {
                self.stats.skipped_unprofitable += 1;
            } else {
                self.stats.failed += 1;
            }
            return;
        }
        self.had_candidates += 1;

        // Rank: class, then displaced cost, then enumeration order. Plans
        // are attempted rank-group-wise so equal-rank candidates compete on
        // chain overlap.
        self.ws
            .cands
            .sort_unstable_by(|a, b| {
                a.class
                    .cmp(&b.class)
                    .then(a.theta.total_cmp(&b.theta))
                    .then(a.seq.cmp(&b.seq))
            });
        let mut budget = self.config.max_plan_attempts;
        let cands = std::mem::take(&mut self.ws.cands);
        let mut committed = false;
        let mut gi = 0;
        'groups: while gi < cands.len() && budget > 0 {
            let mut ge = gi + 1;
            while ge < cands.len()
                && cands[ge].class == cands[gi].class
                && cands[ge].theta.total_cmp(&cands[gi].theta).is_eq()
            {
                ge += 1;
            }
            let mut planned: Vec<(u32, usize, InsertionPlan)> = Vec::new();
            for (ci, c) in cands.iter().enumerate().take(ge).skip(gi) {
                if budget == 0 {
                    break;
                }
                budget -= 1;
                let x = &self.ws.xi[c.xi_idx];
                self.ws.phi.clear();
                self.ws
                    .phi
                    .extend(self.h0.iter().copied().filter(|&id| id != x.via));
                self.ws.phi.push(c.alt);
                if let Some(plan) = self
                    .expressor
                    .plan_insert_prepared(&prepared[c.xi_idx], &self.ws.phi)
                {
                    planned.push((plan.overlap(), ci, plan));
                }
            }
            planned.sort_unstable_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
            for (_, ci, plan) in planned {
                if self.try_commit(family, ck, &pk, &cands[ci], &plan) {
                    committed = true;
                    break 'groups;
                }
            }
            gi = ge;
        }
        self.ws.cands = cands;
        if !committed {
            self.stats.failed += 1;
        }
    }

    /// Final gate plus application of one candidate. The gate simulates the
    /// post-adjustment state and requires the popped key to then test
    /// negative through both rounds; round one is guaranteed because the
    /// key's bit `unit` is being cleared, but the key could still complete a
    /// walk in the cell array and hit set bits — committing anyway would
    /// record a resolution that never happened, so such candidates are
    /// rejected.
    fn try_commit(
        &mut self,
        family: &HashFamily,
        ck: u32,
        pk_ck: &PreparedKey<'_>,
        cand: &Candidate,
        plan: &InsertionPlan,
    ) -> bool {
        let m = self.bloom.m();
        let k = self.h0.len();
        let x = &self.ws.xi[cand.xi_idx];
        if let Some(chain) = overlay_query(&self.expressor, plan, pk_ck, k) {
            let still_positive = chain.iter().all(|&id| {
                let p = pk_ck.eval(id, m);
                p != x.unit && (p == cand.target || self.bloom.test_bit(p))
            });
            if still_positive {
                return false;
            }
        }

        let (unit, owner, target, class) = (x.unit, x.owner, cand.target, cand.class);
        self.expressor
            .commit(plan)
            .expect("freshly planned chain cannot conflict");
        self.bloom.clear_bit(unit);
        self.owners.reset(unit);
        if class != 0 {
            self.bloom.set_bit(target);
        }
        self.owners.note_insert(target, owner);
        self.locked[owner as usize] = true;
        self.stats.adjusted_keys += 1;
        self.net_resolved += 1;

        if !self.config.fast_mode {
            // Protect the resolved key so later adjustments cannot silently
            // re-cover its default chain.
            self.ws.pos_scratch.clone_from(&self.ws.pos_ck);
            self.ws.pos_scratch.sort_unstable();
            self.ws.pos_scratch.dedup();
            let scratch = std::mem::take(&mut self.ws.pos_scratch);
            self.buckets.insert(ck, &scratch);
            self.ws.pos_scratch = scratch;
            if class == 2 {
                let cost = self.negatives[ck as usize].1;
                self.trades.push((cost, cand.theta));
                for &z in &cand.zeta {
                    let pkz = family.prepare(&self.negatives[z as usize].0);
                    pkz.positions(&self.h0, m, &mut self.ws.pos_scratch);
                    self.ws.pos_scratch.sort_unstable();
                    self.ws.pos_scratch.dedup();
                    let scratch = std::mem::take(&mut self.ws.pos_scratch);
                    self.buckets.remove(z, &scratch);
                    self.ws.pos_scratch = scratch;
                    self.queue.push_back(z);
                    self.stats.requeued += 1;
                    self.net_resolved -= 1;
                }
            }
        }
        true
    }
}

/// Walks the cell array for `pk` as [`HashExpressor::query`] would, but
/// with `plan`'s pending writes overlaid (including its end flag).
fn overlay_query(
    he: &HashExpressor,
    plan: &InsertionPlan,
    pk: &PreparedKey<'_>,
    k: usize,
) -> Option<Vec<HashId>> {
    let steps = plan.steps();
    let last = steps.len() - 1;
    let view = |cell: u64| -> (bool, HashId) {
        let (mut end, mut id) = he.cell_parts(cell);
        for (i, st) in steps.iter().enumerate() {
            if st.cell == cell {
                if id == EMPTY_ID {
                    id = st.id;
                }
                if i == last {
                    end = true;
                }
            }
        }
        (end, id)
    };
    let mut cell = pk.eval(he.entry_id(), he.omega());
    let mut chain = Vec::with_capacity(k);
    loop {
        let (end, id) = view(cell);
        if id == EMPTY_ID {
            return None;
        }
        chain.push(id);
        if end {
            return (chain.len() == k).then_some(chain);
        }
        if chain.len() == k {
            return None;
        }
        cell = pk.eval(id, he.omega());
    }
}

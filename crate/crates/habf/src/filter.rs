//! The public filter type: configuration, construction entry points, the
//! two-round query, and the portable serialized form.

use crate::bloom::BloomFilter;
use crate::build::{self, BuildDebug, BuildStats};
use crate::error::{HabfError, Result};
use crate::expressor::HashExpressor;
use crate::hashing::{FamilyMode, HashFamily};

/// Construction parameters. `total_bits` is the full space budget; a
/// `delta` share of it is spent on chain cells of `cell_width` bits each,
/// and the remainder on the bit array.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HabfConfig {
    /// Total space budget in bits, split between the bit array and the
    /// chain cell array.
    pub total_bits: u64,
    /// Default chain length (hashes per key).
    pub k: u16,
    /// Fraction of `total_bits` given to the cell array, in `[0, 1)`.
    /// Zero builds a plain Bloom filter.
    pub delta: f64,
    /// Bits per chain cell: one end-flag bit plus `cell_width - 1` id bits.
    pub cell_width: u8,
    /// Number of chain-eligible hash functions. One extra family member is
    /// created internally as the entry hash that locates chain starts, so
    /// it never appears inside a chain.
    pub family_size: u16,
    /// Seed from which every family member derives.
    pub family_seed: u64,
    /// How family members are computed for regular builds. Fast builds
    /// always use [`FamilyMode::DoubleHashing`] regardless of this field.
    pub family_mode: FamilyMode,
    /// Fast variant: derive all hashes from one 128-bit digest and restrict
    /// the optimizer to adjustments that never set a bit.
    pub fast_mode: bool,
    /// Register every negative key for conflict detection up front instead
    /// of only the ones the optimizer has resolved. Slower and stricter:
    /// adjustments then avoid re-covering any negative, not just resolved
    /// ones.
    pub protect_all_negatives: bool,
    /// Chain-placement attempts allowed per queued key before giving up.
    pub max_plan_attempts: u32,
}

impl HabfConfig {
    /// Defaults: `k = 3`, a quarter of the budget on 4-bit cells, seven
    /// chain-eligible hashes.
    pub fn new(total_bits: u64) -> Self {
        Self {
            total_bits,
            k: 3,
            delta: 0.25,
            cell_width: 4,
            family_size: 7,
            family_seed: 0,
            family_mode: FamilyMode::Seeded,
            fast_mode: false,
            protect_all_negatives: false,
            max_plan_attempts: 64,
        }
    }

    /// `(bit array size, cell count)` for this configuration.
    pub fn geometry(&self) -> (u64, u64) {
        let omega = if self.delta > 0.0 {
            (self.delta * self.total_bits as f64 / f64::from(self.cell_width)).floor() as u64
        } else {
            0
        };
        (self.total_bits - omega * u64::from(self.cell_width), omega)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(HabfError::Config(msg));
        if self.total_bits == 0 {
            return fail("total_bits must be at least 1".into());
        }
        if !self.delta.is_finite() || !(0.0..1.0).contains(&self.delta) {
            return fail(format!("delta {} must lie in [0, 1)", self.delta));
        }
        if self.k == 0 {
            return fail("k must be at least 1".into());
        }
        if self.k > 64 {
            return fail(format!("k {} exceeds the 64-hash limit", self.k));
        }
        if self.delta > 0.0 && self.k > 16 {
            return fail(format!(
                "k {} exceeds the 16-hash chain-placement limit; use delta 0 for longer chains",
                self.k
            ));
        }
        if !(2..=8).contains(&self.cell_width) {
            return fail(format!("cell width {} must lie in 2..=8", self.cell_width));
        }
        let id_cap = (1u16 << (self.cell_width - 1)) - 1;
        if self.family_size <= self.k {
            return fail(format!(
                "family size {} must exceed k {} to leave replacement hashes",
                self.family_size, self.k
            ));
        }
        if self.family_size > id_cap {
            return fail(format!(
                "family size {} exceeds the {id_cap} ids representable at cell width {}",
                self.family_size, self.cell_width
            ));
        }
        if self.max_plan_attempts == 0 {
            return fail("max_plan_attempts must be at least 1".into());
        }
        let (m, omega) = self.geometry();
        if self.delta > 0.0 && omega == 0 {
            return fail(format!(
                "delta {} of {} bits yields no whole cell; grow the budget or delta",
                self.delta, self.total_bits
            ));
        }
        if m < u64::from(self.k) {
            return fail(format!(
                "bit array of {m} bits cannot hold {} distinct positions",
                self.k
            ));
        }
        Ok(())
    }
}

/// A cost-aware membership filter: a bit array plus per-key customized hash
/// chains stored in a compact cell array. Querying never yields a false
/// negative; construction trades cell space to steer expensive negative
/// keys off the filter.
#[derive(Clone)]
pub struct Habf {
    config: HabfConfig,
    bloom: BloomFilter,
    expressor: Option<HashExpressor>,
    stats: BuildStats,
}

impl std::fmt::Debug for Habf {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Habf")
            .field("m", &self.bloom.m())
            .field("omega", &self.omega())
            .field("k", &self.bloom.k())
            .field("chains", &self.expressor.as_ref().map_or(0, |h| h.t()))
            .field("fast", &self.config.fast_mode)
            .finish()
    }
}

impl Habf {
    /// Builds a filter over `positives`, steering chains away from the
    /// cost-weighted `negatives`. The sets must be disjoint; costs must be
    /// finite and non-negative.
    pub fn build(
        positives: &[Vec<u8>],
        negatives: &[(Vec<u8>, f64)],
        config: &HabfConfig,
    ) -> Result<Self> {
        let out = build::run_build(positives, negatives, config, false)?;
        Ok(Self {
            config: config.clone(),
            bloom: out.bloom,
            expressor: out.expressor,
            stats: out.stats,
        })
    }

    /// [`Self::build`] with `fast_mode` forced on: single-digest hashing
    /// and bit-preserving adjustments only.
    pub fn build_fast(
        positives: &[Vec<u8>],
        negatives: &[(Vec<u8>, f64)],
        config: &HabfConfig,
    ) -> Result<Self> {
        let mut cfg = config.clone();
        cfg.fast_mode = true;
        Self::build(positives, negatives, &cfg)
    }

    /// [`Self::build`] that also returns internal construction state for
    /// white-box tests.
    #[doc(hidden)]
    pub fn build_with_debug(
        positives: &[Vec<u8>],
        negatives: &[(Vec<u8>, f64)],
        config: &HabfConfig,
    ) -> Result<(Self, BuildDebug)> {
        let out = build::run_build(positives, negatives, config, true)?;
        Ok((
            Self {
                config: config.clone(),
                bloom: out.bloom,
                expressor: out.expressor,
                stats: out.stats,
            },
            out.debug.unwrap_or_default(),
        ))
    }

    /// Two-round membership test. Keys that were in the build's positive
    /// set always return `true`.
    pub fn query(&self, key: &[u8]) -> bool {
        build::two_round_query(&self.bloom, self.expressor.as_ref(), key)
    }

    /// Bit array size in bits.
    pub fn m(&self) -> u64 {
        self.bloom.m()
    }

    /// Number of chain cells.
    pub fn omega(&self) -> u64 {
        self.expressor.as_ref().map_or(0, |h| h.omega())
    }

    /// Default chain length.
    pub fn k(&self) -> u16 {
        self.bloom.k()
    }

    pub fn config(&self) -> &HabfConfig {
        &self.config
    }

    /// Construction counters; zeroed on a deserialized filter.
    pub fn stats(&self) -> &BuildStats {
        &self.stats
    }

    pub fn bloom(&self) -> &BloomFilter {
        &self.bloom
    }

    pub fn expressor(&self) -> Option<&HashExpressor> {
        self.expressor.as_ref()
    }

    /// Serialized little-endian byte layout (all integers little-endian):
    ///
    /// | offset | size | field |
    /// |--------|------|-------|
    /// | 0 | 4 | magic `"HABF"` |
    /// | 4 | 1 | format version, currently 1 |
    /// | 5 | 1 | flags: bit 0 fast mode, bits 1-2 family mode (0 seeded, 1 derived, 2 distinct) |
    /// | 6 | 1 | chain length `k` |
    /// | 7 | 1 | cell width in bits |
    /// | 8 | 4 | chain-eligible family size |
    /// | 12 | 8 | family seed |
    /// | 20 | 8 | bit array size `m` in bits |
    /// | 28 | 8 | cell count `omega` |
    /// | 36 | 2k | default chain ids |
    /// | .. | ceil(m/8) | bit array, LSB-first |
    /// | .. | ceil(omega*width/8) | cell array, LSB-first |
    /// | .. | 8 | stored chain count `t` |
    /// | .. | 4 | CRC-32C of everything above |
    pub fn serialize(&self) -> Vec<u8> {
        let m = self.bloom.m();
        let (omega, cell_bytes, t) = match &self.expressor {
            Some(he) => (he.omega(), he.cell_bytes(), he.t()),
            None => (0u64, Vec::new(), 0u64),
        };
        let bit_bytes = self.bloom.bit_bytes();
        let mut out =
            Vec::with_capacity(51 + 2 * self.bloom.h0().len() + bit_bytes.len() + cell_bytes.len());
        out.extend_from_slice(&MAGIC);
        out.push(VERSION);
        out.push(self.flags());
        out.push(self.bloom.h0().len() as u8);
        out.push(self.config.cell_width);
        out.extend_from_slice(&u32::from(self.config.family_size).to_le_bytes());
        out.extend_from_slice(&self.bloom.family().seed().to_le_bytes());
        out.extend_from_slice(&m.to_le_bytes());
        out.extend_from_slice(&omega.to_le_bytes());
        for &id in self.bloom.h0() {
            out.extend_from_slice(&id.to_le_bytes());
        }
        out.extend_from_slice(&bit_bytes);
        out.extend_from_slice(&cell_bytes);
        out.extend_from_slice(&t.to_le_bytes());
        let crc = crc32c::crc32c(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    fn flags(&self) -> u8 {
        let mode = match self.bloom.family().mode() {
            FamilyMode::Seeded => 0u8,
            FamilyMode::DoubleHashing => 1,
            FamilyMode::Distinct => 2,
        };
        u8::from(self.config.fast_mode) | (mode << 1)
    }

    /// Rebuilds a filter from [`Self::serialize`] output. The whole buffer
    /// is checksummed; structural fields are then validated individually,
    /// with errors reporting the byte offset of the offending field.
    /// Construction stats are not persisted and come back zeroed.
    pub fn deserialize(buf: &[u8]) -> Result<Self> {
        let bad = |offset: usize, message: String| HabfError::Format { offset, message };
        if buf.len() < 51 {
            return Err(bad(
                buf.len(),
                format!("file of {} bytes is shorter than the 51-byte minimum", buf.len()),
            ));
        }
        let crc_off = buf.len() - 4;
        let stored = u32::from_le_bytes(buf[crc_off..].try_into().unwrap());
        let computed = crc32c::crc32c(&buf[..crc_off]);
        if stored != computed {
            return Err(bad(
                crc_off,
                format!("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}"),
            ));
        }
        if buf[..4] != MAGIC {
            return Err(bad(0, format!("bad magic {:02x?}", &buf[..4])));
        }
        if buf[4] != VERSION {
            return Err(bad(4, format!("unsupported format version {}", buf[4])));
        }
        let flags = buf[5];
        if flags & !0b111 != 0 {
            return Err(bad(5, format!("unknown flag bits in {flags:#04x}")));
        }
        let fast_mode = flags & 1 == 1;
        let family_mode = match (flags >> 1) & 0b11 {
            0 => FamilyMode::Seeded,
            1 => FamilyMode::DoubleHashing,
            2 => FamilyMode::Distinct,
            _ => return Err(bad(5, format!("unknown family mode in flags {flags:#04x}"))),
        };
        if fast_mode && family_mode != FamilyMode::DoubleHashing {
            return Err(bad(
                5,
                "fast filters always use the derived-index family mode".into(),
            ));
        }
        let k = u16::from(buf[6]);
        if k == 0 || k > 64 {
            return Err(bad(6, format!("chain length {k} outside 1..=64")));
        }
        let cell_width = buf[7];
        if !(2..=8).contains(&cell_width) {
            return Err(bad(7, format!("cell width {cell_width} outside 2..=8")));
        }
        let family_size_raw = u32::from_le_bytes(buf[8..12].try_into().unwrap());
        let id_cap = u32::from((1u16 << (cell_width - 1)) - 1);
        if family_size_raw <= u32::from(k) || family_size_raw > id_cap {
            return Err(bad(
                8,
                format!(
                    "family size {family_size_raw} must exceed k {k} and fit the {id_cap} ids of cell width {cell_width}"
                ),
            ));
        }
        let family_size = family_size_raw as u16;
        let family_seed = u64::from_le_bytes(buf[12..20].try_into().unwrap());
        let m = u64::from_le_bytes(buf[20..28].try_into().unwrap());
        if m < u64::from(k) {
            return Err(bad(20, format!("bit array of {m} bits cannot hold k {k}")));
        }
        let omega = u64::from_le_bytes(buf[28..36].try_into().unwrap());
        let cell_bits = omega
            .checked_mul(u64::from(cell_width))
            .and_then(|cb| cb.checked_add(m))
            .ok_or_else(|| bad(28, format!("geometry m {m} omega {omega} overflows")))?;
        let total_bits = cell_bits;

        let mut pos = 36usize;
        let need = |pos: usize, n: usize, what: &str| -> Result<()> {
            if pos + n > crc_off {
                return Err(HabfError::Format {
                    offset: pos,
                    message: format!("file ends inside {what}"),
                });
            }
            Ok(())
        };
        need(pos, 2 * k as usize, "the default chain ids")?;
        let mut h0 = Vec::with_capacity(k as usize);
        for i in 0..k as usize {
            let off = pos + 2 * i;
            let id = u16::from_le_bytes(buf[off..off + 2].try_into().unwrap());
            if id == 0 || id > family_size {
                return Err(bad(off, format!("chain id {id} outside 1..={family_size}")));
            }
            if h0.contains(&id) {
                return Err(bad(off, format!("chain id {id} repeats")));
            }
            h0.push(id);
        }
        pos += 2 * k as usize;

        let family = HashFamily::new(family_seed, family_size + 1, family_mode)
            .map_err(|e| bad(12, e.to_string()))?;
        let bit_len = m.div_ceil(8) as usize;
        need(pos, bit_len, "the bit array")?;
        let bloom = BloomFilter::from_bit_bytes(m, h0, family, &buf[pos..pos + bit_len])
            .map_err(|e| bad(pos, e.to_string()))?;
        pos += bit_len;

        let cell_len = (omega * u64::from(cell_width)).div_ceil(8) as usize;
        need(pos, cell_len, "the cell array")?;
        let cell_slice = &buf[pos..pos + cell_len];
        let cell_off = pos;
        pos += cell_len;

        need(pos, 8, "the chain count")?;
        let t = u64::from_le_bytes(buf[pos..pos + 8].try_into().unwrap());
        if pos + 8 != crc_off {
            return Err(bad(pos + 8, "trailing bytes before the checksum".into()));
        }
        let expressor = if omega > 0 {
            Some(
                HashExpressor::from_cell_bytes(
                    omega,
                    cell_width,
                    family_size + 1,
                    t,
                    family_size,
                    cell_slice,
                )
                .map_err(|e| bad(cell_off, e.to_string()))?,
            )
        } else {
            if t != 0 {
                return Err(bad(pos, format!("{t} chains recorded but no cells exist")));
            }
            None
        };

        let config = HabfConfig {
            total_bits,
            k,
            delta: (omega * u64::from(cell_width)) as f64 / total_bits as f64,
            cell_width,
            family_size,
            family_seed,
            family_mode,
            fast_mode,
            protect_all_negatives: false,
            max_plan_attempts: 64,
        };
        Ok(Self {
            config,
            bloom,
            expressor,
            stats: BuildStats::default(),
        })
    }
}

const MAGIC: [u8; 4] = *b"HABF";
const VERSION: u8 = 1;

//! The bit-packed cell array that stores customized hash chains.
//!
//! The array has `omega` cells of `cell_width` bits: the lowest bit of a
//! cell is the *end* flag, the remaining `cell_width - 1` bits hold a
//! [`HashId`] (0 meaning empty, so an all-zero cell is the empty cell). A
//! key's chain `(a_1, ..., a_k)` is laid out as a walk: the entry cell —
//! located by a dedicated entry hash — holds `a_1`, the cell at `pos(a_1)`
//! holds `a_2`, and so on; the cell holding `a_k` carries the end flag.
//! Queries re-walk that path. Cells never revert to empty and stored ids
//! never change, so lookups for committed chains cannot be lost.
//!
//! [`HashExpressor::plan_insert`] searches all marking orders of a chain for
//! one compatible with the committed cells, maximizing the number of reused
//! cells (ties broken toward the lexicographically smallest id sequence).
//! The search runs as a dynamic program over (subset of marked ids, last
//! marked id), which visits `O(2^k k^2)` states instead of `k!` orders while
//! selecting exactly the same plan; the unit tests check that equivalence
//! against a permutation-enumerating reference.

use crate::error::{HabfError, Result};
use crate::hashing::{HashFamily, HashId, PreparedKey, EMPTY_ID};

/// Cell array storing per-key hash chains; see the module docs.
#[derive(Clone, Debug)]
pub struct HashExpressor {
    omega: u64,
    cell_width: u8,
    entry_id: HashId,
    bytes: Vec<u8>,
    t: u64,
    occupied: u64,
}

/// One cell assignment of an [`InsertionPlan`]: `cell` holds `id`; `reused`
/// records that the cell already held `id` when the plan was formed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PlanStep {
    pub cell: u64,
    pub id: HashId,
    pub reused: bool,
}

/// A validated way to store one chain, produced by
/// [`HashExpressor::plan_insert`] and applied by [`HashExpressor::commit`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InsertionPlan {
    steps: Vec<PlanStep>,
    overlap: u32,
}

impl InsertionPlan {
    /// Cell assignments in marking order; the last step's cell receives the
    /// end flag.
    pub fn steps(&self) -> &[PlanStep] {
        &self.steps
    }

    /// Number of steps whose cell was already holding the wanted id.
    pub fn overlap(&self) -> u32 {
        self.overlap
    }

    /// The ids in marking order.
    pub fn order(&self) -> Vec<HashId> {
        self.steps.iter().map(|s| s.id).collect()
    }
}

impl HashExpressor {
    /// Creates an empty array of `omega` cells of `cell_width` bits each.
    /// `entry_id` is the family member that locates a key's entry cell.
    ///
    /// Requirements: `omega >= 1`, `2 <= cell_width <= 8`, `entry_id >= 1`.
    pub fn new(omega: u64, cell_width: u8, entry_id: HashId) -> Result<Self> {
        if omega == 0 {
            return Err(HabfError::Config("cell array needs at least 1 cell".into()));
        }
        if !(2..=8).contains(&cell_width) {
            return Err(HabfError::Config(format!(
                "cell width must be 2..=8 bits, got {cell_width}"
            )));
        }
        if entry_id == EMPTY_ID {
            return Err(HabfError::Config("entry hash id must be at least 1".into()));
        }
        let bytes = vec![0u8; (omega * u64::from(cell_width)).div_ceil(8) as usize];
        Ok(Self {
            omega,
            cell_width,
            entry_id,
            bytes,
            t: 0,
            occupied: 0,
        })
    }

    pub fn omega(&self) -> u64 {
        self.omega
    }

    pub fn cell_width(&self) -> u8 {
        self.cell_width
    }

    pub fn entry_id(&self) -> HashId {
        self.entry_id
    }

    /// Number of committed chains.
    pub fn t(&self) -> u64 {
        self.t
    }

    /// Number of non-empty cells.
    pub fn occupied(&self) -> u64 {
        self.occupied
    }

    /// Largest id a cell can store: `2^(cell_width - 1) - 1`.
    pub fn max_id(&self) -> HashId {
        (1u16 << (self.cell_width - 1)) - 1
    }

    /// Upper bound on the probability that a uniformly random non-committed
    /// key walks into a complete chain: `t / omega`.
    pub fn false_hit_rate_bound(&self) -> f64 {
        self.t as f64 / self.omega as f64
    }

    /// `(end flag, stored id)` of cell `i`; `(false, 0)` is the empty cell.
    pub fn cell_parts(&self, i: u64) -> (bool, HashId) {
        let raw = self.raw_cell(i);
        (raw & 1 == 1, raw >> 1)
    }

    #[inline]
    fn raw_cell(&self, i: u64) -> u16 {
        debug_assert!(i < self.omega, "cell {i} out of range");
        let w = u64::from(self.cell_width);
        let off = i * w;
        let byte = (off / 8) as usize;
        let shift = (off % 8) as u32;
        let lo = u16::from(self.bytes[byte]);
        let hi = u16::from(self.bytes.get(byte + 1).copied().unwrap_or(0));
        ((lo | (hi << 8)) >> shift) & ((1u16 << w) - 1)
    }

    #[inline]
    fn set_raw_cell(&mut self, i: u64, v: u16) {
        debug_assert!(i < self.omega, "cell {i} out of range");
        let w = u32::from(self.cell_width);
        debug_assert!(v < (1 << w));
        let off = i * u64::from(w);
        let byte = (off / 8) as usize;
        let shift = (off % 8) as u32;
        let mask = (((1u16 << w) - 1) << shift) as u32;
        let hi = u32::from(self.bytes.get(byte + 1).copied().unwrap_or(0));
        let cur = u32::from(self.bytes[byte]) | (hi << 8);
        let nv = (cur & !mask) | ((u32::from(v) << shift) & mask);
        self.bytes[byte] = nv as u8;
        if shift + w > 8 {
            self.bytes[byte + 1] = (nv >> 8) as u8;
        }
    }

    /// Searches for a way to store `phi` (distinct ids) for `key`; `None`
    /// when no marking order is compatible with the committed cells. A
    /// non-empty cell is compatible only in its stored role: it must hold
    /// the wanted id, carry no end flag on an interior step, and carry one
    /// on the final step — so committing the plan never rewrites a cell and
    /// earlier chains keep reading back verbatim. Among compatible orders
    /// the result maximizes reused cells, breaking ties toward the
    /// lexicographically smallest id sequence, so the outcome is
    /// deterministic. Does not modify the array.
    ///
    /// # Panics
    ///
    /// Panics if `phi` is empty, longer than 16, contains duplicates, or
    /// contains an id outside `1..=self.max_id()`.
    pub fn plan_insert(
        &self,
        family: &HashFamily,
        key: &[u8],
        phi: &[HashId],
    ) -> Option<InsertionPlan> {
        self.plan_insert_prepared(&family.prepare(key), phi)
    }

    /// [`Self::plan_insert`] for an already prepared key.
    pub fn plan_insert_prepared(
        &self,
        pk: &PreparedKey<'_>,
        phi: &[HashId],
    ) -> Option<InsertionPlan> {
        let k = phi.len();
        assert!(k >= 1, "chain must contain at least one id");
        assert!(k <= 16, "chains longer than 16 ids are not supported");
        let cap = self.max_id();
        let mut ids: [HashId; 16] = [0; 16];
        ids[..k].copy_from_slice(phi);
        ids[..k].sort_unstable();
        let ids = &ids[..k];
        for w in ids.windows(2) {
            assert!(w[0] != w[1], "chain ids must be distinct");
        }
        assert!(
            ids[0] >= 1 && ids[k - 1] <= cap,
            "chain ids must lie in 1..={cap} for cell width {}",
            self.cell_width
        );

        let entry = pk.eval(self.entry_id, self.omega);
        let mut pos = [0u64; 16];
        let mut content = [0u16; 16];
        let mut end_at = [false; 16];
        for i in 0..k {
            pos[i] = pk.eval(ids[i], self.omega);
            let raw = self.raw_cell(pos[i]);
            content[i] = raw >> 1;
            end_at[i] = raw & 1 == 1;
        }
        let raw_entry = self.raw_cell(entry);
        let content_entry = raw_entry >> 1;
        let end_entry = raw_entry & 1 == 1;

        // Bit masks of coinciding cells: a valid marking order never visits
        // the same cell twice.
        let mut entry_coll = 0u32;
        let mut coll = [0u32; 16];
        for i in 0..k {
            if pos[i] == entry {
                entry_coll |= 1 << i;
            }
            for j in 0..k {
                if j != i && pos[j] == pos[i] {
                    coll[i] |= 1 << j;
                }
            }
        }

        // g[mask * k + last]: best extra reuse collectable after having
        // marked `mask` with `last` most recent, or UNREACH if no valid
        // completion exists from that state. States with more ids marked
        // have numerically larger masks, so a descending scan suffices.
        const UNREACH: i16 = -1;
        let full = ((1u32 << k) - 1) as usize;
        let mut g = vec![UNREACH; (full + 1) * k];
        for last in 0..k {
            g[full * k + last] = 0;
        }
        for mask in (1..full as u32).rev() {
            for last in 0..k {
                if mask & (1 << last) == 0 {
                    continue;
                }
                // The state exits through the cell at pos[last]; that cell
                // must be fresh.
                if entry_coll >> last & 1 == 1 || coll[last] & (mask & !(1 << last)) != 0 {
                    continue;
                }
                let c = content[last];
                let e = end_at[last];
                let mut best = UNREACH;
                for b in 0..k {
                    if mask & (1 << b) != 0 {
                        continue;
                    }
                    // An occupied cell is reusable only in its stored role:
                    // interior needs the end flag clear, final needs it set.
                    let ends_chain = mask as usize | (1 << b) == full;
                    let reuse: i16 = if c == 0 {
                        0
                    } else if c == ids[b] && e == ends_chain {
                        1
                    } else {
                        continue;
                    };
                    let sub = g[(mask as usize | (1 << b)) * k + b];
                    if sub != UNREACH && sub + reuse > best {
                        best = sub + reuse;
                    }
                }
                g[mask as usize * k + last] = best;
            }
        }

        let mut best_total = UNREACH;
        for a in 0..k {
            let ends_chain = (1usize << a) == full;
            let reuse: i16 = if content_entry == 0 {
                0
            } else if content_entry == ids[a] && end_entry == ends_chain {
                1
            } else {
                continue;
            };
            let sub = g[(1 << a) * k + a];
            if sub != UNREACH && sub + reuse > best_total {
                best_total = sub + reuse;
            }
        }
        if best_total == UNREACH {
            return None;
        }

        // Reconstruct the optimum, preferring the smallest id at every step;
        // g encodes exactly which prefixes can still reach `best_total`.
        let mut steps = Vec::with_capacity(k);
        let mut mask = 0usize;
        let mut cur_cell = entry;
        let mut cur_content = content_entry;
        let mut cur_end = end_entry;
        let mut need = best_total;
        for _ in 0..k {
            let mut advanced = false;
            for b in 0..k {
                if mask & (1 << b) != 0 {
                    continue;
                }
                let ends_chain = mask | (1 << b) == full;
                let reuse: i16 = if cur_content == 0 {
                    0
                } else if cur_content == ids[b] && cur_end == ends_chain {
                    1
                } else {
                    continue;
                };
                let sub = g[(mask | (1 << b)) * k + b];
                if sub == UNREACH || sub + reuse != need {
                    continue;
                }
                steps.push(PlanStep {
                    cell: cur_cell,
                    id: ids[b],
                    reused: reuse == 1,
                });
                mask |= 1 << b;
                need -= reuse;
                cur_cell = pos[b];
                cur_content = content[b];
                cur_end = end_at[b];
                advanced = true;
                break;
            }
            if !advanced {
                debug_assert!(false, "plan reconstruction lost the optimum");
                return None;
            }
        }
        Some(InsertionPlan {
            steps,
            overlap: best_total as u32,
        })
    }

    /// Applies a plan. Every step is re-validated against the current cells
    /// first: a step cell must still be empty or hold exactly the step's id
    /// in the step's role (end flag clear on interior steps, set on the
    /// final step), otherwise nothing is written and a conflict error is
    /// returned. On success every empty step cell is written — the last one
    /// with the end flag — occupied step cells are left untouched, and the
    /// committed-chain count increases by one.
    pub fn commit(&mut self, plan: &InsertionPlan) -> Result<()> {
        let steps = &plan.steps;
        if steps.is_empty() {
            return Err(HabfError::Conflict("plan has no steps".into()));
        }
        let cap = self.max_id();
        let last = steps.len() - 1;
        for (i, st) in steps.iter().enumerate() {
            if st.id == EMPTY_ID || st.id > cap {
                return Err(HabfError::Config(format!(
                    "plan id {} not representable at cell width {}",
                    st.id, self.cell_width
                )));
            }
            if st.cell >= self.omega {
                return Err(HabfError::Config(format!(
                    "plan cell {} out of range for {} cells",
                    st.cell, self.omega
                )));
            }
            for other in &steps[..i] {
                if other.cell == st.cell {
                    return Err(HabfError::Conflict(format!(
                        "plan visits cell {} twice",
                        st.cell
                    )));
                }
            }
            let raw = self.raw_cell(st.cell);
            if raw != 0 {
                let stored = raw >> 1;
                if stored != st.id {
                    return Err(HabfError::Conflict(format!(
                        "cell {} now holds id {stored}, plan expected {}",
                        st.cell,
                        if st.reused { st.id } else { EMPTY_ID }
                    )));
                }
                // A shared cell must keep its role: the flag that ends a
                // chain cannot appear mid-walk or be missing at the end.
                if (raw & 1 == 1) != (i == last) {
                    return Err(HabfError::Conflict(format!(
                        "cell {} end flag conflicts with step {} of {}",
                        st.cell,
                        i + 1,
                        steps.len()
                    )));
                }
            }
        }
        for (i, st) in steps.iter().enumerate() {
            if self.raw_cell(st.cell) == 0 {
                self.set_raw_cell(st.cell, (st.id << 1) | u16::from(i == last));
                self.occupied += 1;
            }
        }
        self.t += 1;
        Ok(())
    }

    /// Walks the stored chain for `key`: `Some(ids)` when the walk reads
    /// exactly `k` ids ending on an end flag, `None` when it meets an empty
    /// cell or the stored chain length differs from `k`.
    pub fn query(&self, family: &HashFamily, key: &[u8], k: usize) -> Option<Vec<HashId>> {
        self.query_prepared(&family.prepare(key), k)
    }

    /// [`Self::query`] for an already prepared key.
    pub fn query_prepared(&self, pk: &PreparedKey<'_>, k: usize) -> Option<Vec<HashId>> {
        debug_assert!(k >= 1);
        let mut cell = pk.eval(self.entry_id, self.omega);
        let mut chain = Vec::with_capacity(k);
        loop {
            let raw = self.raw_cell(cell);
            if raw == 0 {
                return None;
            }
            let id = raw >> 1;
            if id == EMPTY_ID {
                debug_assert!(false, "cell {cell} has an end flag but no id");
                return None;
            }
            chain.push(id);
            if raw & 1 == 1 {
                return (chain.len() == k).then_some(chain);
            }
            if chain.len() == k {
                return None;
            }
            cell = pk.eval(id, self.omega);
        }
    }

    /// Raw cell array, `ceil(omega * cell_width / 8)` little-endian bytes;
    /// bits past the last cell are zero.
    pub fn cell_bytes(&self) -> Vec<u8> {
        self.bytes.clone()
    }

    /// Rebuilds an array from [`Self::cell_bytes`] output. Validates the
    /// byte length, that padding bits past the last cell are zero, and that
    /// every non-empty cell holds an id in `1..=max_id`, where `max_id` also
    /// caps to the family size the caller will walk with.
    pub(crate) fn from_cell_bytes(
        omega: u64,
        cell_width: u8,
        entry_id: HashId,
        t: u64,
        max_id: HashId,
        bytes: &[u8],
    ) -> Result<Self> {
        let mut he = Self::new(omega, cell_width, entry_id)?;
        let expect = (omega * u64::from(cell_width)).div_ceil(8) as usize;
        if bytes.len() != expect {
            return Err(HabfError::Config(format!(
                "cell array length {} does not match {expect} bytes for {omega} cells",
                bytes.len()
            )));
        }
        he.bytes.copy_from_slice(bytes);
        let used_bits = omega * u64::from(cell_width);
        if !used_bits.is_multiple_of(8) {
            let last = bytes[expect - 1];
            if last >> (used_bits % 8) != 0 {
                return Err(HabfError::Config(
                    "cell array has set bits past the last cell".into(),
                ));
            }
        }
        let cap = he.max_id().min(max_id);
        let mut occupied = 0u64;
        for i in 0..omega {
            let raw = he.raw_cell(i);
            if raw == 0 {
                continue;
            }
            let id = raw >> 1;
            if id == EMPTY_ID || id > cap {
                return Err(HabfError::Config(format!(
                    "cell {i} holds invalid id {id} (limit {cap})"
                )));
            }
            occupied += 1;
        }
        he.occupied = occupied;
        he.t = t;
        Ok(he)
    }
}

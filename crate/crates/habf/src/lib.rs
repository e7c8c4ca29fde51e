//! Cost-aware membership filters with per-key customized hash chains.
//!
//! The centerpiece is [`Habf`], a filter that pairs a Bloom bit array with a
//! compact cell array storing *customized hash chains* for a few troublesome
//! keys. After the positive set is inserted, known high-cost false positives
//! are re-routed onto chains that avoid their collisions; querying first
//! checks the default chain, then falls back to the stored chain, so
//! inserted keys are never reported absent while expensive false positives
//! are suppressed. [`Habf::build_fast`] trades a little of that suppression
//! for construction speed by deriving all hash values of a key from a single
//! 128-bit hash and restricting the optimizer to adjustments that only clear
//! bits.
//!
//! Supporting modules are usable on their own:
//!
//! * [`bloom`] — a Bloom filter whose hash subset is chosen per call.
//! * [`expressor`] — the chain-storing cell array with plan/commit/query.
//! * [`hashing`] — deterministic seeded hash families in three realizations.
//! * [`analysis`] — closed-form error rates and bounds for these filters,
//!   plus a numeric verifier that measures real builds against the bounds.
//! * [`workload`] — deterministic datasets: random keys, Zipf-distributed
//!   query costs, and file round-trip in plain formats.

pub mod analysis;
pub mod bloom;
mod build;
pub mod error;
pub mod expressor;
mod filter;
pub mod hashing;
pub mod workload;

pub use bloom::{optimal_k, theoretical_fpr, BloomFilter};
pub use build::{BuildDebug, BuildStats};
pub use error::{HabfError, Result};
pub use expressor::{HashExpressor, InsertionPlan, PlanStep};
pub use filter::{Habf, HabfConfig};
pub use hashing::{make_family, mix64, FamilyMode, HashFamily, HashId, PreparedKey, EMPTY_ID};

#[doc(hidden)]
pub use build::conflict_members_with;

//! Construction throughput comparison: full build vs fast build.
//!
//! Runs interleaved (full, fast) build pairs over the same dataset and
//! reports per-pair ratios plus their median, so scheduler noise hits both
//! variants alike. The full build uses a classical distinct-function family
//! and registers every negative in the conflict index up front; the fast
//! build hashes each key once and reuses the digest everywhere.

use std::time::Instant;

use habf::workload::make_string_dataset;
use habf::{FamilyMode, Habf, HabfConfig};

fn build_ms(cfg: &HabfConfig, ds: &habf::workload::Dataset) -> f64 {
    let t = Instant::now();
    let f = Habf::build(&ds.positives, &ds.negatives, cfg).unwrap();
    let dt = t.elapsed().as_secs_f64() * 1e3;
    std::hint::black_box(f.stats().optimized);
    dt
}

fn main() {
    let n = 100_000usize;
    let len = 128usize;
    let ds = make_string_dataset(n, n, len, 1.0, 7, 0).unwrap();
    for &k in &[3u16, 4] {
        let mut full = HabfConfig::new((n * 10) as u64);
        full.k = k;
        full.family_mode = FamilyMode::Distinct;
        full.protect_all_negatives = true;
        let mut fast = full.clone();
        fast.fast_mode = true;

        // Warm both paths once, then measure interleaved pairs.
        build_ms(&full, &ds);
        build_ms(&fast, &ds);
        let mut ratios = Vec::new();
        let (mut tf, mut ts) = (Vec::new(), Vec::new());
        for _ in 0..7 {
            let a = build_ms(&full, &ds);
            let b = build_ms(&fast, &ds);
            tf.push(a);
            ts.push(b);
            ratios.push(a / b);
        }
        ratios.sort_by(f64::total_cmp);
        tf.sort_by(f64::total_cmp);
        ts.sort_by(f64::total_cmp);
        println!(
            "len {len}  k {k}  full {:6.1} ms  fast {:6.1} ms  \
             ratio med {:4.2}x  min {:4.2}x  max {:4.2}x",
            tf[tf.len() / 2],
            ts[ts.len() / 2],
            ratios[ratios.len() / 2],
            ratios[0],
            ratios[ratios.len() - 1],
        );
    }
}

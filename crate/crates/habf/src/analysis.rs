//! Closed-form evaluators for the filter's error and cost behaviour, plus a
//! sweep that rebuilds filters across geometries and verifies every measured
//! rate stays under its bound.
//!
//! All evaluators are pure `f64` computations, total on their documented
//! domains; domain violations return [`HabfError::Input`]. Bounds are strict
//! inequalities and callers compare with `<` (no epsilon).

use rayon::prelude::*;

use crate::error::{HabfError, Result};
use crate::filter::{Habf, HabfConfig};
use crate::workload;

/// Cost-weighted false-positive rate: the cost share of the entries marked
/// hit. `hits[i]` says whether key `i` (a true negative) passed the filter;
/// `costs[i]` is its query cost.
pub fn weighted_fpr(hits: &[bool], costs: &[f64]) -> Result<f64> {
    if hits.len() != costs.len() {
        return Err(HabfError::Input(format!(
            "{} hit flags against {} costs",
            hits.len(),
            costs.len()
        )));
    }
    let mut total = 0.0;
    let mut hit_cost = 0.0;
    for (i, (&hit, &cost)) in hits.iter().zip(costs).enumerate() {
        if !cost.is_finite() || cost < 0.0 {
            return Err(HabfError::Input(format!("cost {cost} at index {i} is invalid")));
        }
        total += cost;
        if hit {
            hit_cost += cost;
        }
    }
    if total == 0.0 {
        return Err(HabfError::Input(
            "total cost is zero; the weighted rate is undefined".into(),
        ));
    }
    Ok(hit_cost / total)
}

/// Plain and cost-weighted false-positive rates of `query` over a negative
/// set (keys the filter was not built on).
pub fn measured_rates(
    query: impl Fn(&[u8]) -> bool,
    negatives: &[(Vec<u8>, f64)],
) -> Result<(f64, f64)> {
    if negatives.is_empty() {
        return Err(HabfError::Input("empty negative set; rates undefined".into()));
    }
    let hits: Vec<bool> = negatives.iter().map(|(k, _)| query(k)).collect();
    let costs: Vec<f64> = negatives.iter().map(|(_, c)| *c).collect();
    let plain = hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64;
    Ok((plain, weighted_fpr(&hits, &costs)?))
}

/// Overall two-round false-positive rate composed from the default-chain
/// rate `residual_fpr` and the stored-chain false-hit rate `false_hit_rate`:
/// a negative passes if its default chain hits, or a false chain walk sends
/// it to positions that hit.
pub fn composed_fpr(residual_fpr: f64, false_hit_rate: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&residual_fpr));
    debug_assert!((0.0..=1.0).contains(&false_hit_rate));
    residual_fpr + false_hit_rate * residual_fpr * (1.0 - residual_fpr)
}

/// Upper bound on the composed rate using only the cell-array load: with
/// `t` chains in `omega` cells the false-hit rate is at most `t/omega`, so
/// the composed rate stays below `residual_fpr * (omega + t) / omega`.
pub fn composed_fpr_upper_bound(residual_fpr: f64, omega: u64, t: u64) -> f64 {
    debug_assert!(omega >= 1);
    residual_fpr * (omega + t) as f64 / omega as f64
}

/// Lower bound on the expected fraction of a colliding key's bits that are
/// owned by exactly one positive key, at `k` hashes and `bits_per_key` bits
/// of budget: `x / (e^x - 1)` with `x = k / bits_per_key`.
pub fn single_owner_rate_lower_bound(k: u32, bits_per_key: f64) -> Result<f64> {
    if k < 1 || bits_per_key.is_nan() || bits_per_key <= 0.0 {
        return Err(HabfError::Input(format!(
            "need k >= 1 and positive bits per key, got k={k}, b={bits_per_key}"
        )));
    }
    let x = f64::from(k) / bits_per_key;
    Ok(x / x.exp_m1())
}

/// Lower bound on the expected number of queued collision keys the
/// optimizer resolves, from `initial_collisions` queued keys of which a
/// `candidate_rate` fraction have at least one candidate adjustment, with
/// `omega` cells and chain length `k`.
pub fn optimized_count_lower_bound(
    initial_collisions: u64,
    candidate_rate: f64,
    omega: u64,
    k: u32,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&candidate_rate) {
        return Err(HabfError::Input(format!(
            "candidate rate {candidate_rate} outside [0, 1]"
        )));
    }
    let k2 = f64::from(k) * f64::from(k);
    let omega = omega as f64;
    if omega <= k2 {
        return Err(HabfError::Input(format!(
            "need more than k^2 = {k2} cells, got {omega}"
        )));
    }
    let tp = initial_collisions as f64 * candidate_rate;
    Ok(tp * (omega - k2) / (omega + tp * k2))
}

/// Upper bound on the default-chain false-positive rate after optimization:
/// the pre-optimization rate `initial_fpr` minus the guaranteed resolved
/// share of the `n_negatives` probe keys.
pub fn residual_fpr_upper_bound(
    initial_fpr: f64,
    initial_collisions: u64,
    candidate_rate: f64,
    omega: u64,
    k: u32,
    n_negatives: u64,
) -> Result<f64> {
    if n_negatives == 0 {
        return Err(HabfError::Input("need at least one negative key".into()));
    }
    if !(0.0..=1.0).contains(&initial_fpr) {
        return Err(HabfError::Input(format!("rate {initial_fpr} outside [0, 1]")));
    }
    let resolved = optimized_count_lower_bound(initial_collisions, candidate_rate, omega, k)?;
    Ok(initial_fpr - resolved / n_negatives as f64)
}

/// Lower bound on the expected fraction of queued keys that have at least
/// one candidate adjustment, from the post-insertion zero-bit fraction,
/// chain length `k >= 2`, the number of protected negatives, the
/// chain-eligible family size, and the bit-array size `m`:
/// `(1 - z^{k-1})^{n |H|^2 / (4m)}` with `z = zero_bit_fraction`.
pub fn candidate_rate_lower_bound(
    zero_bit_fraction: f64,
    k: u32,
    n_negatives: u64,
    family_size: u16,
    m: u64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&zero_bit_fraction) {
        return Err(HabfError::Input(format!(
            "zero-bit fraction {zero_bit_fraction} outside [0, 1]"
        )));
    }
    if k < 2 {
        return Err(HabfError::Input(format!(
            "bound needs k >= 2 (one spare owned bit), got {k}"
        )));
    }
    if m == 0 {
        return Err(HabfError::Input("bit array size must be positive".into()));
    }
    let h = f64::from(family_size);
    let exponent = n_negatives as f64 * h * h / (4.0 * m as f64);
    Ok((1.0 - zero_bit_fraction.powi(k as i32 - 1)).powf(exponent))
}

/// Expected total miss cost of inserting `alpha` batches of `k`-hash keys
/// into `m` bits, for a plain filter and for one that steers insertions
/// away from bit `i` with probability `avoidance[i]`. A bit's cost
/// `costs[i]` is paid once it flips to one; avoidance keeps it zero longer.
/// Returns `(plain, steered)`; the steered total never exceeds the plain
/// one.
pub fn insertion_workload_costs(
    m: u64,
    k: u32,
    alpha: f64,
    costs: &[f64],
    avoidance: &[f64],
) -> Result<(f64, f64)> {
    if costs.len() != m as usize || avoidance.len() != m as usize {
        return Err(HabfError::Input(format!(
            "need {m} per-bit costs and avoidance probabilities, got {} and {}",
            costs.len(),
            avoidance.len()
        )));
    }
    if m == 0 || k == 0 || alpha.is_nan() || alpha < 0.0 {
        return Err(HabfError::Input(format!(
            "need positive m and k and non-negative alpha, got m={m}, k={k}, alpha={alpha}"
        )));
    }
    let exponent = f64::from(k) * alpha;
    let mf = m as f64;
    let base_plain = 1.0 - 1.0 / mf;
    let mut plain = 0.0;
    let mut steered = 0.0;
    for (i, (&cost, &p)) in costs.iter().zip(avoidance).enumerate() {
        if !cost.is_finite() || cost < 0.0 {
            return Err(HabfError::Input(format!("cost {cost} at bit {i} is invalid")));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(HabfError::Input(format!(
                "avoidance probability {p} at bit {i} outside [0, 1]"
            )));
        }
        plain += cost * (1.0 - base_plain.powf(exponent));
        steered += cost * (1.0 - (base_plain + p / mf).powf(exponent));
    }
    debug_assert!(steered <= plain + 1e-9 * plain.abs());
    Ok((plain, steered))
}

/// Probability that at least one of `replacements` uniformly drawn target
/// bits is still zero when `set_bits` of `m` bits are one.
pub fn zero_target_rate(set_bits: u64, m: u64, replacements: u32) -> Result<f64> {
    if m == 0 || set_bits > m {
        return Err(HabfError::Input(format!(
            "need set_bits <= m and m >= 1, got {set_bits} of {m}"
        )));
    }
    Ok(1.0 - (set_bits as f64 / m as f64).powi(replacements as i32))
}

/// Lower bound on the per-bit probability that construction steers an
/// insertion away from a given bit, under an insertion workload of `alpha`
/// batches: `(omega + k^2) / (omega m / (zero_target_rate * set_bits) +
/// k^3 alpha)`.
pub fn insertion_avoidance_bound(
    omega: u64,
    k: u32,
    m: u64,
    set_bits: u64,
    alpha: f64,
    zero_target_rate: f64,
) -> Result<f64> {
    if omega == 0 || k == 0 || m == 0 || set_bits == 0 || set_bits > m {
        return Err(HabfError::Input(format!(
            "need positive omega, k, m and 1 <= set_bits <= m; got omega={omega}, k={k}, m={m}, set_bits={set_bits}"
        )));
    }
    if alpha.is_nan()
        || alpha < 0.0
        || zero_target_rate.is_nan()
        || zero_target_rate <= 0.0
        || zero_target_rate > 1.0
    {
        return Err(HabfError::Input(format!(
            "need alpha >= 0 and zero-target rate in (0, 1], got {alpha} and {zero_target_rate}"
        )));
    }
    let (omega, kf, mf) = (omega as f64, f64::from(k), m as f64);
    let k2 = kf * kf;
    Ok((omega + k2) / (omega * mf / (zero_target_rate * set_bits as f64) + k2 * kf * alpha))
}

/// Checks `Π(1 - p_i) >= 1 - Σ p_i` (the complement form of the union
/// bound) within `1e-12` slack. Probabilities must lie in `[0, 1]`.
pub fn complement_product_inequality(p: &[f64]) -> bool {
    assert!(
        p.iter().all(|&x| (0.0..=1.0).contains(&x)),
        "probabilities must lie in [0, 1]"
    );
    let prod: f64 = p.iter().map(|&x| 1.0 - x).product();
    let sum: f64 = p.iter().sum();
    prod >= 1.0 - sum - 1e-12
}

/// Checks that `f(x) = s * x / ((1-x)^{-s} - 1)` is convex and strictly
/// decreasing over `grid` (strictly increasing points inside `(0, 1)`).
/// Convexity uses the chord test with `1e-9` absolute slack; monotonicity
/// is checked on `log f`, which stays representable where `f` underflows.
// The negated comparisons make a NaN anywhere count as a violation.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn occupancy_ratio_convexity(s: u64, grid: &[f64]) -> bool {
    assert!(s >= 1, "set size must be at least 1");
    assert!(grid.len() >= 3, "need at least three grid points");
    for w in grid.windows(2) {
        assert!(w[0] < w[1], "grid must be strictly increasing");
    }
    assert!(
        grid[0] > 0.0 && *grid.last().unwrap() < 1.0,
        "grid must lie inside (0, 1)"
    );
    let sf = s as f64;
    // With L = -s*ln(1-x) > 0: f = s*x / (e^L - 1), so
    // ln f = ln(s*x) - L - ln(1 - e^{-L}), every term representable.
    let log_f = |x: f64| {
        let l = -sf * (1.0 - x).ln();
        (sf * x).ln() - l - (-(-l).exp()).ln_1p()
    };
    let lf: Vec<f64> = grid.iter().map(|&x| log_f(x)).collect();
    if lf.windows(2).any(|w| !(w[1] < w[0] + 1e-12)) {
        return false;
    }
    let fv: Vec<f64> = lf.iter().map(|&v| v.exp()).collect();
    for i in 1..grid.len() - 1 {
        let (x0, x1, x2) = (grid[i - 1], grid[i], grid[i + 1]);
        let chord = ((x2 - x1) * fv[i - 1] + (x1 - x0) * fv[i + 1]) / (x2 - x0);
        if !(fv[i] <= chord + 1e-9) {
            return false;
        }
    }
    true
}

/// Problem sizes for [`verify_bounds`].
#[derive(Clone, Copy, Debug)]
pub struct VerifyScale {
    pub n_keys: usize,
    pub n_negatives: usize,
    pub seed: u64,
}

impl VerifyScale {
    /// Desk scale: large enough that every sweep point collides, small
    /// enough to finish in seconds.
    pub fn desk() -> Self {
        Self {
            n_keys: 20_000,
            n_negatives: 20_000,
            seed: 1,
        }
    }
}

/// One verification point: a filter built at the given geometry with its
/// measured default-chain rate against the bound predicted from its own
/// construction counters.
#[derive(Clone, Debug, serde::Serialize)]
pub struct BoundCheckRow {
    /// Which parameter this point sweeps: `"k"` or `"bits_per_key"`.
    pub sweep: String,
    pub k: u16,
    pub bits_per_key: u64,
    pub total_bits: u64,
    pub m: u64,
    pub omega: u64,
    pub cell_width: u8,
    pub family_size: u16,
    pub initial_collisions: u64,
    pub candidate_rate: f64,
    pub initial_fpr: f64,
    pub residual_fpr: f64,
    pub residual_fpr_bound: f64,
    pub pass: bool,
}

/// Builds a filter at every sweep point (chain lengths 2..=10 at 10 bits
/// per key, then 4..=13 bits per key at chain length 4), measures the
/// default-chain false-positive rate after optimization, and checks it
/// stays strictly under [`residual_fpr_upper_bound`] evaluated with the
/// build's own counters. Points run in parallel; row order follows
/// parameter order and the report is deterministic in the seed.
pub fn verify_bounds(scale: &VerifyScale) -> Result<Vec<BoundCheckRow>> {
    let all = workload::gen_keys(scale.n_keys + scale.n_negatives, scale.seed)?;
    let positives = &all[..scale.n_keys];
    let negatives: Vec<(Vec<u8>, f64)> = all[scale.n_keys..]
        .iter()
        .map(|k| (k.clone(), 1.0))
        .collect();

    // (sweep label, k, bits per key, cell width, family size); wider cells
    // on the k sweep so chains up to length 10 keep spare family members.
    let mut points: Vec<(&str, u16, u64, u8, u16)> = Vec::new();
    for k in 2..=10u16 {
        points.push(("k", k, 10, 5, 12));
    }
    for b in 4..=13u64 {
        points.push(("bits_per_key", 4, b, 4, 7));
    }

    points
        .par_iter()
        .map(|&(sweep, k, b, cell_width, family_size)| {
            let mut cfg = HabfConfig::new(b * scale.n_keys as u64);
            cfg.k = k;
            cfg.cell_width = cell_width;
            cfg.family_size = family_size;
            cfg.family_seed = scale.seed;
            let habf = Habf::build(positives, &negatives, &cfg)?;
            let stats = habf.stats();
            let hits = negatives
                .iter()
                .filter(|(key, _)| habf.bloom().contains(key))
                .count();
            let residual_fpr = hits as f64 / negatives.len() as f64;
            let bound = residual_fpr_upper_bound(
                stats.initial_bloom_fpr,
                stats.initial_collisions,
                stats.candidate_rate,
                habf.omega(),
                u32::from(k),
                negatives.len() as u64,
            )?;
            let pass = residual_fpr < bound
                || (stats.initial_collisions == 0 && residual_fpr == bound);
            Ok(BoundCheckRow {
                sweep: sweep.to_string(),
                k,
                bits_per_key: b,
                total_bits: cfg.total_bits,
                m: habf.m(),
                omega: habf.omega(),
                cell_width,
                family_size,
                initial_collisions: stats.initial_collisions,
                candidate_rate: stats.candidate_rate,
                initial_fpr: stats.initial_bloom_fpr,
                residual_fpr,
                residual_fpr_bound: bound,
                pass,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(actual: f64, frozen: f64, rel: f64) {
        let scale = frozen.abs().max(f64::MIN_POSITIVE);
        assert!(
            (actual - frozen).abs() <= rel * scale,
            "{actual} vs {frozen} (rel {:e})",
            (actual - frozen).abs() / scale
        );
    }

    #[test]
    fn weighted_rate_follows_the_cost_shares() {
        assert_eq!(weighted_fpr(&[false, false], &[1.0, 3.0]).unwrap(), 0.0);
        assert_eq!(weighted_fpr(&[false, true], &[1.0, 3.0]).unwrap(), 0.75);
        // Uniform costs reduce to the plain rate.
        let hits = [true, false, true, false, false];
        let uni = [2.0; 5];
        assert_eq!(weighted_fpr(&hits, &uni).unwrap(), 0.4);
        assert!(weighted_fpr(&[true], &[0.0]).is_err(), "zero total cost");
        assert!(weighted_fpr(&[true], &[1.0, 2.0]).is_err(), "length mismatch");
        assert!(weighted_fpr(&[true], &[-1.0]).is_err(), "negative cost");
        assert!(weighted_fpr(&[true], &[f64::INFINITY]).is_err());
    }

    #[test]
    fn measured_rates_agree_with_direct_counting() {
        let negatives: Vec<(Vec<u8>, f64)> = (0..10)
            .map(|i| (vec![i as u8], 1.0 + f64::from(i)))
            .collect();
        let (plain, weighted) = measured_rates(|k| k[0] % 3 == 0, &negatives).unwrap();
        assert_eq!(plain, 0.4);
        // Hits at 0,3,6,9 carry costs 1+4+7+10 = 22 of 55.
        close(weighted, 0.4, 1e-15);
        assert!(measured_rates(|_| true, &[]).is_err());
    }

    #[test]
    fn composition_matches_frozen_references() {
        close(composed_fpr(0.01, 0.001), 0.0100099, 1e-12);
        close(composed_fpr(0.03, 0.05), 0.031455, 1e-12);
        assert_eq!(composed_fpr(0.25, 0.0), 0.25);
        assert_eq!(composed_fpr(0.0, 0.7), 0.0);
        for fh in [0.0, 0.3, 1.0] {
            assert_eq!(composed_fpr(1.0, fh), 1.0, "1 is a fixed point");
        }
    }

    #[test]
    fn composed_bound_scales_with_cell_load() {
        assert_eq!(composed_fpr_upper_bound(0.01, 1000, 250), 0.0125);
        assert_eq!(composed_fpr_upper_bound(0.04, 512, 0), 0.04);
        // The composition never exceeds the bound when the false-hit rate
        // respects its own cap t/omega.
        for &(fs, omega, t) in &[(0.02, 1000u64, 300u64), (0.3, 64, 64), (0.001, 4096, 1)] {
            let fh = t as f64 / omega as f64;
            assert!(composed_fpr(fs, fh) <= composed_fpr_upper_bound(fs, omega, t) + 1e-15);
        }
    }

    #[test]
    fn single_owner_rate_matches_frozen_references() {
        close(
            single_owner_rate_lower_bound(3, 10.0).unwrap(),
            0.8574887740530247806917,
            1e-14,
        );
        close(
            single_owner_rate_lower_bound(1, 1.0).unwrap(),
            0.581976706869326424385,
            1e-14,
        );
        close(
            single_owner_rate_lower_bound(5, 5.0).unwrap(),
            0.581976706869326424385,
            1e-14,
        );
        close(
            single_owner_rate_lower_bound(2, 8.0).unwrap(),
            0.8802029160469496160587,
            1e-14,
        );
        close(
            single_owner_rate_lower_bound(7, 10.0).unwrap(),
            0.6905037045441243087277,
            1e-14,
        );
        // x -> 0 limit is 1, approached from below.
        let near_one = single_owner_rate_lower_bound(1, 1e9).unwrap();
        assert!(near_one < 1.0 && near_one > 1.0 - 1e-8);
        assert!(single_owner_rate_lower_bound(0, 10.0).is_err());
        assert!(single_owner_rate_lower_bound(3, 0.0).is_err());
    }

    #[test]
    fn optimized_count_matches_frozen_references() {
        close(
            optimized_count_lower_bound(100, 0.8, 1000, 3).unwrap(),
            46.09302325581395348837,
            1e-13,
        );
        close(
            optimized_count_lower_bound(500, 0.95, 12500, 3).unwrap(),
            353.6944858420268256334,
            1e-13,
        );
        close(
            optimized_count_lower_bound(200, 0.5, 2000, 4).unwrap(),
            55.11111111111111111111,
            1e-13,
        );
        assert_eq!(optimized_count_lower_bound(0, 0.9, 1000, 3).unwrap(), 0.0);
        // Saturation limit (omega - k^2) / k^2 as the queue grows.
        let sat = optimized_count_lower_bound(u64::MAX >> 16, 1.0, 1000, 3).unwrap();
        close(sat, 991.0 / 9.0, 1e-9);
        assert!(optimized_count_lower_bound(10, 0.5, 9, 3).is_err(), "omega <= k^2");
        assert!(optimized_count_lower_bound(10, 1.5, 1000, 3).is_err());
    }

    #[test]
    fn residual_bound_matches_frozen_references() {
        close(
            residual_fpr_upper_bound(0.02, 200, 0.9, 2000, 3, 10_000).unwrap(),
            0.0101,
            1e-13,
        );
        close(
            residual_fpr_upper_bound(0.05, 1000, 0.8, 12_500, 4, 20_000).unwrap(),
            0.03026245059288537549407,
            1e-13,
        );
        assert_eq!(
            residual_fpr_upper_bound(0.02, 0, 0.9, 2000, 3, 10_000).unwrap(),
            0.02,
            "no collisions leaves the initial rate"
        );
        // Strictly decreasing in the candidate rate.
        let mut last = f64::INFINITY;
        for i in 1..=9 {
            let b = residual_fpr_upper_bound(0.02, 200, f64::from(i) * 0.1, 2000, 3, 10_000)
                .unwrap();
            assert!(b < last, "bound must fall as the candidate rate rises");
            last = b;
        }
        assert!(residual_fpr_upper_bound(0.02, 1, 0.5, 2000, 3, 0).is_err());
    }

    #[test]
    fn candidate_rate_bound_matches_frozen_references() {
        close(
            candidate_rate_lower_bound(0.5, 3, 1000, 7, 10_000).unwrap(),
            0.7029914574897850912537,
            1e-13,
        );
        close(
            candidate_rate_lower_bound(0.3, 2, 20_000, 7, 200_000).unwrap(),
            0.646018714164046699591,
            1e-13,
        );
        close(
            candidate_rate_lower_bound(0.7, 4, 5_000, 15, 100_000).unwrap(),
            0.3068333783850063236357,
            1e-13,
        );
        close(
            candidate_rate_lower_bound(0.9, 3, 1000, 7, 10_000).unwrap(),
            0.1307594728773760036481,
            1e-13,
        );
        close(
            candidate_rate_lower_bound(0.1, 5, 2000, 12, 50_000).unwrap(),
            0.9998560031680591383064,
            1e-13,
        );
        assert_eq!(candidate_rate_lower_bound(0.0, 3, 1000, 7, 10_000).unwrap(), 1.0);
        assert_eq!(candidate_rate_lower_bound(0.5, 3, 0, 7, 10_000).unwrap(), 1.0);
        assert!(candidate_rate_lower_bound(0.5, 1, 1000, 7, 10_000).is_err());
        assert!(candidate_rate_lower_bound(1.5, 3, 1000, 7, 10_000).is_err());
    }

    #[test]
    fn workload_costs_match_frozen_references() {
        let m = 8u64;
        let unit = vec![1.0; 8];
        let none = vec![0.0; 8];
        let (plain, steered) = insertion_workload_costs(m, 2, 2.0, &unit, &none).unwrap();
        assert_eq!(plain, 3.310546875, "exact dyadic value");
        assert_eq!(steered, plain, "no steering, no difference");
        // Full steering keeps every bit zero.
        let full = vec![1.0; 8];
        let (_, steered) = insertion_workload_costs(m, 2, 2.0, &unit, &full).unwrap();
        assert_eq!(steered, 0.0);
        // Heavy workloads saturate the plain cost at the total cost.
        let costs: Vec<f64> = (0..8).map(|i| 1.0 + f64::from(i)).collect();
        let half = vec![0.5; 8];
        let (plain, steered) = insertion_workload_costs(m, 2, 1e6, &costs, &half).unwrap();
        close(plain, 36.0, 1e-9);
        close(steered, 36.0, 1e-3);
        assert!(steered <= plain);
        assert!(insertion_workload_costs(8, 2, 1.0, &unit, &none[..7]).is_err());
        assert!(insertion_workload_costs(8, 2, -1.0, &unit, &none).is_err());
        assert!(insertion_workload_costs(8, 2, 1.0, &[-1.0; 8], &none).is_err());
    }

    #[test]
    fn avoidance_bound_matches_frozen_references() {
        close(
            insertion_avoidance_bound(1000, 3, 10_000, 5, 2.0, 0.5).unwrap(),
            0.0002522465946709719418788,
            1e-13,
        );
        close(
            insertion_avoidance_bound(12_500, 3, 150_000, 7, 1.0, 0.9).unwrap(),
            0.00004203023618701697311382,
            1e-13,
        );
        close(
            insertion_avoidance_bound(2_000, 4, 20_000, 4, 0.0, 0.7).unwrap(),
            0.00014112,
            1e-13,
        );
        close(
            insertion_avoidance_bound(500, 2, 8_000, 10, 3.0, 0.3).unwrap(),
            0.0003779931961224697955437,
            1e-13,
        );
        // alpha = 0 collapses to the closed ratio.
        let a0 = insertion_avoidance_bound(2_000, 4, 20_000, 4, 0.0, 0.7).unwrap();
        close(a0, (2_000.0 + 16.0) * 0.7 * 4.0 / (2_000.0 * 20_000.0), 1e-13);
        // Monotone decreasing in alpha.
        let mut last = f64::INFINITY;
        for a in 0..6 {
            let v = insertion_avoidance_bound(1000, 3, 10_000, 5, f64::from(a), 0.5).unwrap();
            assert!(v < last);
            last = v;
        }
        assert!(insertion_avoidance_bound(0, 3, 10, 5, 1.0, 0.5).is_err());
        assert!(insertion_avoidance_bound(10, 3, 10, 11, 1.0, 0.5).is_err());
        assert!(insertion_avoidance_bound(10, 3, 10, 5, 1.0, 0.0).is_err());
    }

    #[test]
    fn zero_target_rate_composes_with_the_avoidance_bound() {
        close(zero_target_rate(5_000, 10_000, 4).unwrap(), 1.0 - 0.0625, 1e-15);
        assert_eq!(zero_target_rate(0, 100, 4).unwrap(), 1.0);
        assert_eq!(zero_target_rate(100, 100, 4).unwrap(), 0.0);
        assert!(zero_target_rate(101, 100, 4).is_err());
        let pc = zero_target_rate(100, 10_000, 4).unwrap();
        let v = insertion_avoidance_bound(1000, 3, 10_000, 100, 1000.0, pc).unwrap();
        assert!(v.is_finite() && v > 0.0 && v < 1.0);
    }

    #[test]
    fn complement_product_inequality_examples() {
        assert!(complement_product_inequality(&[0.0, 0.0, 0.0]));
        assert!(complement_product_inequality(&[0.1, 0.2])); // 0.72 >= 0.7
        assert!(complement_product_inequality(&[1.0, 1.0])); // 0 >= -1
        assert!(complement_product_inequality(&[0.5]));
        assert!(complement_product_inequality(&[]));
    }

    #[test]
    #[should_panic(expected = "probabilities")]
    fn complement_product_rejects_bad_probabilities() {
        complement_product_inequality(&[0.5, 1.5]);
    }

    #[test]
    fn occupancy_ratio_is_convex_decreasing_on_the_standard_grid() {
        let grid: Vec<f64> = (1..1000).map(|i| f64::from(i) / 1000.0).collect();
        for s in [1u64, 2, 10, 100, 1000] {
            assert!(occupancy_ratio_convexity(s, &grid), "set size {s}");
        }
    }

    #[test]
    #[should_panic(expected = "strictly increasing")]
    fn occupancy_ratio_rejects_unsorted_grids() {
        occupancy_ratio_convexity(2, &[0.1, 0.3, 0.2]);
    }

    #[test]
    fn verify_bounds_is_deterministic_and_ordered() {
        let scale = VerifyScale {
            n_keys: 2_000,
            n_negatives: 2_000,
            seed: 9,
        };
        let a = verify_bounds(&scale).unwrap();
        let b = verify_bounds(&scale).unwrap();
        assert_eq!(a.len(), 19);
        let render = |rows: &[BoundCheckRow]| {
            rows.iter()
                .map(|r| serde_json::to_string(r).unwrap())
                .collect::<Vec<_>>()
                .join("\n")
        };
        assert_eq!(render(&a), render(&b), "report must be reproducible");
        let ks: Vec<u16> = a.iter().take(9).map(|r| r.k).collect();
        assert_eq!(ks, (2..=10).collect::<Vec<u16>>());
        let bs: Vec<u64> = a.iter().skip(9).map(|r| r.bits_per_key).collect();
        assert_eq!(bs, (4..=13).collect::<Vec<u64>>());
        for row in &a {
            assert!(row.initial_collisions > 0, "sweep point saw no collisions");
            assert!(row.residual_fpr_bound.is_finite());
        }
    }

    #[test]
    fn verify_bounds_holds_at_desk_scale() {
        for row in verify_bounds(&VerifyScale::desk()).unwrap() {
            assert!(
                row.pass,
                "sweep {} point k={} b={}: measured {} vs bound {}",
                row.sweep, row.k, row.bits_per_key, row.residual_fpr, row.residual_fpr_bound
            );
            assert!(row.residual_fpr <= row.initial_fpr + 1e-12);
        }
    }
}

//! Python bindings for the `habf` crate.
//!
//! The module mirrors the Rust surface: `HabfConfig` carries filter
//! geometry, `Habf` builds, queries, and round-trips filters, and a few
//! module-level helpers cover dataset generation and the closed-form
//! calibration numbers. Keys are `bytes` on both sides; negative keys
//! travel as `(bytes, cost)` pairs.

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

fn to_py(e: habf::HabfError) -> PyErr {
    use habf::HabfError as E;
    match &e {
        E::Config(_) | E::Input(_) => PyValueError::new_err(e.to_string()),
        E::Io(_) | E::Parse { .. } | E::Format { .. } => PyIOError::new_err(e.to_string()),
        E::Conflict(_) => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Filter geometry and construction options.
#[pyclass(name = "HabfConfig", module = "habf_py", skip_from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: habf::HabfConfig,
}

#[pymethods]
impl PyConfig {
    /// `total_bits` is the whole budget; `delta` of it goes to chain
    /// cells of `cell_width` bits each and the rest to the bit array.
    /// `family` picks the hash family: "distinct", "seeded", or
    /// "double-hashing" (the fast variant forces the latter on its own).
    #[new]
    #[pyo3(signature = (total_bits, *, k=3, delta=0.25, cell_width=4, fast=false, seed=0, family="distinct", protect_all_negatives=false))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        total_bits: u64,
        k: u16,
        delta: f64,
        cell_width: u8,
        fast: bool,
        seed: u64,
        family: &str,
        protect_all_negatives: bool,
    ) -> PyResult<Self> {
        let mut cfg = habf::HabfConfig::new(total_bits);
        cfg.k = k;
        cfg.delta = delta;
        cfg.cell_width = cell_width;
        cfg.fast_mode = fast;
        cfg.family_seed = seed;
        cfg.protect_all_negatives = protect_all_negatives;
        cfg.family_mode = match family {
            "distinct" => habf::FamilyMode::Distinct,
            "seeded" => habf::FamilyMode::Seeded,
            "double-hashing" => habf::FamilyMode::DoubleHashing,
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown hash family {other:?}; use distinct, seeded, or double-hashing"
                )))
            }
        };
        cfg.validate().map_err(to_py)?;
        Ok(Self { inner: cfg })
    }

    #[getter]
    fn total_bits(&self) -> u64 {
        self.inner.total_bits
    }

    #[getter]
    fn k(&self) -> u16 {
        self.inner.k
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta
    }

    #[getter]
    fn cell_width(&self) -> u8 {
        self.inner.cell_width
    }

    #[getter]
    fn fast(&self) -> bool {
        self.inner.fast_mode
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.family_seed
    }

    /// `(bit_array_bits, cell_count)` after splitting the budget.
    #[getter]
    fn geometry(&self) -> (u64, u64) {
        self.inner.geometry()
    }

    fn __repr__(&self) -> String {
        format!(
            "HabfConfig(total_bits={}, k={}, delta={}, cell_width={}, fast={})",
            self.inner.total_bits,
            self.inner.k,
            self.inner.delta,
            self.inner.cell_width,
            self.inner.fast_mode
        )
    }
}

/// A built filter: zero false negatives, cost-steered false positives.
#[pyclass(name = "Habf", module = "habf_py")]
struct PyHabf {
    inner: habf::Habf,
}

#[pymethods]
impl PyHabf {
    /// Builds a filter over `positives`, steering hash chains away from
    /// the cost-weighted `negatives`. The two key sets must be disjoint.
    #[staticmethod]
    fn build(
        positives: Vec<Vec<u8>>,
        negatives: Vec<(Vec<u8>, f64)>,
        config: &PyConfig,
    ) -> PyResult<Self> {
        let inner = habf::Habf::build(&positives, &negatives, &config.inner).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Membership test; never false for a built-in positive.
    fn query(&self, key: &[u8]) -> bool {
        self.inner.query(key)
    }

    fn __contains__(&self, key: &[u8]) -> bool {
        self.inner.query(key)
    }

    /// The filter file bytes; `deserialize` restores an identical filter.
    fn serialize<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &self.inner.serialize())
    }

    #[staticmethod]
    fn deserialize(data: &[u8]) -> PyResult<Self> {
        Ok(Self {
            inner: habf::Habf::deserialize(data).map_err(to_py)?,
        })
    }

    /// Bits in the bit array.
    #[getter]
    fn m(&self) -> u64 {
        self.inner.m()
    }

    /// Chain cells.
    #[getter]
    fn omega(&self) -> u64 {
        self.inner.omega()
    }

    /// Hash chain length.
    #[getter]
    fn k(&self) -> u16 {
        self.inner.k()
    }

    /// Construction counters and rate estimates as a dict.
    fn stats<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let s = self.inner.stats();
        let d = PyDict::new(py);
        d.set_item("initial_collisions", s.initial_collisions)?;
        d.set_item("optimized", s.optimized)?;
        d.set_item("adjusted_keys", s.adjusted_keys)?;
        d.set_item("skipped_negative", s.skipped_negative)?;
        d.set_item("skipped_unprofitable", s.skipped_unprofitable)?;
        d.set_item("failed", s.failed)?;
        d.set_item("requeued", s.requeued)?;
        d.set_item("initial_bloom_fpr", s.initial_bloom_fpr)?;
        d.set_item("residual_bloom_fpr_estimate", s.residual_bloom_fpr_estimate)?;
        d.set_item("candidate_rate", s.candidate_rate)?;
        d.set_item("zero_bit_fraction_initial", s.zero_bit_fraction_initial)?;
        d.set_item("bits_set_initial", s.bits_set_initial)?;
        d.set_item("bits_set_final", s.bits_set_final)?;
        d.set_item("aux_bytes_peak", s.aux_bytes_peak)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!(
            "Habf(m={}, omega={}, k={}, optimized={})",
            self.inner.m(),
            self.inner.omega(),
            self.inner.k(),
            self.inner.stats().optimized
        )
    }
}

/// Seeded positive keys plus Zipf-cost negative keys, disjoint by
/// construction: `(positives, [(key, cost), ...])`.
#[pyfunction]
#[pyo3(signature = (n_pos, n_neg, *, skew=1.0, seed=0, round=0))]
fn make_dataset(
    n_pos: usize,
    n_neg: usize,
    skew: f64,
    seed: u64,
    round: u64,
) -> PyResult<(Vec<Vec<u8>>, Vec<(Vec<u8>, f64)>)> {
    let ds = habf::workload::make_dataset(n_pos, n_neg, skew, seed, round).map_err(to_py)?;
    Ok((ds.positives, ds.negatives))
}

/// Expected false-positive rate of a classic filter with chain length
/// `k` at `bits_per_key` bits.
#[pyfunction(name = "theoretical_fpr")]
fn theoretical_fpr_py(k: u32, bits_per_key: f64) -> f64 {
    habf::theoretical_fpr(k, bits_per_key)
}

/// The error-minimizing chain length at `bits_per_key` bits.
#[pyfunction(name = "optimal_k")]
fn optimal_k_py(bits_per_key: f64) -> u32 {
    habf::optimal_k(bits_per_key)
}

type DictRows<'py> = Vec<Bound<'py, PyDict>>;

/// Runs the numeric bound checks over the standard sweep grid and
/// returns one dict per point; `pass` reports measured < bound.
#[pyfunction]
#[pyo3(signature = (*, n_keys=20_000, n_negatives=20_000, seed=1))]
fn verify_bounds(
    py: Python<'_>,
    n_keys: usize,
    n_negatives: usize,
    seed: u64,
) -> PyResult<DictRows<'_>> {
    let rows = habf::analysis::verify_bounds(&habf::analysis::VerifyScale {
        n_keys,
        n_negatives,
        seed,
    })
    .map_err(to_py)?;
    let mut out = Vec::with_capacity(rows.len());
    for r in rows {
        let d = PyDict::new(py);
        d.set_item("sweep", &r.sweep)?;
        d.set_item("k", r.k)?;
        d.set_item("bits_per_key", r.bits_per_key)?;
        d.set_item("total_bits", r.total_bits)?;
        d.set_item("m", r.m)?;
        d.set_item("omega", r.omega)?;
        d.set_item("cell_width", r.cell_width)?;
        d.set_item("family_size", r.family_size)?;
        d.set_item("initial_collisions", r.initial_collisions)?;
        d.set_item("candidate_rate", r.candidate_rate)?;
        d.set_item("initial_fpr", r.initial_fpr)?;
        d.set_item("residual_fpr", r.residual_fpr)?;
        d.set_item("residual_fpr_bound", r.residual_fpr_bound)?;
        d.set_item("pass", r.pass)?;
        out.push(d);
    }
    Ok(out)
}

#[pymodule]
fn habf_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyHabf>()?;
    m.add_function(wrap_pyfunction!(make_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(theoretical_fpr_py, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_k_py, m)?)?;
    m.add_function(wrap_pyfunction!(verify_bounds, m)?)?;
    Ok(())
}

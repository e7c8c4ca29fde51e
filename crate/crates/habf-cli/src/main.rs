//! Command-line harness around the `habf` crate: build and query filter
//! files, benchmark the three filter variants, sweep construction
//! parameters, and verify the closed-form error bounds numerically.
//!
//! Exit codes: 0 success, 1 configuration error, 2 I/O or data-file error,
//! 3 internal invariant violation, 4 bound violation (`verify-bounds`).
//! Standard output carries only data (JSON summaries, `key<TAB>bit` lines,
//! CSV, or JSON-lines); diagnostics go to standard error.

use std::collections::HashSet;
use std::fs;
use std::io::{self, Read, Write as _};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use habf::analysis::{verify_bounds, VerifyScale};
use habf::workload::{self, Dataset};
use habf::{
    optimal_k, BloomFilter, FamilyMode, Habf, HabfConfig, HabfError, HashFamily, HashId, Result,
};

#[derive(Parser)]
#[command(
    name = "habf",
    version,
    about = "Cost-aware membership filters: build, query, benchmark, sweep, verify"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build a filter from a dataset and write it to a file.
    Build(BuildArgs),
    /// Query a filter file with keys from --key or standard input.
    Query(QueryArgs),
    /// Benchmark filter variants over shuffle rounds of one dataset.
    Bench(BenchArgs),
    /// Build filters across one parameter grid and report each point.
    Sweep(SweepArgs),
    /// Check measured error rates against the closed-form bounds.
    VerifyBounds(VerifyArgs),
}

/// Where the keys come from: a pair of files, or seeded generation.
#[derive(Args, Clone)]
struct DataArgs {
    /// Positive-keys file, one key per line.
    #[arg(long, requires = "negatives", conflicts_with = "gen_n")]
    positives: Option<PathBuf>,
    /// Negative-keys CSV file: `key[,cost]` per line.
    #[arg(long, requires = "positives")]
    negatives: Option<PathBuf>,
    /// Generate this many positive keys instead of loading files.
    #[arg(long)]
    gen_n: Option<usize>,
    /// Zipf cost skew for generated negative keys.
    #[arg(long, default_value_t = 1.0)]
    gen_zipf: f64,
    /// Number of generated negative keys (defaults to --gen-n).
    #[arg(long, requires = "gen_n")]
    gen_neg: Option<usize>,
}

impl DataArgs {
    /// Loads or generates the dataset. `round` re-shuffles generated costs;
    /// file-loaded datasets are identical across rounds.
    fn load(&self, seed: u64, round: u64) -> Result<Dataset> {
        match (&self.positives, &self.negatives, self.gen_n) {
            (Some(p), Some(n), None) => workload::load_dataset(p, n),
            (None, None, Some(n)) => {
                workload::make_dataset(n, self.gen_neg.unwrap_or(n), self.gen_zipf, seed, round)
            }
            _ => Err(HabfError::Config(
                "provide either --positives with --negatives, or --gen-n".into(),
            )),
        }
    }
}

/// Filter geometry flags shared by every building subcommand.
#[derive(Args, Clone)]
struct FilterArgs {
    /// Total filter bits per positive key.
    #[arg(long, default_value_t = 10.0)]
    bits_per_key: f64,
    /// Hash chain length.
    #[arg(long, default_value_t = 3)]
    k: u16,
    /// Fraction of the bit budget spent on chain cells.
    #[arg(long, default_value_t = 0.25)]
    delta: f64,
    /// Bits per chain cell.
    #[arg(long, default_value_t = 4)]
    cell_width: u8,
    /// Build the fast variant (single digest per key, bit clearing only).
    #[arg(long)]
    fast: bool,
}

impl FilterArgs {
    fn config(&self, n_pos: usize, seed: u64) -> Result<HabfConfig> {
        if !self.bits_per_key.is_finite() || self.bits_per_key <= 0.0 {
            return Err(HabfError::Config(format!(
                "bits per key must be positive and finite, got {}",
                self.bits_per_key
            )));
        }
        let mut cfg = HabfConfig::new((self.bits_per_key * n_pos as f64).round() as u64);
        cfg.k = self.k;
        cfg.delta = self.delta;
        cfg.cell_width = self.cell_width;
        cfg.fast_mode = self.fast;
        cfg.family_seed = seed;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct BuildArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    filter: FilterArgs,
    /// Seed for key generation and the hash family.
    #[arg(long, env = "HABF_SEED", default_value_t = 0)]
    seed: u64,
    /// Output path for the filter file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct QueryArgs {
    /// Filter file produced by `build`.
    #[arg(long)]
    filter: PathBuf,
    /// Query this single key instead of reading standard input.
    #[arg(long)]
    key: Option<String>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Algo {
    Habf,
    #[value(name = "f-habf")]
    FHabf,
    Bloom,
}

impl Algo {
    fn label(self) -> &'static str {
        match self {
            Algo::Habf => "habf",
            Algo::FHabf => "f-habf",
            Algo::Bloom => "bloom",
        }
    }
}

impl std::fmt::Display for Algo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Copy, Clone, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    filter: FilterArgs,
    #[arg(long, env = "HABF_SEED", default_value_t = 0)]
    seed: u64,
    /// Which filters to run.
    #[arg(long, value_delimiter = ',', default_values_t = [Algo::Habf, Algo::FHabf, Algo::Bloom])]
    algorithms: Vec<Algo>,
    /// Shuffle rounds: each re-shuffles generated costs and reseeds the
    /// hash family.
    #[arg(long, default_value_t = 10)]
    repeat: u64,
    #[arg(long, value_enum, default_value_t = OutFormat::Csv)]
    format: OutFormat,
}

#[derive(Copy, Clone, ValueEnum)]
enum SweepKind {
    Delta,
    K,
    Cellwidth,
    Skew,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    filter: FilterArgs,
    #[arg(long, env = "HABF_SEED", default_value_t = 0)]
    seed: u64,
    /// Which parameter the grid walks.
    #[arg(long, value_enum)]
    sweep: SweepKind,
    /// Grid values (comma-separated); a standard grid when omitted.
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = OutFormat::Csv)]
    format: OutFormat,
}

#[derive(Copy, Clone, ValueEnum)]
enum Scale {
    /// 20 000 positive and 20 000 negative keys per sweep point.
    Desk,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = Scale::Desk)]
    scale: Scale,
    #[arg(long, env = "HABF_SEED", default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = OutFormat::Csv)]
    format: OutFormat,
}

/// One benchmark or sweep measurement.
#[derive(serde::Serialize)]
struct BenchRow {
    algorithm: String,
    total_bits: u64,
    bits_per_key: f64,
    k: u16,
    delta: f64,
    cell_width: u8,
    skew: f64,
    seed: u64,
    /// Cost-weighted false-positive rate on the construction negatives.
    weighted_fpr: f64,
    /// Plain false-positive rate on fresh held-out negatives.
    fpr: f64,
    construct_ns_per_key: f64,
    query_ns_per_key: f64,
    peak_build_bytes: u64,
    t_optimized: u64,
    #[serde(rename = "T_initial")]
    t_initial: u64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(match err {
                HabfError::Config(_) | HabfError::Input(_) => 1,
                HabfError::Io(_) | HabfError::Parse { .. } | HabfError::Format { .. } => 2,
                HabfError::Conflict(_) => 3,
            })
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.cmd {
        Cmd::Build(a) => cmd_build(a),
        Cmd::Query(a) => cmd_query(a),
        Cmd::Bench(a) => cmd_bench(a),
        Cmd::Sweep(a) => cmd_sweep(a),
        Cmd::VerifyBounds(a) => cmd_verify_bounds(a),
    }
}

fn cmd_build(a: BuildArgs) -> Result<ExitCode> {
    let ds = a.data.load(a.seed, 0)?;
    let cfg = a.filter.config(ds.positives.len(), a.seed)?;
    let t = Instant::now();
    let f = Habf::build(&ds.positives, &ds.negatives, &cfg)?;
    let build_secs = t.elapsed().as_secs_f64();
    let bytes = f.serialize();
    fs::write(&a.out, &bytes)?;
    let s = f.stats();
    let summary = serde_json::json!({
        "out": a.out.display().to_string(),
        "file_bytes": bytes.len(),
        "positives": ds.positives.len(),
        "negatives": ds.negatives.len(),
        "total_bits": cfg.total_bits,
        "m": f.m(),
        "omega": f.omega(),
        "k": f.k(),
        "delta": cfg.delta,
        "fast": cfg.fast_mode,
        "initial_collisions": s.initial_collisions,
        "optimized": s.optimized,
        "failed": s.failed,
        "bits_set_final": s.bits_set_final,
        "build_seconds": build_secs,
    });
    println!("{summary}");
    Ok(ExitCode::SUCCESS)
}

fn cmd_query(a: QueryArgs) -> Result<ExitCode> {
    let f = Habf::deserialize(&fs::read(&a.filter)?)?;
    let stdout = io::stdout();
    let mut out = io::BufWriter::new(stdout.lock());
    let mut emit = |key: &[u8]| -> Result<()> {
        out.write_all(key)?;
        out.write_all(if f.query(key) { b"\t1\n" } else { b"\t0\n" })?;
        Ok(())
    };
    if let Some(key) = &a.key {
        emit(key.as_bytes())?;
    } else {
        let mut buf = Vec::new();
        io::stdin().lock().read_to_end(&mut buf)?;
        for mut line in buf.split(|&b| b == b'\n') {
            if let [rest @ .., b'\r'] = line {
                line = rest;
            }
            if line.is_empty() {
                continue;
            }
            emit(line)?;
        }
    }
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

/// Median build/query timing over three warm repetitions, in seconds.
fn median3(mut run: impl FnMut() -> f64) -> f64 {
    let mut t = [run(), run(), run()];
    t.sort_by(f64::total_cmp);
    t[1]
}

/// Fresh negative keys sharing no key with the dataset, for the held-out
/// false-positive column.
fn fresh_probes(ds: &Dataset, n: usize, seed: u64) -> Result<Vec<Vec<u8>>> {
    let taken: HashSet<&[u8]> = ds
        .positives
        .iter()
        .map(|k| k.as_slice())
        .chain(ds.negatives.iter().map(|(k, _)| k.as_slice()))
        .collect();
    let mut out: Vec<Vec<u8>> = Vec::with_capacity(n);
    let mut salt = 0u64;
    while out.len() < n {
        let want = n - out.len() + 64;
        for key in workload::gen_keys(want, seed ^ 0xB10C_ED0F ^ salt.wrapping_mul(0x9E37))? {
            if out.len() < n && !taken.contains(key.as_slice()) {
                out.push(key);
            }
        }
        salt += 1;
        if salt > 64 {
            return Err(HabfError::Input(
                "could not draw fresh probe keys disjoint from the dataset".into(),
            ));
        }
    }
    // Drawn batches can repeat across salts; keys within one batch are
    // already distinct and a fresh-probe duplicate only reweights a probe.
    Ok(out)
}

fn weighted_rate(query: impl Fn(&[u8]) -> bool, negatives: &[(Vec<u8>, f64)]) -> Result<f64> {
    Ok(habf::analysis::measured_rates(query, negatives)?.1)
}

fn plain_rate(query: impl Fn(&[u8]) -> bool, probes: &[Vec<u8>]) -> f64 {
    if probes.is_empty() {
        return 0.0;
    }
    probes.iter().filter(|k| query(k)).count() as f64 / probes.len() as f64
}

/// Builds and measures one benchmark row.
fn run_point(
    algo: Algo,
    ds: &Dataset,
    probes: &[Vec<u8>],
    base: &FilterArgs,
    skew: f64,
    seed: u64,
    family_seed: u64,
) -> Result<BenchRow> {
    let n = ds.positives.len();
    let mut cfg = base.config(n, family_seed)?;
    cfg.fast_mode = algo == Algo::FHabf;
    let mut row = BenchRow {
        algorithm: algo.label().to_string(),
        total_bits: cfg.total_bits,
        bits_per_key: base.bits_per_key,
        k: cfg.k,
        delta: cfg.delta,
        cell_width: cfg.cell_width,
        skew,
        seed,
        weighted_fpr: 0.0,
        fpr: 0.0,
        construct_ns_per_key: 0.0,
        query_ns_per_key: 0.0,
        peak_build_bytes: 0,
        t_optimized: 0,
        t_initial: 0,
    };
    let probe_all = |q: &dyn Fn(&[u8]) -> bool| {
        for key in ds.positives.iter().chain(ds.negatives.iter().map(|(k, _)| k)) {
            std::hint::black_box(q(key));
        }
    };
    let n_queries = (n + ds.negatives.len()) as f64;
    match algo {
        Algo::Habf | Algo::FHabf => {
            let f = Habf::build(&ds.positives, &ds.negatives, &cfg)?;
            let secs = median3(|| {
                let t = Instant::now();
                std::hint::black_box(Habf::build(&ds.positives, &ds.negatives, &cfg).unwrap());
                t.elapsed().as_secs_f64()
            });
            let q_secs = median3(|| {
                let t = Instant::now();
                probe_all(&|key| f.query(key));
                t.elapsed().as_secs_f64()
            });
            let s = f.stats();
            row.weighted_fpr = weighted_rate(|key| f.query(key), &ds.negatives)?;
            row.fpr = plain_rate(|key| f.query(key), probes);
            row.construct_ns_per_key = secs * 1e9 / n as f64;
            row.query_ns_per_key = q_secs * 1e9 / n_queries;
            row.peak_build_bytes = s.aux_bytes_peak
                + f.m().div_ceil(8)
                + (f.omega() * u64::from(cfg.cell_width)).div_ceil(8);
            row.t_optimized = s.optimized;
            row.t_initial = s.initial_collisions;
        }
        Algo::Bloom => {
            // The classic tuned baseline at the same total bits: the whole
            // budget in the array, chain length at its error-rate optimum.
            let k_opt = optimal_k(base.bits_per_key).clamp(1, 16) as u16;
            let h0: Vec<HashId> = (1..=k_opt).collect();
            let family = HashFamily::new(family_seed, cfg.family_size + 1, FamilyMode::Seeded)?;
            let build = || -> Result<BloomFilter> {
                let mut b = BloomFilter::new(cfg.total_bits, h0.clone(), family.clone())?;
                for key in &ds.positives {
                    b.insert(key);
                }
                Ok(b)
            };
            let f = build()?;
            let secs = median3(|| {
                let t = Instant::now();
                std::hint::black_box(build().unwrap());
                t.elapsed().as_secs_f64()
            });
            let q_secs = median3(|| {
                let t = Instant::now();
                probe_all(&|key| f.contains(key));
                t.elapsed().as_secs_f64()
            });
            let initial = ds
                .negatives
                .iter()
                .filter(|(key, _)| f.contains(key))
                .count() as u64;
            row.algorithm = "bloom".into();
            row.k = k_opt;
            row.delta = 0.0;
            row.weighted_fpr = weighted_rate(|key| f.contains(key), &ds.negatives)?;
            row.fpr = plain_rate(|key| f.contains(key), probes);
            row.construct_ns_per_key = secs * 1e9 / n as f64;
            row.query_ns_per_key = q_secs * 1e9 / n_queries;
            row.peak_build_bytes = f.m().div_ceil(8);
            row.t_initial = initial;
        }
    }
    Ok(row)
}

fn emit_rows(rows: &[BenchRow], format: OutFormat) -> Result<()> {
    match format {
        OutFormat::Csv => {
            let mut w = csv::Writer::from_writer(io::stdout().lock());
            for row in rows {
                w.serialize(row).map_err(csv_to_habf)?;
            }
            w.flush()?;
        }
        OutFormat::Json => {
            let stdout = io::stdout();
            let mut out = io::BufWriter::new(stdout.lock());
            for row in rows {
                serde_json::to_writer(&mut out, row)
                    .map_err(|e| HabfError::Input(format!("JSON encoding failed: {e}")))?;
                out.write_all(b"\n")?;
            }
            out.flush()?;
        }
    }
    Ok(())
}

fn csv_to_habf(e: csv::Error) -> HabfError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => HabfError::Io(io),
        other => HabfError::Input(format!("CSV encoding failed: {other:?}")),
    }
}

/// Mean and sample standard deviation rows per algorithm, in first-seen
/// algorithm order.
fn summarize(rows: &[BenchRow]) -> Vec<BenchRow> {
    let mut order: Vec<&str> = Vec::new();
    for r in rows {
        if !order.contains(&r.algorithm.as_str()) {
            order.push(&r.algorithm);
        }
    }
    let mut out = Vec::new();
    for name in order {
        let group: Vec<&BenchRow> = rows.iter().filter(|r| r.algorithm == name).collect();
        let nf = group.len() as f64;
        let mean = |f: &dyn Fn(&BenchRow) -> f64| group.iter().map(|r| f(r)).sum::<f64>() / nf;
        let std = |f: &dyn Fn(&BenchRow) -> f64| {
            if group.len() < 2 {
                return 0.0;
            }
            let m = mean(f);
            (group.iter().map(|r| (f(r) - m).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt()
        };
        let template = group[0];
        for (suffix, stat) in [("mean", &mean as &dyn Fn(&dyn Fn(&BenchRow) -> f64) -> f64), ("stddev", &std)] {
            out.push(BenchRow {
                algorithm: format!("{name}/{suffix}"),
                total_bits: template.total_bits,
                bits_per_key: template.bits_per_key,
                k: template.k,
                delta: template.delta,
                cell_width: template.cell_width,
                skew: template.skew,
                seed: template.seed,
                weighted_fpr: stat(&|r: &BenchRow| r.weighted_fpr),
                fpr: stat(&|r: &BenchRow| r.fpr),
                construct_ns_per_key: stat(&|r: &BenchRow| r.construct_ns_per_key),
                query_ns_per_key: stat(&|r: &BenchRow| r.query_ns_per_key),
                peak_build_bytes: stat(&|r: &BenchRow| r.peak_build_bytes as f64) as u64,
                t_optimized: stat(&|r: &BenchRow| r.t_optimized as f64) as u64,
                t_initial: stat(&|r: &BenchRow| r.t_initial as f64) as u64,
            });
        }
    }
    out
}

fn cmd_bench(a: BenchArgs) -> Result<ExitCode> {
    if a.repeat == 0 {
        return Err(HabfError::Config("--repeat must be at least 1".into()));
    }
    if a.algorithms.is_empty() {
        return Err(HabfError::Config("--algorithms must name at least one filter".into()));
    }
    let mut rows = Vec::new();
    for round in 0..a.repeat {
        let ds = a.data.load(a.seed, round)?;
        let probes = fresh_probes(&ds, ds.negatives.len().clamp(1, 100_000), a.seed)?;
        for &algo in &a.algorithms {
            rows.push(run_point(
                algo,
                &ds,
                &probes,
                &a.filter,
                a.data.gen_zipf,
                a.seed,
                a.seed.wrapping_add(round),
            )?);
        }
    }
    let summaries = summarize(&rows);
    rows.extend(summaries);
    emit_rows(&rows, a.format)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(a: SweepArgs) -> Result<ExitCode> {
    let values: Vec<f64> = match (&a.values, a.sweep) {
        (Some(v), _) if !v.is_empty() => v.clone(),
        (_, SweepKind::Delta) => vec![0.0, 0.1, 0.25, 0.5, 0.75, 0.9],
        (_, SweepKind::K) => (2..=8).map(f64::from).collect(),
        (_, SweepKind::Cellwidth) => vec![2.0, 3.0, 4.0, 5.0, 6.0, 8.0],
        (_, SweepKind::Skew) => vec![0.0, 0.5, 1.0, 1.5, 2.0, 3.0],
    };
    let mut rows = Vec::new();
    for &v in &values {
        let mut point = SweepPoint {
            filter: a.filter.clone(),
            data: a.data.clone(),
            skew: a.data.gen_zipf,
        };
        point.apply(a.sweep, v)?;
        let ds = point.data.load(a.seed, 0)?;
        let probes = fresh_probes(&ds, ds.negatives.len().clamp(1, 100_000), a.seed)?;
        let algo = if point.filter.fast { Algo::FHabf } else { Algo::Habf };
        rows.push(run_point(algo, &ds, &probes, &point.filter, point.skew, a.seed, a.seed)?);
    }
    emit_rows(&rows, a.format)?;
    Ok(ExitCode::SUCCESS)
}

/// A sweep grid point: the base flags with one parameter overridden.
struct SweepPoint {
    filter: FilterArgs,
    data: DataArgs,
    skew: f64,
}

impl SweepPoint {
    fn apply(&mut self, kind: SweepKind, v: f64) -> Result<()> {
        let as_int = |name: &str, lo: f64, hi: f64| -> Result<u64> {
            if v.fract() != 0.0 || v < lo || v > hi {
                return Err(HabfError::Config(format!(
                    "{name} sweep value {v} must be an integer in [{lo}, {hi}]"
                )));
            }
            Ok(v as u64)
        };
        match kind {
            SweepKind::Delta => self.filter.delta = v,
            SweepKind::K => self.filter.k = as_int("k", 1.0, 16.0)? as u16,
            SweepKind::Cellwidth => self.filter.cell_width = as_int("cell width", 2.0, 8.0)? as u8,
            SweepKind::Skew => {
                if self.data.gen_n.is_none() {
                    return Err(HabfError::Config(
                        "a skew sweep regenerates costs, so it needs --gen-n datasets".into(),
                    ));
                }
                self.data.gen_zipf = v;
                self.skew = v;
            }
        }
        Ok(())
    }
}

fn cmd_verify_bounds(a: VerifyArgs) -> Result<ExitCode> {
    let Scale::Desk = a.scale;
    let rows = verify_bounds(&VerifyScale {
        n_keys: 20_000,
        n_negatives: 20_000,
        seed: a.seed,
    })?;
    match a.format {
        OutFormat::Csv => {
            let mut w = csv::Writer::from_writer(io::stdout().lock());
            for row in &rows {
                w.serialize(row).map_err(csv_to_habf)?;
            }
            w.flush()?;
        }
        OutFormat::Json => {
            let stdout = io::stdout();
            let mut out = io::BufWriter::new(stdout.lock());
            for row in &rows {
                serde_json::to_writer(&mut out, row)
                    .map_err(|e| HabfError::Input(format!("JSON encoding failed: {e}")))?;
                out.write_all(b"\n")?;
            }
            out.flush()?;
        }
    }
    let failing: Vec<&habf::analysis::BoundCheckRow> = rows.iter().filter(|r| !r.pass).collect();
    if failing.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        for r in failing {
            eprintln!(
                "bound violated at {} sweep point k={} bits-per-key={}: measured {} >= bound {}",
                r.sweep, r.k, r.bits_per_key, r.residual_fpr, r.residual_fpr_bound
            );
        }
        Ok(ExitCode::from(4))
    }
}

//! End-to-end tests of the `habf` binary: every subcommand, the documented
//! exit codes, and agreement between CLI-built filter files and filters
//! built directly through the library.

use std::collections::HashSet;
use std::io::Write as _;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use habf::workload::{gen_keys, make_dataset, save_dataset};
use habf::{optimal_k, theoretical_fpr, Habf, HabfConfig};

fn habf_bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_habf"));
    // Keep tests hermetic against the seed-defaulting environment variable.
    cmd.env_remove("HABF_SEED");
    cmd
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary should run");
    assert!(
        out.status.success(),
        "command failed with {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stdout_lines(out: &Output) -> Vec<String> {
    String::from_utf8(out.stdout.clone())
        .expect("stdout should be UTF-8")
        .lines()
        .map(str::to_string)
        .collect()
}

fn build_filter(dir: &Path, name: &str, extra: &[&str]) -> (std::path::PathBuf, serde_json::Value) {
    let out_path = dir.join(name);
    let out = run_ok(
        habf_bin()
            .args(["build", "--gen-n", "4000", "--seed", "9", "--out"])
            .arg(&out_path)
            .args(extra),
    );
    let lines = stdout_lines(&out);
    assert_eq!(lines.len(), 1, "build should print exactly one summary line");
    let summary: serde_json::Value = serde_json::from_str(&lines[0]).expect("summary is JSON");
    (out_path, summary)
}

#[test]
fn build_emits_summary_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (path_a, summary) = build_filter(dir.path(), "a.habf", &[]);
    let (path_b, _) = build_filter(dir.path(), "b.habf", &[]);

    let bytes_a = std::fs::read(&path_a).unwrap();
    let bytes_b = std::fs::read(&path_b).unwrap();
    assert_eq!(bytes_a, bytes_b, "same flags must give byte-identical files");

    assert_eq!(summary["positives"], 4000);
    assert_eq!(summary["negatives"], 4000);
    assert_eq!(summary["total_bits"], 40_000);
    assert_eq!(summary["k"], 3);
    assert_eq!(summary["delta"], 0.25);
    assert_eq!(summary["fast"], false);
    assert_eq!(summary["file_bytes"], bytes_a.len());
    assert!(summary["initial_collisions"].as_u64().unwrap() > 0);
    assert!(summary["optimized"].as_u64().unwrap() > 0);
    assert!(summary["build_seconds"].as_f64().unwrap() > 0.0);

    // The two halves together use up the bit budget: whatever the cell
    // rounding leaves over goes to the bit array.
    let m = summary["m"].as_u64().unwrap();
    let omega = summary["omega"].as_u64().unwrap();
    assert_eq!(m + omega * 4, 40_000);
}

#[test]
fn cli_build_matches_library_build_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    for fast in [false, true] {
        let flags: &[&str] = if fast { &["--fast"] } else { &[] };
        let name = if fast { "fast.habf" } else { "full.habf" };
        let (path, _) = build_filter(dir.path(), name, flags);
        let cli_bytes = std::fs::read(&path).unwrap();

        let ds = make_dataset(4000, 4000, 1.0, 9, 0).unwrap();
        let mut cfg = HabfConfig::new(40_000);
        cfg.family_seed = 9;
        cfg.fast_mode = fast;
        let filter = Habf::build(&ds.positives, &ds.negatives, &cfg).unwrap();
        assert_eq!(
            cli_bytes,
            filter.serialize(),
            "fast={fast}: the CLI must reproduce the library build exactly"
        );
    }
}

#[test]
fn query_agrees_with_in_process_filter() {
    let dir = tempfile::tempdir().unwrap();
    let (path, _) = build_filter(dir.path(), "q.habf", &[]);
    let filter = Habf::deserialize(&std::fs::read(&path).unwrap()).unwrap();

    let ds = make_dataset(4000, 4000, 1.0, 9, 0).unwrap();
    let probes: Vec<Vec<u8>> = ds
        .positives
        .iter()
        .cloned()
        .chain(gen_keys(10_000, 777).unwrap())
        .collect();
    let mut stdin_payload = Vec::new();
    for key in &probes {
        stdin_payload.extend_from_slice(key);
        stdin_payload.push(b'\n');
    }

    let mut child = habf_bin()
        .args(["query", "--filter"])
        .arg(&path)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.as_mut().unwrap().write_all(&stdin_payload).unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());

    let mut expected = Vec::new();
    for key in &probes {
        expected.extend_from_slice(key);
        expected.extend_from_slice(if filter.query(key) { b"\t1\n" } else { b"\t0\n" });
    }
    assert_eq!(out.stdout, expected, "stdin query output must mirror library answers");

    // Every positive key answers 1: the zero-false-negative contract holds
    // through the file round trip. Combined with the byte comparison above
    // this means the CLI printed `\t1` for each of them.
    for key in &ds.positives {
        assert!(filter.query(key), "positive lost through the file round trip");
    }
}

#[test]
fn query_single_key_flag_and_empty_stdin() {
    let dir = tempfile::tempdir().unwrap();
    let (path, _) = build_filter(dir.path(), "k.habf", &[]);

    let out = run_ok(habf_bin().args(["query", "--filter"]).arg(&path).args(["--key", "zebra"]));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text == "zebra\t0\n" || text == "zebra\t1\n");

    let mut child = habf_bin()
        .args(["query", "--filter"])
        .arg(&path)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    drop(child.stdin.take());
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    assert!(out.stdout.is_empty(), "empty stdin should produce empty output");
}

#[test]
fn build_accepts_dataset_files() {
    let dir = tempfile::tempdir().unwrap();
    let ds = make_dataset(2000, 2000, 0.5, 31, 0).unwrap();
    let pos_path = dir.path().join("keys.txt");
    let neg_path = dir.path().join("negatives.csv");
    save_dataset(&ds, &pos_path, &neg_path).unwrap();

    let out_path = dir.path().join("fromfiles.habf");
    let out = run_ok(
        habf_bin()
            .args(["build", "--positives"])
            .arg(&pos_path)
            .arg("--negatives")
            .arg(&neg_path)
            .args(["--seed", "31", "--out"])
            .arg(&out_path),
    );
    let summary: serde_json::Value = serde_json::from_str(&stdout_lines(&out)[0]).unwrap();
    assert_eq!(summary["positives"], 2000);

    // The loaded dataset matches what the library sees, so the filter file
    // must answer every saved positive with 1.
    let filter = Habf::deserialize(&std::fs::read(&out_path).unwrap()).unwrap();
    assert!(ds.positives.iter().all(|key| filter.query(key)));
}

#[test]
fn bench_emits_data_and_summary_rows() {
    let out = run_ok(habf_bin().args([
        "bench", "--gen-n", "3000", "--repeat", "2", "--seed", "5", "--format", "csv",
    ]));
    let lines = stdout_lines(&out);
    assert_eq!(
        lines[0],
        "algorithm,total_bits,bits_per_key,k,delta,cell_width,skew,seed,weighted_fpr,fpr,\
         construct_ns_per_key,query_ns_per_key,peak_build_bytes,t_optimized,T_initial"
            .replace(' ', "")
    );
    // 3 algorithms x 2 rounds of data, then mean and stddev per algorithm.
    assert_eq!(lines.len(), 1 + 6 + 6);
    let algo_col: Vec<&str> = lines[1..]
        .iter()
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(
        algo_col,
        [
            "habf", "f-habf", "bloom", "habf", "f-habf", "bloom", "habf/mean", "habf/stddev",
            "f-habf/mean", "f-habf/stddev", "bloom/mean", "bloom/stddev"
        ]
    );

    // The tuned classic baseline must calibrate: measured rate on fresh
    // probes within three binomial standard errors of the closed form.
    let k_opt = optimal_k(10.0);
    let expected = theoretical_fpr(k_opt, 10.0);
    let sigma = (expected * (1.0 - expected) / 3000.0).sqrt();
    for line in lines[1..].iter().filter(|l| l.starts_with("bloom,")) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[3], k_opt.to_string(), "bloom rows use the tuned chain length");
        let fpr: f64 = cols[9].parse().unwrap();
        assert!(
            (fpr - expected).abs() <= 3.0 * sigma,
            "bloom fpr {fpr} should be near {expected} (sigma {sigma})"
        );
    }
}

#[test]
fn bench_json_format_and_algorithm_subset() {
    let out = run_ok(habf_bin().args([
        "bench", "--gen-n", "1500", "--repeat", "1", "--seed", "4", "--algorithms", "habf,bloom",
        "--format", "json",
    ]));
    let lines = stdout_lines(&out);
    assert_eq!(lines.len(), 2 + 4, "2 data rows and mean+stddev for each of 2 algorithms");
    let mut algos = Vec::new();
    for line in &lines {
        let row: serde_json::Value = serde_json::from_str(line).expect("each line is one JSON row");
        assert!(row.get("T_initial").is_some(), "initial-collision column keeps its name");
        assert!(row.get("weighted_fpr").unwrap().as_f64().is_some());
        algos.push(row["algorithm"].as_str().unwrap().to_string());
    }
    assert_eq!(
        algos,
        ["habf", "bloom", "habf/mean", "habf/stddev", "bloom/mean", "bloom/stddev"]
    );
}

#[test]
fn sweep_delta_covers_grid_including_zero() {
    let out = run_ok(habf_bin().args([
        "sweep", "--gen-n", "1500", "--sweep", "delta", "--seed", "6", "--format", "csv",
    ]));
    let lines = stdout_lines(&out);
    assert_eq!(lines.len(), 1 + 6, "header plus the six default grid points");
    let deltas: Vec<f64> = lines[1..]
        .iter()
        .map(|l| l.split(',').nth(4).unwrap().parse().unwrap())
        .collect();
    assert_eq!(deltas, [0.0, 0.1, 0.25, 0.5, 0.75, 0.9]);
    // The degenerate point spends nothing on cells, so nothing is optimized.
    let first: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(first[13], "0", "delta 0 optimizes no keys");
}

#[test]
fn sweep_custom_values_and_k_grid() {
    let out = run_ok(habf_bin().args([
        "sweep", "--gen-n", "1200", "--sweep", "k", "--values", "2,4", "--seed", "8",
    ]));
    let lines = stdout_lines(&out);
    assert_eq!(lines.len(), 1 + 2);
    let ks: Vec<&str> = lines[1..].iter().map(|l| l.split(',').nth(3).unwrap()).collect();
    assert_eq!(ks, ["2", "4"]);
}

#[test]
fn sweep_skew_requires_generated_datasets() {
    let dir = tempfile::tempdir().unwrap();
    let ds = make_dataset(500, 500, 1.0, 3, 0).unwrap();
    let pos_path = dir.path().join("p.txt");
    let neg_path = dir.path().join("n.csv");
    save_dataset(&ds, &pos_path, &neg_path).unwrap();

    let out = habf_bin()
        .args(["sweep", "--sweep", "skew", "--positives"])
        .arg(&pos_path)
        .arg("--negatives")
        .arg(&neg_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "skew sweep over files is a configuration error");
    assert!(String::from_utf8_lossy(&out.stderr).contains("gen-n"));
}

#[test]
fn verify_bounds_passes_at_desk_scale() {
    let out = run_ok(habf_bin().args(["verify-bounds", "--scale", "desk", "--seed", "1"]));
    let lines = stdout_lines(&out);
    assert_eq!(lines.len(), 1 + 19, "header plus the nineteen sweep points");
    assert!(lines[0].starts_with("sweep,k,bits_per_key"));
    for line in &lines[1..] {
        assert!(line.ends_with(",true"), "all points pass at desk scale: {line}");
    }
}

#[test]
fn exit_codes_match_documentation() {
    // Unknown flag: argument parsing fails with the configuration code.
    let out = habf_bin().args(["build", "--no-such-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    // Missing data source: configuration error.
    let dir = tempfile::tempdir().unwrap();
    let out = habf_bin()
        .args(["build", "--out"])
        .arg(dir.path().join("x.habf"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--gen-n"));

    // Unreadable filter file: I/O error.
    let out = habf_bin()
        .args(["query", "--filter", "/nonexistent/filter.habf", "--key", "a"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // A corrupted filter file is a format error, also I/O-class.
    let (path, _) = build_filter(dir.path(), "c.habf", &[]);
    let mut bytes = std::fs::read(&path).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x20;
    std::fs::write(&path, &bytes).unwrap();
    let out = habf_bin()
        .args(["query", "--filter"])
        .arg(&path)
        .args(["--key", "a"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // Help and version print and succeed.
    assert!(habf_bin().arg("--help").output().unwrap().status.success());
    assert!(habf_bin().arg("--version").output().unwrap().status.success());
}

#[test]
fn seed_env_var_matches_flag() {
    let dir = tempfile::tempdir().unwrap();
    let env_path = dir.path().join("env.habf");
    let flag_path = dir.path().join("flag.habf");
    run_ok(
        habf_bin()
            .env("HABF_SEED", "41")
            .args(["build", "--gen-n", "800", "--out"])
            .arg(&env_path),
    );
    run_ok(
        habf_bin()
            .args(["build", "--gen-n", "800", "--seed", "41", "--out"])
            .arg(&flag_path),
    );
    assert_eq!(
        std::fs::read(&env_path).unwrap(),
        std::fs::read(&flag_path).unwrap(),
        "the environment seed and the flag seed must build the same file"
    );
}

#[test]
fn generated_probe_sets_are_disjoint_from_dataset() {
    // The held-out probe column in bench only means something if probes
    // never collide with construction keys; spot-check the generator paths
    // the CLI combines.
    let ds = make_dataset(3000, 3000, 1.0, 5, 0).unwrap();
    let taken: HashSet<&[u8]> = ds
        .positives
        .iter()
        .map(|k| k.as_slice())
        .chain(ds.negatives.iter().map(|(k, _)| k.as_slice()))
        .collect();
    let fresh = gen_keys(3000, 5 ^ 0xB10C_ED0F).unwrap();
    let overlap = fresh.iter().filter(|k| taken.contains(k.as_slice())).count();
    assert_eq!(overlap, 0, "salted generator stream re-collided with the dataset");
}

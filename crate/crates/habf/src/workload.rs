//! Synthetic dataset generation — prefixed random keys and rank-law query
//! costs — plus loading and saving of key/cost files, always producing
//! disjoint positive/negative sets.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{HabfError, Result};
use crate::hashing::mix64;

/// Where a dataset came from; carried along so result rows can name their
/// inputs.
#[derive(Clone, Debug, PartialEq)]
pub enum Provenance {
    Generated { seed: u64, skew: f64, round: u64 },
    Loaded { positives: PathBuf, negatives: PathBuf },
}

/// A positive key set and a disjoint cost-weighted negative key set.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub positives: Vec<Vec<u8>>,
    pub negatives: Vec<(Vec<u8>, f64)>,
    pub provenance: Provenance,
}

impl Dataset {
    /// Validates the invariants every dataset carries: non-empty keys,
    /// finite non-negative costs, and no key on both sides.
    pub fn new(
        positives: Vec<Vec<u8>>,
        negatives: Vec<(Vec<u8>, f64)>,
        provenance: Provenance,
    ) -> Result<Self> {
        for (i, key) in positives.iter().enumerate() {
            if key.is_empty() {
                return Err(HabfError::Input(format!("positive key {i} is empty")));
            }
        }
        let set: HashSet<&[u8]> = positives.iter().map(|k| k.as_slice()).collect();
        for (i, (key, cost)) in negatives.iter().enumerate() {
            if key.is_empty() {
                return Err(HabfError::Input(format!("negative key {i} is empty")));
            }
            if !cost.is_finite() || *cost < 0.0 {
                return Err(HabfError::Input(format!(
                    "negative key {i} has invalid cost {cost}"
                )));
            }
            if set.contains(key.as_slice()) {
                return Err(HabfError::Input(format!(
                    "key {:?} appears in both sets",
                    String::from_utf8_lossy(key)
                )));
            }
        }
        Ok(Self {
            positives,
            negatives,
            provenance,
        })
    }
}

/// `n` distinct 12-byte keys: the ASCII prefix `YCSB` followed by the
/// big-endian bytes of a pseudorandom 64-bit integer. Integers whose bytes
/// would contain a line break (0x0A or 0x0D) are re-drawn so keys stay
/// representable in line-oriented dataset files. Deterministic in `seed`.
pub fn gen_keys(n: usize, seed: u64) -> Result<Vec<Vec<u8>>> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut seen: HashSet<u64> = HashSet::with_capacity(n);
    let mut keys = Vec::with_capacity(n);
    while keys.len() < n {
        let v = rng.next_u64();
        if v.to_be_bytes().iter().any(|&b| b == b'\n' || b == b'\r') {
            continue;
        }
        if !seen.insert(v) {
            continue;
        }
        let mut key = Vec::with_capacity(12);
        key.extend_from_slice(b"YCSB");
        key.extend_from_slice(&v.to_be_bytes());
        keys.push(key);
    }
    Ok(keys)
}

/// `n` distinct URL-path-like keys of exactly `len` bytes, drawn from the
/// unreserved-plus-slash URL characters, so the keys survive both dataset
/// file formats without quoting. Deterministic in `seed` and independent of
/// the [`gen_keys`] stream. Longer keys make per-evaluation hashing cost
/// visible, which is what the construction benchmarks need.
pub fn gen_string_keys(n: usize, len: usize, seed: u64) -> Result<Vec<Vec<u8>>> {
    const ALPHABET: &[u8] =
        b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789-._~/";
    if len == 0 {
        return Err(HabfError::Input("key length must be at least 1".into()));
    }
    // Keep the rejection loop cheap: stay at or below half the key space.
    let space = (ALPHABET.len() as u128).saturating_pow(len.min(24) as u32);
    if n as u128 > space / 2 {
        return Err(HabfError::Input(format!(
            "{n} distinct keys will not fit {len}-byte keys over {} characters",
            ALPHABET.len()
        )));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(mix64(seed ^ 0x7572_6c5f_6b65_7973));
    let mut seen: HashSet<Vec<u8>> = HashSet::with_capacity(n);
    let mut keys = Vec::with_capacity(n);
    while keys.len() < n {
        let key: Vec<u8> = (0..len)
            .map(|_| ALPHABET[(rng.next_u32() as usize) % ALPHABET.len()])
            .collect();
        if seen.insert(key.clone()) {
            keys.push(key);
        }
    }
    Ok(keys)
}

/// `n` query costs following the rank law `r^{-skew}` (unnormalized; the
/// weighted rate is scale-invariant), assigned to positions by a
/// permutation derived from `(seed, round)`. `skew = 0` makes every cost 1.
pub fn gen_zipf_costs(n: usize, skew: f64, seed: u64, round: u64) -> Result<Vec<f64>> {
    if !skew.is_finite() || skew < 0.0 {
        return Err(HabfError::Input(format!(
            "skew {skew} must be finite and non-negative"
        )));
    }
    let mut costs: Vec<f64> = (1..=n as u64).map(|r| (r as f64).powf(-skew)).collect();
    let mut rng = ChaCha12Rng::seed_from_u64(mix64(seed ^ mix64(round.wrapping_add(1))));
    costs.shuffle(&mut rng);
    Ok(costs)
}

/// A generated dataset: `n_pos + n_neg` distinct keys split into the two
/// sides, with rank-law costs on the negatives shuffled by `round`.
pub fn make_dataset(
    n_pos: usize,
    n_neg: usize,
    skew: f64,
    seed: u64,
    round: u64,
) -> Result<Dataset> {
    let keys = gen_keys(n_pos + n_neg, seed)?;
    let costs = gen_zipf_costs(n_neg, skew, seed, round)?;
    let positives = keys[..n_pos].to_vec();
    let negatives = keys[n_pos..]
        .iter()
        .cloned()
        .zip(costs)
        .collect();
    Dataset::new(positives, negatives, Provenance::Generated { seed, skew, round })
}

/// [`make_dataset`] over [`gen_string_keys`] instead of [`gen_keys`]: the
/// keys are `key_len`-byte URL-path-like strings.
pub fn make_string_dataset(
    n_pos: usize,
    n_neg: usize,
    key_len: usize,
    skew: f64,
    seed: u64,
    round: u64,
) -> Result<Dataset> {
    let keys = gen_string_keys(n_pos + n_neg, key_len, seed)?;
    let costs = gen_zipf_costs(n_neg, skew, seed, round)?;
    let positives = keys[..n_pos].to_vec();
    let negatives = keys[n_pos..]
        .iter()
        .cloned()
        .zip(costs)
        .collect();
    Dataset::new(positives, negatives, Provenance::Generated { seed, skew, round })
}

/// Loads a dataset from two files. The positives file holds one key per
/// line; the negatives file is CSV with a `key` column and an optional
/// `cost` column (absent column means cost 1). A lone trailing `\r` per
/// line is stripped so CRLF files load. Keys present in both files are an
/// error naming the key and both line numbers.
pub fn load_dataset(
    positives_path: impl AsRef<Path>,
    negatives_path: impl AsRef<Path>,
) -> Result<Dataset> {
    let positives_path = positives_path.as_ref();
    let negatives_path = negatives_path.as_ref();

    let raw = fs::read(positives_path)?;
    let mut positives = Vec::new();
    let mut pos_lines: HashMap<Vec<u8>, u64> = HashMap::new();
    for (i, mut line) in raw.split(|&b| b == b'\n').enumerate() {
        let lineno = i as u64 + 1;
        if let [rest @ .., b'\r'] = line {
            line = rest;
        }
        if line.is_empty() {
            // Accept a trailing newline at end of file; reject blank lines
            // inside, since an empty key is meaningless.
            if i == raw.split(|&b| b == b'\n').count() - 1 {
                continue;
            }
            return Err(HabfError::Parse {
                line: lineno,
                message: format!("empty key line in {}", positives_path.display()),
            });
        }
        pos_lines.entry(line.to_vec()).or_insert(lineno);
        positives.push(line.to_vec());
    }

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(negatives_path)
        .map_err(csv_error)?;
    let headers = reader.byte_headers().map_err(csv_error)?.clone();
    if headers.is_empty() || &headers[0] != b"key" {
        return Err(HabfError::Parse {
            line: 1,
            message: format!(
                "negatives file must start with a `key` column, found {:?}",
                String::from_utf8_lossy(headers.get(0).unwrap_or(b""))
            ),
        });
    }
    let has_cost = match headers.len() {
        1 => false,
        2 if &headers[1] == b"cost" => true,
        _ => {
            return Err(HabfError::Parse {
                line: 1,
                message: format!("unsupported negatives header with {} columns", headers.len()),
            })
        }
    };

    let mut negatives = Vec::new();
    let mut record = csv::ByteRecord::new();
    loop {
        match reader.read_byte_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(csv_error(e)),
        }
        let lineno = record.position().map_or(0, |p| p.line());
        let key = record.get(0).unwrap_or(b"");
        if key.is_empty() {
            return Err(HabfError::Parse {
                line: lineno,
                message: "empty key field".into(),
            });
        }
        let cost = if has_cost {
            let field = record.get(1).unwrap_or(b"");
            let text = std::str::from_utf8(field).map_err(|_| HabfError::Parse {
                line: lineno,
                message: "cost field is not UTF-8".into(),
            })?;
            let cost: f64 = text.trim().parse().map_err(|_| HabfError::Parse {
                line: lineno,
                message: format!("cost {text:?} is not a number"),
            })?;
            if !cost.is_finite() || cost < 0.0 {
                return Err(HabfError::Parse {
                    line: lineno,
                    message: format!("cost {cost} must be finite and non-negative"),
                });
            }
            cost
        } else {
            1.0
        };
        if let Some(&pos_line) = pos_lines.get(key) {
            return Err(HabfError::Input(format!(
                "key {:?} appears in both files: positives line {pos_line}, negatives line {lineno}",
                String::from_utf8_lossy(key)
            )));
        }
        negatives.push((key.to_vec(), cost));
    }

    Dataset::new(
        positives,
        negatives,
        Provenance::Loaded {
            positives: positives_path.to_path_buf(),
            negatives: negatives_path.to_path_buf(),
        },
    )
}

fn csv_error(e: csv::Error) -> HabfError {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => HabfError::Io(io),
        kind => HabfError::Parse {
            line,
            message: format!("{kind:?}"),
        },
    }
}

/// Writes a dataset in the format [`load_dataset`] reads. Keys containing
/// line breaks cannot be represented and are rejected. Costs are written
/// with the shortest decimal that parses back to the same value.
pub fn save_dataset(
    dataset: &Dataset,
    positives_path: impl AsRef<Path>,
    negatives_path: impl AsRef<Path>,
) -> Result<()> {
    let newline_free = |key: &[u8], side: &str, i: usize| -> Result<()> {
        if key.iter().any(|&b| b == b'\n' || b == b'\r') {
            return Err(HabfError::Input(format!(
                "{side} key {i} contains a line break and cannot be written"
            )));
        }
        Ok(())
    };
    for (i, key) in dataset.positives.iter().enumerate() {
        newline_free(key, "positive", i)?;
    }
    for (i, (key, _)) in dataset.negatives.iter().enumerate() {
        newline_free(key, "negative", i)?;
    }

    let mut pos_out = std::io::BufWriter::new(fs::File::create(positives_path)?);
    for key in &dataset.positives {
        pos_out.write_all(key)?;
        pos_out.write_all(b"\n")?;
    }
    pos_out.flush()?;

    let mut wtr = csv::WriterBuilder::new()
        .from_path(negatives_path)
        .map_err(csv_error)?;
    wtr.write_record([b"key".as_slice(), b"cost".as_slice()])
        .map_err(csv_error)?;
    for (key, cost) in &dataset.negatives {
        wtr.write_record([key.as_slice(), cost.to_string().as_bytes()])
            .map_err(csv_error)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_follow_the_schema_and_are_distinct() {
        let keys = gen_keys(100_000, 7).unwrap();
        assert_eq!(keys.len(), 100_000);
        let mut seen = HashSet::new();
        for key in &keys {
            assert_eq!(key.len(), 12);
            assert_eq!(&key[..4], b"YCSB");
            assert!(!key.iter().any(|&b| b == b'\n' || b == b'\r'));
            assert!(seen.insert(key.clone()), "duplicate key generated");
        }
        assert_eq!(gen_keys(1_000, 7).unwrap(), keys[..1_000].to_vec());
        assert_ne!(gen_keys(10, 8).unwrap(), gen_keys(10, 7).unwrap());
    }

    #[test]
    fn string_keys_are_printable_distinct_and_deterministic() {
        let keys = gen_string_keys(20_000, 48, 5).unwrap();
        assert_eq!(keys.len(), 20_000);
        let mut seen = HashSet::new();
        for key in &keys {
            assert_eq!(key.len(), 48);
            assert!(key.iter().all(|&b| {
                b.is_ascii_alphanumeric() || b"-._~/".contains(&b)
            }));
            assert!(seen.insert(key.clone()), "duplicate key generated");
        }
        assert_eq!(gen_string_keys(500, 48, 5).unwrap(), keys[..500].to_vec());
        assert_ne!(
            gen_string_keys(10, 48, 5).unwrap(),
            gen_string_keys(10, 48, 6).unwrap()
        );
        // Tiny alphabets cannot fill large requests; zero-length keys are out.
        assert!(gen_string_keys(64, 1, 1).is_err());
        assert!(gen_string_keys(1, 0, 1).is_err());
        assert_eq!(gen_string_keys(33, 1, 1).unwrap().len(), 33);
        // String datasets pass through the file formats losslessly.
        let ds = make_string_dataset(40, 40, 30, 1.0, 3, 0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (pp, np) = (dir.path().join("p.txt"), dir.path().join("n.csv"));
        save_dataset(&ds, &pp, &np).unwrap();
        let back = load_dataset(&pp, &np).unwrap();
        assert_eq!(back.positives, ds.positives);
        assert_eq!(back.negatives, ds.negatives);
    }

    #[test]
    fn zipf_costs_follow_the_rank_law() {
        let costs = gen_zipf_costs(4, 1.0, 3, 0).unwrap();
        let mut sorted = costs.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        assert_eq!(sorted, vec![1.0, 0.5, 1.0 / 3.0, 0.25]);

        assert!(gen_zipf_costs(100, 0.0, 1, 0).unwrap().iter().all(|&c| c == 1.0));
        // Pre-shuffle ranks are non-increasing for any skew.
        for skew in [0.5, 1.0, 2.5] {
            let mut c = gen_zipf_costs(50, skew, 9, 2).unwrap();
            c.sort_by(|a, b| b.total_cmp(a));
            let expect: Vec<f64> = (1..=50u64).map(|r| (r as f64).powf(-skew)).collect();
            assert_eq!(c, expect);
        }
        assert!(gen_zipf_costs(4, -0.5, 1, 0).is_err());
        assert!(gen_zipf_costs(4, f64::NAN, 1, 0).is_err());
    }

    #[test]
    fn shuffle_rounds_give_distinct_deterministic_permutations() {
        let r0 = gen_zipf_costs(100, 1.0, 5, 0).unwrap();
        let r1 = gen_zipf_costs(100, 1.0, 5, 1).unwrap();
        assert_eq!(r0, gen_zipf_costs(100, 1.0, 5, 0).unwrap());
        assert_ne!(r0, r1, "rounds must permute differently");
        let mut s0 = r0.clone();
        let mut s1 = r1.clone();
        s0.sort_by(f64::total_cmp);
        s1.sort_by(f64::total_cmp);
        assert_eq!(s0, s1, "rounds share the same multiset");
    }

    #[test]
    fn generated_datasets_are_disjoint_and_sized() {
        let ds = make_dataset(300, 500, 1.0, 11, 2).unwrap();
        assert_eq!(ds.positives.len(), 300);
        assert_eq!(ds.negatives.len(), 500);
        let pos: HashSet<_> = ds.positives.iter().collect();
        assert!(ds.negatives.iter().all(|(k, _)| !pos.contains(k)));
        assert_eq!(
            ds.provenance,
            Provenance::Generated { seed: 11, skew: 1.0, round: 2 }
        );
    }

    #[test]
    fn save_then_load_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pos.txt");
        let n = dir.path().join("neg.csv");
        let ds = make_dataset(50, 80, 1.3, 3, 0).unwrap();
        save_dataset(&ds, &p, &n).unwrap();
        let back = load_dataset(&p, &n).unwrap();
        assert_eq!(back.positives, ds.positives);
        assert_eq!(back.negatives, ds.negatives, "costs must round-trip bit-exactly");
        assert!(matches!(back.provenance, Provenance::Loaded { .. }));
    }

    #[test]
    fn three_line_fixture_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pos.txt");
        let n = dir.path().join("neg.csv");
        fs::write(&p, "alpha\nbravo\ncharlie\n").unwrap();
        fs::write(&n, "key,cost\ndelta,2.5\necho,0.125\nfoxtrot,1\n").unwrap();
        let ds = load_dataset(&p, &n).unwrap();
        assert_eq!(ds.positives, vec![b"alpha".to_vec(), b"bravo".to_vec(), b"charlie".to_vec()]);
        assert_eq!(
            ds.negatives,
            vec![
                (b"delta".to_vec(), 2.5),
                (b"echo".to_vec(), 0.125),
                (b"foxtrot".to_vec(), 1.0)
            ]
        );
        let p2 = dir.path().join("pos2.txt");
        let n2 = dir.path().join("neg2.csv");
        save_dataset(&ds, &p2, &n2).unwrap();
        assert_eq!(load_dataset(&p2, &n2).unwrap().positives, ds.positives);
    }

    #[test]
    fn crlf_and_missing_cost_column_are_accepted() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pos.txt");
        let n = dir.path().join("neg.csv");
        fs::write(&p, "one\r\ntwo\r\n").unwrap();
        fs::write(&n, "key\nthree\nfour\n").unwrap();
        let ds = load_dataset(&p, &n).unwrap();
        assert_eq!(ds.positives, vec![b"one".to_vec(), b"two".to_vec()]);
        assert_eq!(
            ds.negatives,
            vec![(b"three".to_vec(), 1.0), (b"four".to_vec(), 1.0)]
        );
        // Header-only negatives file: an empty negative set.
        fs::write(&n, "key,cost\n").unwrap();
        assert!(load_dataset(&p, &n).unwrap().negatives.is_empty());
    }

    #[test]
    fn malformed_inputs_fail_with_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pos.txt");
        let n = dir.path().join("neg.csv");
        fs::write(&n, "key,cost\nx,1\n").unwrap();

        fs::write(&p, "good\n\nalso-good\n").unwrap();
        match load_dataset(&p, &n) {
            Err(HabfError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected a parse error, got {other:?}"),
        }

        fs::write(&p, "good\n").unwrap();
        fs::write(&n, "key,cost\na,1.0\nb,not-a-number\n").unwrap();
        match load_dataset(&p, &n) {
            Err(HabfError::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("not-a-number"), "{message}");
            }
            other => panic!("expected a parse error, got {other:?}"),
        }

        fs::write(&n, "id,cost\na,1\n").unwrap();
        match load_dataset(&p, &n) {
            Err(HabfError::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected a header error, got {other:?}"),
        }

        fs::write(&n, "key,cost\na,-3\n").unwrap();
        assert!(load_dataset(&p, &n).is_err());

        fs::write(&n, "key,cost\n,1\n").unwrap();
        assert!(matches!(load_dataset(&p, &n), Err(HabfError::Parse { .. })));

        assert!(matches!(
            load_dataset(dir.path().join("missing"), &n),
            Err(HabfError::Io(_))
        ));
    }

    #[test]
    fn duplicate_across_files_names_key_and_lines() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pos.txt");
        let n = dir.path().join("neg.csv");
        fs::write(&p, "alpha\nbravo\n").unwrap();
        fs::write(&n, "key,cost\ncharlie,1\nbravo,2\n").unwrap();
        match load_dataset(&p, &n) {
            Err(HabfError::Input(msg)) => {
                assert!(msg.contains("bravo"), "{msg}");
                assert!(msg.contains("line 2") && msg.contains("line 3"), "{msg}");
            }
            other => panic!("expected a duplicate-key error, got {other:?}"),
        }
    }

    #[test]
    fn dataset_constructor_enforces_invariants() {
        let prov = Provenance::Generated { seed: 0, skew: 0.0, round: 0 };
        assert!(Dataset::new(vec![b"a".to_vec()], vec![(b"a".to_vec(), 1.0)], prov.clone()).is_err());
        assert!(Dataset::new(vec![vec![]], vec![], prov.clone()).is_err());
        assert!(Dataset::new(vec![b"a".to_vec()], vec![(vec![], 1.0)], prov.clone()).is_err());
        assert!(
            Dataset::new(vec![b"a".to_vec()], vec![(b"b".to_vec(), f64::NAN)], prov.clone())
                .is_err()
        );
        assert!(Dataset::new(vec![b"a".to_vec()], vec![(b"b".to_vec(), 2.0)], prov).is_ok());
    }

    #[test]
    fn unsaveable_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let ds = Dataset::new(
            vec![b"line\nbreak".to_vec()],
            vec![],
            Provenance::Generated { seed: 0, skew: 0.0, round: 0 },
        )
        .unwrap();
        assert!(matches!(
            save_dataset(&ds, dir.path().join("p"), dir.path().join("n")),
            Err(HabfError::Input(_))
        ));
    }
}

#!/usr/bin/env python3
"""Builds the habf_py extension module and exercises it end to end.

Run from anywhere:

    python3 python/smoke_test.py

The script compiles the extension with cargo, stages the shared library
under a temporary directory as ``habf_py.so``, imports it, and checks the
full surface: config validation, dataset generation, building, querying,
serialization round trips, the fast variant, and the bound verifier.
"""

import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]


def build_extension() -> Path:
    subprocess.run(
        [
            "cargo",
            "build",
            "-p",
            "habf-py",
            "--release",
            "--features",
            "extension-module",
        ],
        cwd=ROOT,
        check=True,
    )
    built = ROOT / "target" / "release" / "libhabf_py.so"
    staged = Path(tempfile.mkdtemp(prefix="habf-py-")) / "habf_py.so"
    shutil.copy2(built, staged)
    return staged


def main() -> None:
    staged = build_extension()
    sys.path.insert(0, str(staged.parent))
    import habf_py

    # Config construction, derived geometry, and validation.
    cfg = habf_py.HabfConfig(200_000, k=3, delta=0.25, seed=7)
    assert cfg.total_bits == 200_000 and cfg.k == 3 and not cfg.fast
    m, omega = cfg.geometry
    assert m + omega * cfg.cell_width == 200_000
    assert "total_bits=200000" in repr(cfg)
    try:
        habf_py.HabfConfig(200_000, delta=1.5)
    except ValueError:
        pass
    else:
        raise AssertionError("delta outside [0, 1) must be rejected")
    print("config: geometry and validation ok")

    # Dataset generation: disjoint bytes keys with positive costs.
    positives, negatives = habf_py.make_dataset(20_000, 20_000, skew=1.0, seed=7)
    assert len(positives) == 20_000 and len(negatives) == 20_000
    assert isinstance(positives[0], bytes)
    key0, cost0 = negatives[0]
    assert isinstance(key0, bytes) and cost0 > 0
    assert not set(positives) & {k for k, _ in negatives}
    print("dataset: 20k/20k generated, disjoint")

    # Build; no positive is ever lost, and the membership operator works.
    filt = habf_py.Habf.build(positives, negatives, cfg)
    assert all(filt.query(k) for k in positives)
    assert positives[0] in filt
    stats = filt.stats()
    assert stats["optimized"] > 0
    assert stats["initial_collisions"] >= stats["optimized"]
    print(
        f"build: zero false negatives, {stats['optimized']} of "
        f"{stats['initial_collisions']} colliding negatives cleared"
    )

    # The cost-weighted error on the construction negatives beats the
    # tuned classic filter's closed-form rate at the same bit budget.
    total = sum(c for _, c in negatives)
    hit = sum(c for k, c in negatives if filt.query(k))
    classic = habf_py.theoretical_fpr(habf_py.optimal_k(10.0), 10.0)
    assert hit / total < classic, (hit / total, classic)
    print(f"weighted fpr {hit / total:.2e} < classic closed form {classic:.2e}")

    # Serialization round trip: byte-identical and probe-identical.
    blob = filt.serialize()
    restored = habf_py.Habf.deserialize(blob)
    assert restored.serialize() == blob
    probes, _ = habf_py.make_dataset(5_000, 1, seed=99)
    assert all(restored.query(k) == filt.query(k) for k in probes + positives)
    assert (restored.m, restored.omega, restored.k) == (filt.m, filt.omega, filt.k)
    try:
        habf_py.Habf.deserialize(blob[:-3])
    except OSError:
        pass
    else:
        raise AssertionError("truncated filter bytes must be rejected")
    print(f"serialize: {len(blob)} bytes round-trip, corruption rejected")

    # Fast variant: still zero false negatives, and adjustments only ever
    # avoid setting bits, so the array can only get emptier.
    fast_cfg = habf_py.HabfConfig(200_000, fast=True, seed=7)
    fast = habf_py.Habf.build(positives, negatives, fast_cfg)
    assert all(fast.query(k) for k in positives)
    fs = fast.stats()
    assert fs["bits_set_final"] <= fs["bits_set_initial"]
    print("fast variant: zero false negatives, no new bits set")

    # The numeric bound verifier at a reduced scale.
    rows = habf_py.verify_bounds(n_keys=8_000, n_negatives=8_000, seed=1)
    assert len(rows) == 19
    assert all(r["pass"] for r in rows)
    print("verify_bounds: all 19 sweep points inside their bounds")

    print("smoke test passed")


if __name__ == "__main__":
    main()

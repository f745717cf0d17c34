import csv

import numpy as np
import pytest

from fixhead import bench


def test_too_few_reps_rejected():
    with pytest.raises(ValueError, match="30"):
        bench.bench_head(64, 64, reps=29)


def test_bad_geometry_rejected():
    with pytest.raises(ValueError):
        bench.bench_head(48, 10)


def test_small_gate_and_report(backend):
    r = bench.bench_head(64, 64, backend=backend)
    assert r.reps == 30 and r.backend == backend
    assert len(r.samples_dense) == len(r.samples_fwht) == 30
    assert r.median_ns_dense == np.median(r.samples_dense)
    assert r.median_ns_fwht == np.median(r.samples_fwht)
    assert r.speedup == pytest.approx(r.median_ns_dense / r.median_ns_fwht)
    assert np.isfinite(r.checksum)


def test_truncated_geometry(backend):
    r = bench.bench_head(128, 10, backend=backend)
    assert r.c == 10 and r.speedup > 0


def test_report_and_baseline_csv(tmp_path):
    r = bench.bench_head(64, 32, reps=31)
    path = tmp_path / "bench.csv"
    bench.write_report_csv([r], path)
    lines = path.read_text().splitlines()
    assert lines[0] == "n,c,median_ns_dense,median_ns_fwht,speedup"
    base = bench.read_baseline(path)
    assert base[(64, 32)] == pytest.approx(r.speedup, rel=1e-3)


def test_samples_csv(tmp_path):
    r = bench.bench_head(64, 64)
    path = tmp_path / "s.csv"
    bench.write_samples_csv(r, path)
    with open(path) as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 30
    assert [int(x["dense_ns"]) for x in rows] == r.samples_dense

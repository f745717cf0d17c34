"""Dense vs FWHT truncated-Hadamard classification timing."""

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from fixhead import _backend
from fixhead import hadamard as hd
from fixhead.numerics import Rng, gemv

MIN_REPS = 30
WARMUP = 5
GATE_TOL = 1e-10
REPORT_HEADER = ("n", "c", "median_ns_dense", "median_ns_fwht", "speedup")


class BenchMismatchError(RuntimeError):
    pass


@dataclass
class BenchReport:
    n: int
    c: int
    median_ns_dense: float
    median_ns_fwht: float
    speedup: float
    reps: int
    checksum: float
    backend: str
    samples_dense: list = field(default_factory=list, repr=False)
    samples_fwht: list = field(default_factory=list, repr=False)


def bench_head(n, c, reps=MIN_REPS, backend=None, seed=0):
    """Time dense ``gemv`` against :func:`hadamard_logits` on the same inputs.

    Both paths use the given kernel backend. Outputs must agree within
    ``GATE_TOL`` before anything is timed.
    """
    if reps < MIN_REPS:
        raise ValueError(f"reps must be >= {MIN_REPS}, got {reps}")
    geom = hd.HadamardHeadGeometry(n, c)
    backend = backend or _backend.BACKEND
    rng = Rng(seed)
    x = rng.normal(n)
    x /= np.sqrt(np.dot(x, x))
    b = rng.normal(c)
    dense = np.ascontiguousarray(geom.dense())

    def run_dense():
        return gemv(dense, x, backend=backend) + b

    def run_fwht():
        return hd.hadamard_logits(geom, x, 1.0, b, backend=backend)

    diff = float(np.max(np.abs(run_dense() - run_fwht())))
    if not diff <= GATE_TOL:
        raise BenchMismatchError(f"dense and FWHT outputs differ by {diff:.3e} (n={n}, c={c})")

    checksum = 0.0
    for _ in range(WARMUP):
        checksum += run_dense()[0] + run_fwht()[0]
    t_dense, t_fwht = [], []
    clock = time.perf_counter_ns
    for _ in range(reps):
        t0 = clock()
        y = run_dense()
        t1 = clock()
        checksum += y[0]
        t2 = clock()
        y = run_fwht()
        t3 = clock()
        checksum += y[0]
        t_dense.append(t1 - t0)
        t_fwht.append(t3 - t2)
    md, mf = float(np.median(t_dense)), float(np.median(t_fwht))
    return BenchReport(n, c, md, mf, md / mf, reps, checksum, backend, t_dense, t_fwht)


def write_report_csv(reports, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for r in reports:
            w.writerow([r.n, r.c, f"{r.median_ns_dense:.0f}", f"{r.median_ns_fwht:.0f}",
                        f"{r.speedup:.4g}"])


def write_samples_csv(report, path):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(("rep", "dense_ns", "fwht_ns"))
        for i, (d, h) in enumerate(zip(report.samples_dense, report.samples_fwht)):
            w.writerow((i, d, h))


def read_baseline(path):
    """``{(n, c): speedup}`` from a report CSV recorded on the reference machine."""
    with open(path, newline="") as f:
        return {(int(r["n"]), int(r["c"])): float(r["speedup"]) for r in csv.DictReader(f)}

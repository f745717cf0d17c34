"""Time the compiled kernels against the numpy fallback.

Usage: python benchmarks/compare_backends.py [--reps 30] [--out benchmarks/baseline.csv]

Rows cover the raw FWHT, the dense and FWHT Hadamard heads at 1024x1024, and
one SGD step of the default model with a Hadamard head.
"""

import argparse
import csv
import platform
import time

import numpy as np

from fixhead import _backend, bench, experiment, net
from fixhead import hadamard as hd


def median_ns(fn, reps):
    for _ in range(5):
        fn()
    samples = []
    for _ in range(reps):
        t0 = time.perf_counter_ns()
        fn()
        samples.append(time.perf_counter_ns() - t0)
    return float(np.median(samples))


def fwht_case(backend, n=1024, rows=64):
    x = np.random.default_rng(0).standard_normal((rows, n))
    buf = np.empty_like(x)

    def go():
        np.copyto(buf, x)
        hd.fwht_in_place(buf, backend=backend)
    return go


def train_step_case(backend):
    # the head transform is the only kernel on the training path
    config = experiment.ExperimentConfig(head_mode="hadamard")
    train_set, _ = experiment.load_data(config)
    mlp = experiment.build_model(config, train_set.dim, train_set.n_classes)
    z, t = train_set.features[:32], train_set.labels[:32]
    saved = _backend.kernels

    def go():
        _backend.kernels = _backend.get(backend)
        try:
            net.forward(mlp, z)
            net.backward(mlp, t)
            net.sgd_step(mlp, config.sgd, len(t))
        finally:
            _backend.kernels = saved
    return go


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=30)
    ap.add_argument("--out")
    args = ap.parse_args()
    rows = []
    for be in sorted(_backend.BACKENDS):
        rows.append((be, "fwht_64x1024", median_ns(fwht_case(be), args.reps)))
        r = bench.bench_head(1024, 1024, args.reps, backend=be)
        rows.append((be, "head_dense_1024x1024", r.median_ns_dense))
        rows.append((be, "head_fwht_1024x1024", r.median_ns_fwht))
        rows.append((be, "train_step_hadamard_b32", median_ns(train_step_case(be), args.reps)))
    print(f"# {platform.processor() or platform.machine()}, python {platform.python_version()}, "
          f"numpy {np.__version__}")
    print(f"{'backend':10s} {'case':26s} {'median_ns':>12s}")
    for be, case, ns in rows:
        print(f"{be:10s} {case:26s} {ns:12.0f}")
    if args.out:
        with open(args.out, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(("backend", "case", "median_ns"))
            w.writerows((be, case, f"{ns:.0f}") for be, case, ns in rows)


if __name__ == "__main__":
    main()

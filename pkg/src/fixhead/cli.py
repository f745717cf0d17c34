"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 runtime error. Settings resolve as
built-in defaults, then ``--config FILE`` (``key=value`` lines, keys are the
long flag names with dashes or underscores), then explicit flags.
"""

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from fixhead import _backend, bench, data, experiment, gradcheck, net, projection
from fixhead.head import MODES

DEFAULTS = {
    "head": "orthonormal",
    "alpha": "train",
    "loss": "ce",
    "seed": 0,
    "epochs": 30,
    "batch_size": 32,
    "lr": 0.05,
    "momentum": 0.9,
    "wd": 1e-4,
    "lr_schedule": "15:0.1;25:0.01",
    "widths": "64,64",
    "data": "blobs",
    "n_classes": 10,
    "dim": 32,
    "per_class": 500,
    "sigma": 0.3,
    "images": None,
    "labels": None,
    "limit": None,
    "out": "runs",
}

TRAIN_KEYS = tuple(DEFAULTS)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _add_train_flags(p, with_head=True):
    if with_head:
        p.add_argument("--head", choices=MODES)
        p.add_argument("--alpha", help="'train' or a frozen positive value")
    p.add_argument("--loss", choices=("ce", "cosine"))
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--momentum", type=float)
    p.add_argument("--wd", type=float)
    p.add_argument("--lr-schedule", help="'epoch:mult;epoch:mult', empty for constant")
    p.add_argument("--widths", help="comma-separated hidden widths, last is the representation")
    p.add_argument("--data", choices=("blobs", "idx"))
    p.add_argument("--n-classes", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--per-class", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--images")
    p.add_argument("--labels")
    p.add_argument("--limit", type=int)
    p.add_argument("--out")
    p.add_argument("--config", help="key=value file; flags override it")


def build_parser():
    parser = _Parser(prog="fixhead", description="Fixed-classifier training engine")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("gen-data", help="write seeded blobs as IDX files")
    for flag, kind in (("--n-classes", int), ("--dim", int), ("--per-class", int),
                       ("--sigma", float), ("--seed", int)):
        p.add_argument(flag, type=kind)
    p.add_argument("--out")
    p.add_argument("--config")

    p = sub.add_parser("train", help="single run: metrics CSV + checkpoint")
    _add_train_flags(p)

    p = sub.add_parser("compare", help="paired learned vs fixed runs")
    _add_train_flags(p)
    p.add_argument("--seeds", help="comma-separated seeds (default: --seed)")

    p = sub.add_parser("sweep-alpha", help="frozen-alpha runs plus a trainable-alpha run")
    _add_train_flags(p)
    p.add_argument("--values", default="0.1,1,10")

    p = sub.add_parser("check-grad", help="finite-difference gradient suite")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--per-case", type=int, default=20)

    p = sub.add_parser("bench", help="dense vs FWHT Hadamard head timing")
    p.add_argument("--n", type=int, default=1024)
    p.add_argument("--c", type=int)
    p.add_argument("--reps", type=int, default=bench.MIN_REPS)
    p.add_argument("--backend", choices=sorted(_backend.BACKENDS))
    p.add_argument("--baseline", help="report CSV from the reference machine")
    p.add_argument("--out", default="runs")
    return parser


def read_config_file(path):
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in DEFAULTS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = value
    return values


def resolve(args, keys=TRAIN_KEYS):
    """Defaults, then the config file, then explicit flags; values as strings or natives."""
    out = {k: DEFAULTS[k] for k in keys}
    if getattr(args, "config", None):
        for k, v in read_config_file(args.config).items():
            if k in out:
                out[k] = v
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            out[k] = v
    return out


def _opt(kind, value):
    if value is None or value in ("", "None"):
        return None
    return kind(value)


def _schedule(text):
    text = str(text).strip()
    if not text:
        return []
    out = []
    for part in text.split(";"):
        epoch, mult = part.split(":")
        out.append((int(epoch), float(mult)))
    return out


def to_experiment(cfg):
    try:
        sgd = net.SgdConfig(float(cfg["lr"]), float(cfg["momentum"]), float(cfg["wd"]),
                            _schedule(cfg["lr_schedule"]))
        alpha = cfg["alpha"]
        if alpha != "train":
            alpha = float(alpha)
            if not alpha > 0:
                raise ValueError(f"frozen alpha must be positive, got {alpha}")
        return experiment.ExperimentConfig(
            head_mode=cfg["head"], alpha=alpha, loss=cfg["loss"],
            widths=[int(w) for w in str(cfg["widths"]).split(",")], sgd=sgd,
            epochs=int(cfg["epochs"]), batch_size=int(cfg["batch_size"]), seed=int(cfg["seed"]),
            data=cfg["data"], n_classes=int(cfg["n_classes"]), dim=int(cfg["dim"]),
            per_class=int(cfg["per_class"]), noise_sigma=float(cfg["sigma"]),
            images=_opt(str, cfg["images"]), labels=_opt(str, cfg["labels"]),
            limit=_opt(int, cfg["limit"]),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _format(value):
    return repr(value) if isinstance(value, float) else ("" if value is None else str(value))


def emit_config(cfg, out_dir, name="config.txt", extra=()):
    """Print the resolved config and write it next to the outputs."""
    lines = [f"{k}={_format(v)}" for k, v in list(cfg.items()) + list(extra)]
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if out_dir is not None:
        (Path(out_dir) / name).write_text(text)


def _workers():
    try:
        return max(1, int(os.environ.get("FIXHEAD_THREADS", "1")))
    except ValueError:
        return 1


def _train_job(job):
    config, datasets = job
    return experiment.train(config, datasets)


def run_many(configs, datasets):
    """Independent runs, in parallel up to ``FIXHEAD_THREADS`` processes; order preserved."""
    jobs = [(c, datasets) for c in configs]
    workers = min(_workers(), len(jobs))
    if workers == 1:
        return [_train_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_train_job, jobs))


def cmd_gen_data(args):
    keys = ("n_classes", "dim", "per_class", "sigma", "seed", "out")
    cfg = resolve(args, keys)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    train_set, val_set = data.make_blobs(int(cfg["n_classes"]), int(cfg["dim"]),
                                         int(cfg["per_class"]), float(cfg["sigma"]),
                                         int(cfg["seed"]))
    # affine map into [0, 1] using the training range
    lo, hi = train_set.features.min(), train_set.features.max()
    span = hi - lo if hi > lo else 1.0
    for name, ds in (("train", train_set), ("val", val_set)):
        scaled = data.Dataset((ds.features - lo) / span, ds.labels, ds.n_classes)
        data.write_idx(scaled, out / f"{name}-images.idx", out / f"{name}-labels.idx")
    emit_config(cfg, out, extra=(("scale_lo", float(lo)), ("scale_hi", float(hi))))
    print(f"wrote {len(train_set)} train / {len(val_set)} val samples to {out}")


def cmd_train(args):
    cfg = resolve(args)
    config = to_experiment(cfg)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    emit_config(cfg, out)
    result = experiment.train(config)
    experiment.write_metrics_csv(result.rows, out / "metrics.csv")
    net.save_checkpoint(result.mlp, out / "checkpoint.bin")
    head = result.mlp.head
    if head.mode == "orthonormal":
        mode = projection.STRICT if head.n_classes <= head.n_features else projection.UNIT_ROWS
        projection.save_projection(
            projection.FixedProjection(np.array(head.weights), head.n_features,
                                       head.n_classes, 0, mode),
            out / "projection.fixq")
    last = result.rows[-1]
    print(f"epoch {last.epoch}: train_loss={last.train_loss:.6g} "
          f"train_error={last.train_error:.4f} val_error={last.val_error:.4f} alpha={last.alpha:.6g}")
    if head.fixed and result.head_checksum_before != result.head_checksum_after:
        raise experiment.TrainingError("fixed head weights changed during training")


def cmd_compare(args):
    cfg = resolve(args)
    base = to_experiment(cfg)
    fixed_mode = base.head_mode if base.head_mode != "learned" else "orthonormal"
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else [base.seed]
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    emit_config(cfg, out, extra=(("seeds", ",".join(map(str, seeds))),))
    summary = []
    for seed in seeds:
        cfg_seed = replace(base, seed=seed)
        datasets = experiment.load_data(cfg_seed)
        learned, fixed = run_many(
            [replace(cfg_seed, head_mode="learned", alpha="train", loss="ce"),
             replace(cfg_seed, head_mode=fixed_mode)], datasets)
        cmp = experiment.Comparison(learned, fixed)
        experiment.write_metrics_csv(learned.rows, out / f"learned_seed{seed}.csv")
        experiment.write_metrics_csv(fixed.rows, out / f"{fixed_mode}_seed{seed}.csv")
        summary.append((seed, learned.rows[-1], fixed.rows[-1], cmp.same_sample_order))
    with open(out / "summary.csv", "w") as f:
        f.write("seed,learned_train_error,fixed_train_error,learned_val_error,"
                "fixed_val_error,val_error_delta,same_order\n")
        for seed, l, x, same in summary:
            f.write(f"{seed},{l.train_error:.9g},{x.train_error:.9g},{l.val_error:.9g},"
                    f"{x.val_error:.9g},{x.val_error - l.val_error:.9g},{int(same)}\n")
    for seed, l, x, _ in summary:
        print(f"seed {seed}: val_error learned={l.val_error:.4f} {fixed_mode}={x.val_error:.4f} "
              f"train_error learned={l.train_error:.4f} {fixed_mode}={x.train_error:.4f}")
    mean_delta = np.mean([x.val_error - l.val_error for _, l, x, _ in summary])
    print(f"mean val_error delta ({fixed_mode} - learned): {100 * mean_delta:+.2f} points")


def cmd_sweep_alpha(args):
    cfg = resolve(args)
    base = to_experiment(cfg)
    if base.head_mode == "learned":
        raise UsageError("sweep-alpha needs --head orthonormal or hadamard")
    try:
        values = [float(v) for v in args.values.split(",")]
    except ValueError as exc:
        raise UsageError(f"bad --values: {exc}") from exc
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    emit_config(cfg, out, extra=(("values", args.values),))
    datasets = experiment.load_data(base)
    configs = [replace(base, alpha=v) for v in values] + [replace(base, alpha="train")]
    results = run_many(configs, datasets)
    labels = [repr(v) for v in values] + ["train"]
    with open(out / "summary.csv", "w") as f:
        f.write("alpha,final_train_error,final_val_error,final_alpha\n")
        for label, res in zip(labels, results):
            experiment.write_metrics_csv(res.rows, out / f"alpha_{label}.csv")
            r = res.rows[-1]
            f.write(f"{label},{r.train_error:.9g},{r.val_error:.9g},{r.alpha:.9g}\n")
            print(f"alpha={label}: val_error={r.val_error:.4f} train_error={r.train_error:.4f} "
                  f"final alpha={r.alpha:.4g}")


def cmd_check_grad(args):
    results = gradcheck.run_suite(args.seed, args.per_case)
    worst = max(results, key=lambda r: r.max_error)
    for mode, loss in gradcheck.CASES:
        errs = [r.max_error for r in results if r.mode == mode and r.loss == loss]
        print(f"{mode:12s} {loss:7s} configs={len(errs):3d} max_rel_error={max(errs):.3e}")
    print(f"max relative error: {worst.max_error:.3e}")
    if worst.max_error >= 1e-4:
        name = max(worst.errors, key=worst.errors.get)
        raise RuntimeError(f"gradient check failed: {worst.mode}/{worst.loss} {name}")


def cmd_bench(args):
    c = args.c if args.c is not None else args.n
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    backends = [args.backend] if args.backend else sorted(_backend.BACKENDS)
    reports = []
    for be in backends:
        try:
            r = bench.bench_head(args.n, c, args.reps, backend=be)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        reports.append(r)
        bench.write_samples_csv(r, out / f"bench_samples_{be}_{args.n}x{c}.csv")
        print(f"[{be}] n={r.n} c={r.c} dense={r.median_ns_dense:.0f}ns "
              f"fwht={r.median_ns_fwht:.0f}ns speedup={r.speedup:.2f}x")
    active = next(r for r in reports if r.backend == _backend.BACKEND) \
        if any(r.backend == _backend.BACKEND for r in reports) else reports[0]
    bench.write_report_csv([active], out / "bench.csv")
    if args.baseline:
        ref = bench.read_baseline(args.baseline).get((args.n, c))
        if ref is None:
            print(f"no baseline entry for n={args.n}, c={c}")
        else:
            status = "ok" if active.speedup >= 0.5 * ref else "SLOWER THAN BASELINE"
            print(f"baseline speedup {ref:.2f}x, measured {active.speedup:.2f}x: {status}")
    if active.speedup < 2.0:
        print(f"note: speedup {active.speedup:.2f}x below the 2x target (soft)", file=sys.stderr)


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "compare": cmd_compare,
    "sweep-alpha": cmd_sweep_alpha,
    "check-grad": cmd_check_grad,
    "bench": cmd_bench,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return 1
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failures map to exit code 2
        print(f"fixhead: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

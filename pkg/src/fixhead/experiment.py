"""Training runs and the paired comparisons built on them."""

import csv
import hashlib
from dataclasses import dataclass, field, replace

import numpy as np

from fixhead import data as dmod
from fixhead import head as hmod
from fixhead import net
from fixhead.numerics import derive_seed, Rng

_SHUFFLE_TAG = 0x5AFF1E
_HEAD_TAG = 0x4EAD
_INIT_TAG = 0x1417
_SPLIT_TAG = 0x5B17

METRICS_HEADER = ("epoch", "train_loss", "train_error", "val_error", "alpha")


class TrainingError(RuntimeError):
    pass


class DivergenceError(TrainingError):
    def __init__(self, epoch, loss):
        super().__init__(f"training diverged at epoch {epoch} (train loss {loss})")
        self.epoch = epoch


def default_sgd():
    return net.SgdConfig(learning_rate=0.05, momentum=0.9, weight_decay=1e-4,
                         lr_schedule=[(15, 0.1), (25, 0.01)])


@dataclass
class ExperimentConfig:
    head_mode: str = "orthonormal"
    alpha: object = "train"  # "train" or a frozen float
    loss: str = "ce"
    widths: tuple = (64, 64)  # hidden widths; the last one is the representation
    sgd: net.SgdConfig = field(default_factory=lambda: default_sgd())
    epochs: int = 30
    batch_size: int = 32
    seed: int = 0
    data: str = "blobs"
    n_classes: int = 10
    dim: int = 32
    per_class: int = 500
    noise_sigma: float = 0.3
    images: str = None
    labels: str = None
    limit: int = None

    def __post_init__(self):
        if self.head_mode not in hmod.MODES:
            raise ValueError(f"unknown head mode {self.head_mode!r}")
        if self.alpha != "train":
            self.alpha = float(self.alpha)
        if self.head_mode == "learned" and self.alpha != "train":
            raise ValueError("a frozen alpha only applies to fixed heads")
        if self.loss not in net.LOSSES:
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.loss == "cosine" and self.head_mode == "learned":
            raise ValueError("cosine loss needs a fixed head")
        if self.data not in ("blobs", "idx"):
            raise ValueError(f"unknown data source {self.data!r}")
        if self.data == "idx" and not (self.images and self.labels):
            raise ValueError("idx data needs both images and labels paths")
        self.widths = tuple(int(w) for w in self.widths)
        if not self.widths or min(self.widths) < 1:
            raise ValueError(f"bad widths {self.widths}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")

    @property
    def alpha_trainable(self):
        return self.alpha == "train"

    def items(self):
        """Flat ``(key, value)`` pairs describing the fully resolved config."""
        out = []
        for k in ("head_mode", "alpha", "loss"):
            out.append((k, getattr(self, k)))
        out.append(("widths", ",".join(str(w) for w in self.widths)))
        out += [("lr", self.sgd.learning_rate), ("momentum", self.sgd.momentum),
                ("wd", self.sgd.weight_decay),
                ("lr_schedule", ";".join(f"{e}:{m!r}" for e, m in self.sgd.lr_schedule))]
        for k in ("epochs", "batch_size", "seed", "data", "n_classes", "dim", "per_class",
                  "noise_sigma", "images", "labels", "limit"):
            out.append((k, getattr(self, k)))
        return out


@dataclass
class MetricsRow:
    epoch: int
    train_loss: float
    train_error: float
    val_error: float
    alpha: float


@dataclass
class RunResult:
    rows: list
    mlp: net.Mlp
    shuffle_checksum: str
    head_checksum_before: str
    head_checksum_after: str


def load_data(config):
    if config.data == "blobs":
        return dmod.make_blobs(config.n_classes, config.dim, config.per_class,
                               config.noise_sigma, config.seed)
    full = dmod.load_idx(config.images, config.labels, config.limit)
    perm = Rng(derive_seed(config.seed, _SPLIT_TAG)).permutation(len(full))
    n_val = int(round(0.2 * len(full)))
    return full.subset(np.sort(perm[n_val:])), full.subset(np.sort(perm[:n_val]))


def build_model(config, dim, n_classes):
    """Model for ``config``; MLP init depends only on the seed, never on the head."""
    head = hmod.make_head(
        config.head_mode, config.widths[-1], n_classes,
        seed=derive_seed(config.seed, _HEAD_TAG),
        alpha=1.0 if config.alpha_trainable else config.alpha,
        alpha_trainable=config.alpha_trainable,
    )
    mlp = net.Mlp.build([dim, *config.widths], head, loss=config.loss)
    net.init_params(mlp, derive_seed(config.seed, _INIT_TAG))
    return mlp


def evaluate(mlp, dataset, batch=1024):
    """Mean per-sample loss and error rate on ``dataset``."""
    total_loss, wrong = 0.0, 0
    for start in range(0, len(dataset), batch):
        z = dataset.features[start:start + batch]
        t = dataset.labels[start:start + batch]
        x, y = net.forward(mlp, z)
        if mlp.loss == "ce":
            total_loss += hmod.nll_loss(y, t)
        else:
            total_loss += hmod.cosine_loss_and_grads(mlp.head, x, t, mlp.cosine_reduction)[0]
        wrong += int(np.count_nonzero(np.argmax(y, axis=1) != t))
    mlp._cache = None
    n = max(len(dataset), 1)
    return total_loss / n, wrong / n


def train(config, datasets=None):
    """Run ``config`` to completion and return the full :class:`RunResult`."""
    train_set, val_set = datasets if datasets is not None else load_data(config)
    mlp = build_model(config, train_set.dim, train_set.n_classes)
    head = mlp.head
    before = hmod.weight_checksum(head)
    shuffle_hash = hashlib.sha256()
    rows = []
    n = len(train_set)
    for epoch in range(1, config.epochs + 1):
        perm = Rng(derive_seed(config.seed, _SHUFFLE_TAG, epoch)).permutation(n)
        shuffle_hash.update(perm.astype("<i8").tobytes())
        for start in range(0, n, config.batch_size):
            idx = perm[start:start + config.batch_size]
            net.forward(mlp, train_set.features[idx])
            net.backward(mlp, train_set.labels[idx])
            net.sgd_step(mlp, config.sgd, len(idx), epoch=epoch)
        if head.fixed and head.alpha_trainable and not head.alpha > 0:
            raise TrainingError(f"alpha became non-positive ({head.alpha}) at epoch {epoch}")
        train_loss, train_err = evaluate(mlp, train_set)
        if not np.isfinite(train_loss):
            raise DivergenceError(epoch, train_loss)
        _, val_err = evaluate(mlp, val_set)
        alpha = head.alpha if head.fixed else float("nan")
        rows.append(MetricsRow(epoch, train_loss, train_err, val_err, alpha))
    return RunResult(rows, mlp, shuffle_hash.hexdigest(), before, hmod.weight_checksum(head))


def run(config, checkpoint_path=None, datasets=None):
    """Train and return the per-epoch metrics; optionally write the final checkpoint."""
    result = train(config, datasets)
    if checkpoint_path is not None:
        net.save_checkpoint(result.mlp, checkpoint_path)
    return result.rows


@dataclass
class Comparison:
    learned: RunResult
    fixed: RunResult

    @property
    def val_error_delta(self):
        """Per-epoch ``fixed - learned`` validation error."""
        return [f.val_error - l.val_error for f, l in zip(self.fixed.rows, self.learned.rows)]

    @property
    def train_error_delta(self):
        return [f.train_error - l.train_error for f, l in zip(self.fixed.rows, self.learned.rows)]

    @property
    def final_val_accuracy(self):
        return 1.0 - self.learned.rows[-1].val_error, 1.0 - self.fixed.rows[-1].val_error

    @property
    def same_sample_order(self):
        return self.learned.shuffle_checksum == self.fixed.shuffle_checksum


def compare_fixed_vs_learned(base, fixed_mode=None):
    """Paired runs that differ only in the head: learned baseline vs fixed.

    ``fixed_mode`` defaults to ``base.head_mode`` when that is a fixed mode,
    else ``"orthonormal"``. Data, MLP init and sample order are shared.
    """
    if fixed_mode is None:
        fixed_mode = base.head_mode if base.head_mode in hmod.FIXED_MODES else "orthonormal"
    datasets = load_data(base)
    learned = train(replace(base, head_mode="learned", alpha="train", loss="ce"), datasets)
    fixed = train(replace(base, head_mode=fixed_mode), datasets)
    return Comparison(learned, fixed)


def sweep_alpha(base, values):
    """One frozen-alpha run per value plus a trainable-alpha run (key ``"train"``)."""
    if base.head_mode == "learned":
        raise ValueError("alpha sweep needs a fixed head mode")
    datasets = load_data(base)
    out = {}
    for v in values:
        out[float(v)] = train(replace(base, alpha=float(v)), datasets).rows
    out["train"] = train(replace(base, alpha="train"), datasets).rows
    return out


def alpha_increments(rows, initial=1.0):
    """``alpha`` gained over each third of training, starting from ``initial``."""
    alphas = [initial] + [r.alpha for r in rows]
    e = len(rows)
    cuts = [0, e // 3, (2 * e) // 3, e]
    return [alphas[cuts[i + 1]] - alphas[cuts[i]] for i in range(3)]


def write_metrics_csv(rows, path):
    try:
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(METRICS_HEADER)
            for r in rows:
                w.writerow([r.epoch] + [f"{v:.9g}" for v in
                                        (r.train_loss, r.train_error, r.val_error, r.alpha)])
    except OSError as exc:
        raise OSError(f"cannot write metrics to {path}: {exc}") from exc


def read_metrics_csv(path):
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        if tuple(header) != METRICS_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        return [MetricsRow(int(r[0]), *(float(v) for v in r[1:])) for r in reader]

"""Classification heads and their losses.

Three modes share one interface:

* ``learned``: ``y = x @ W + b`` on the raw representation, ``W`` trainable.
* ``orthonormal``: ``y = alpha * normalize(x) @ Q + b`` with ``Q`` fixed.
* ``hadamard``: as above with ``Q`` the first ``C`` rows of a Sylvester
  matrix scaled by ``1/sqrt(n)``, applied by FWHT. Representations narrower
  than the transform are zero-padded.

Every function accepts one sample (1-D ``x``, integer ``t``) or a batch
(2-D ``x``, integer array ``t``). For a batch the loss and parameter
gradients are summed over rows and ``d_input`` has one row per sample.
"""

import hashlib
from dataclasses import dataclass, field

import numpy as np

from fixhead import hadamard as hd
from fixhead import projection
from fixhead.numerics import Rng

MODES = ("learned", "orthonormal", "hadamard")
FIXED_MODES = ("orthonormal", "hadamard")
NORM_EPS = 1e-12


class NormGuard:
    """Counts how often :func:`normalize` hit the epsilon floor."""

    def __init__(self):
        self.hits = 0


def normalize(x, guard=None):
    """``x / max(||x||, 1e-12)`` along the last axis."""
    x = np.asarray(x, dtype=np.float64)
    norms = np.sqrt(np.sum(x * x, axis=-1, keepdims=True))
    floored = norms < NORM_EPS
    if guard is not None:
        guard.hits += int(np.count_nonzero(floored))
    return x / np.maximum(norms, NORM_EPS)


def softmax(y):
    y = np.asarray(y, dtype=np.float64)
    e = np.exp(y - np.max(y, axis=-1, keepdims=True))
    return e / np.sum(e, axis=-1, keepdims=True)


def logsumexp(y):
    y = np.asarray(y, dtype=np.float64)
    m = np.max(y, axis=-1)
    return m + np.log(np.sum(np.exp(y - m[..., None]), axis=-1))


def _check_targets(t, n_classes, batch_shape):
    t = np.asarray(t)
    if t.shape != batch_shape:
        raise ValueError(f"targets shape {t.shape} does not match batch shape {batch_shape}")
    if not np.issubdtype(t.dtype, np.integer):
        raise TypeError(f"targets must be integers, got {t.dtype}")
    if np.any(t < 0) or np.any(t >= n_classes):
        raise IndexError(f"target out of range [0, {n_classes}): {t}")
    return t


def nll_loss(y, t):
    """``-log softmax(y)[t]``, summed over the batch for 2-D ``y``."""
    y = np.asarray(y, dtype=np.float64)
    t = _check_targets(t, y.shape[-1], y.shape[:-1])
    picked = np.take_along_axis(y, t[..., None], axis=-1)[..., 0]
    return float(np.sum(logsumexp(y) - picked))


@dataclass
class Head:
    mode: str
    n_features: int
    n_classes: int
    bias: np.ndarray
    weights: np.ndarray = None  # (N, C); absent in hadamard mode
    geometry: hd.HadamardHeadGeometry = None
    alpha: float = 1.0
    alpha_trainable: bool = True
    guard: NormGuard = field(default_factory=NormGuard, repr=False, compare=False)

    def __post_init__(self):
        if self.mode == "orthonormal" and self.weights.flags.writeable:
            self.weights = np.array(self.weights)
            self.weights.setflags(write=False)

    @property
    def fixed(self):
        return self.mode in FIXED_MODES


@dataclass
class HeadGradients:
    d_alpha: float
    d_bias: np.ndarray
    d_input: np.ndarray
    d_weights: np.ndarray = None


def make_head(mode, n_features, n_classes, seed=0, alpha=1.0, alpha_trainable=True):
    """Build a head. ``seed`` drives the fixed projection or the learned init."""
    if mode not in MODES:
        raise ValueError(f"unknown head mode {mode!r}; expected one of {MODES}")
    bias = np.zeros(n_classes)
    if mode == "learned":
        std = 1.0 / np.sqrt(n_features)
        w = Rng(seed).normal(n_features * n_classes).reshape(n_features, n_classes) * std
        return Head(mode, n_features, n_classes, bias, weights=w)
    if mode == "orthonormal":
        q = projection.make_projection(n_features, n_classes, seed).q
        return Head(mode, n_features, n_classes, bias, weights=q, alpha=float(alpha),
                    alpha_trainable=alpha_trainable)
    geom = hd.HadamardHeadGeometry(hd.next_power_of_two(max(n_features, n_classes)), n_classes)
    return Head(mode, n_features, n_classes, bias, geometry=geom, alpha=float(alpha),
                alpha_trainable=alpha_trainable)


def head_from_projection(proj, alpha=1.0, alpha_trainable=True):
    return Head("orthonormal", proj.n_features, proj.n_classes, np.zeros(proj.n_classes),
                weights=np.array(proj.q), alpha=float(alpha), alpha_trainable=alpha_trainable)


def weight_checksum(head):
    """SHA-256 over the fixed (or learned) classifier weights."""
    h = hashlib.sha256(head.mode.encode())
    if head.mode == "hadamard":
        h.update(np.array([head.geometry.n, head.geometry.c], dtype="<u8").tobytes())
    else:
        h.update(np.ascontiguousarray(head.weights, dtype="<f8").tobytes())
    return h.hexdigest()


def _check_input(head, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[-1] != head.n_features:
        raise ValueError(f"input shape {x.shape} does not match head width {head.n_features}")
    return x


def _pad(head, x_hat):
    extra = head.geometry.n - head.n_features
    if extra == 0:
        return x_hat
    pad = [(0, 0)] * (x_hat.ndim - 1) + [(0, extra)]
    return np.pad(x_hat, pad)


def cosines(head, x_hat):
    """``q_i . x_hat`` for every class (fixed modes)."""
    if head.mode == "orthonormal":
        return x_hat @ head.weights
    return hd.hadamard_logits(head.geometry, _pad(head, x_hat), 1.0, np.zeros(head.n_classes))


def _directions_adjoint(head, g, scale):
    """``scale * Q @ g`` (per row), truncated to the representation width."""
    if head.mode == "orthonormal":
        return scale * (g @ head.weights.T)
    return hd.hadamard_backward(head.geometry, g, scale)[..., : head.n_features]


def logits(head, x):
    x = _check_input(head, x)
    if head.mode == "learned":
        return x @ head.weights + head.bias
    x_hat = normalize(x, head.guard)
    if head.mode == "orthonormal":
        return head.alpha * (x_hat @ head.weights) + head.bias
    return hd.hadamard_logits(head.geometry, _pad(head, x_hat), head.alpha, head.bias)


def _through_normalization(x, x_hat, d_x_hat):
    # Jacobian of x / max(||x||, eps): (I - x_hat x_hat^T) / ||x||, or I / eps below the floor
    norms = np.sqrt(np.sum(x * x, axis=-1, keepdims=True))
    radial = np.sum(x_hat * d_x_hat, axis=-1, keepdims=True)
    tangent = np.where(norms < NORM_EPS, d_x_hat, d_x_hat - x_hat * radial)
    return tangent / np.maximum(norms, NORM_EPS)


def loss_and_grads(head, x, t):
    """Softmax cross-entropy loss and its gradients for one sample or a batch."""
    x = _check_input(head, x)
    t = _check_targets(t, head.n_classes, x.shape[:-1])
    if head.mode == "learned":
        y = x @ head.weights + head.bias
    else:
        x_hat = normalize(x, head.guard)
        cos = cosines(head, x_hat)
        y = head.alpha * cos + head.bias
    loss = nll_loss(y, t)
    g = softmax(y)
    np.put_along_axis(g, t[..., None], np.take_along_axis(g, t[..., None], axis=-1) - 1.0, axis=-1)
    d_bias = g if g.ndim == 1 else g.sum(axis=0)
    if head.mode == "learned":
        d_weights = np.outer(x, g) if x.ndim == 1 else x.T @ g
        return loss, HeadGradients(0.0, d_bias, g @ head.weights.T, d_weights)
    d_alpha = float(np.sum(g * cos))
    d_x_hat = _directions_adjoint(head, g, head.alpha)
    return loss, HeadGradients(d_alpha, d_bias, _through_normalization(x, x_hat, d_x_hat))


def cosine_loss_and_grads(head, x, t, reduction="sum"):
    """Softmax-free cosine loss: ``(1 - q_t.x_hat) + sum_{i != t} (1 + q_i.x_hat)``.

    ``reduction`` is ``"sum"`` over classes (default) or ``"mean"``. Returns
    ``(loss, d_input)``; alpha and bias play no part.
    """
    if not head.fixed:
        raise ValueError("cosine loss needs a fixed head (orthonormal or hadamard)")
    if reduction not in ("sum", "mean"):
        raise ValueError(f"unknown reduction {reduction!r}")
    x = _check_input(head, x)
    t = _check_targets(t, head.n_classes, x.shape[:-1])
    x_hat = normalize(x, head.guard)
    cos = cosines(head, x_hat)
    signs = np.ones_like(cos)
    np.put_along_axis(signs, t[..., None], -1.0, axis=-1)
    scale = 1.0 if reduction == "sum" else 1.0 / head.n_classes
    per_sample = head.n_classes + np.sum(signs * cos, axis=-1)
    loss = float(np.sum(per_sample)) * scale
    d_x_hat = _directions_adjoint(head, signs, scale)
    return loss, _through_normalization(x, x_hat, d_x_hat)


def predict(head, x):
    return np.argmax(logits(head, x), axis=-1)

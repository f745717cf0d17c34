"""Multilayer perceptron with manual backprop and momentum SGD.

Dense layers compute ``h @ w.T + b`` with ReLU between consecutive layers and
no activation after the last one, whose output is the representation fed to
the head. Gradients are of the loss summed over the forwarded batch;
:func:`sgd_step` divides by the batch size.
"""

import hashlib
import struct
from dataclasses import dataclass, field

import numpy as np

from fixhead import hadamard as hd
from fixhead import head as hmod
from fixhead.numerics import Rng

LOSSES = ("ce", "cosine")


@dataclass
class DenseLayer:
    w: np.ndarray  # (out, in)
    b: np.ndarray

    def __post_init__(self):
        self.grad_w = np.zeros_like(self.w)
        self.grad_b = np.zeros_like(self.b)
        self.vel_w = np.zeros_like(self.w)
        self.vel_b = np.zeros_like(self.b)

    @property
    def n_in(self):
        return self.w.shape[1]

    @property
    def n_out(self):
        return self.w.shape[0]


@dataclass
class SgdConfig:
    learning_rate: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 5e-4
    lr_schedule: list = field(default_factory=list)  # [(epoch, multiplier), ...]

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if not 0 <= self.momentum < 1:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be >= 0, got {self.weight_decay}")

    def lr_at(self, epoch):
        """Learning rate for ``epoch``: the multiplier of the latest milestone reached."""
        mult = 1.0
        for start, m in sorted(self.lr_schedule):
            if epoch >= start:
                mult = m
        return self.learning_rate * mult


class Mlp:
    def __init__(self, layers, head, loss="ce", cosine_reduction="sum"):
        if loss not in LOSSES:
            raise ValueError(f"unknown loss {loss!r}; expected one of {LOSSES}")
        if loss == "cosine" and not head.fixed:
            raise ValueError("cosine loss needs a fixed head")
        for a, b in zip(layers, layers[1:]):
            if a.n_out != b.n_in:
                raise ValueError(f"layer widths do not chain: {a.n_out} -> {b.n_in}")
        if layers and layers[-1].n_out != head.n_features:
            raise ValueError(
                f"last hidden width {layers[-1].n_out} != head width {head.n_features}"
            )
        self.layers = list(layers)
        self.head = head
        self.loss = loss
        self.cosine_reduction = cosine_reduction
        self.grad_alpha = 0.0
        self.grad_bias = np.zeros(head.n_classes)
        self.grad_head_w = None if head.weights is None else np.zeros_like(head.weights)
        self.vel_alpha = 0.0
        self.vel_bias = np.zeros(head.n_classes)
        self.vel_head_w = None if head.weights is None else np.zeros_like(head.weights)
        self._cache = None

    @classmethod
    def build(cls, widths, head, loss="ce", cosine_reduction="sum"):
        """``widths`` is ``[input, hidden..., representation]``."""
        if len(widths) < 2:
            raise ValueError(f"need at least input and representation widths, got {widths}")
        layers = [DenseLayer(np.zeros((o, i)), np.zeros(o)) for i, o in zip(widths, widths[1:])]
        return cls(layers, head, loss, cosine_reduction)

    @property
    def widths(self):
        return [self.layers[0].n_in] + [layer.n_out for layer in self.layers]


def init_params(mlp, seed):
    """He-normal dense weights, zero biases, alpha reset to 1 when trainable."""
    rng = Rng(seed)
    for layer in mlp.layers:
        std = np.sqrt(2.0 / layer.n_in)
        layer.w[...] = rng.normal(layer.w.size).reshape(layer.w.shape) * std
        layer.b[...] = 0.0
        layer.vel_w[...] = 0.0
        layer.vel_b[...] = 0.0
    head = mlp.head
    if head.fixed and head.alpha_trainable:
        head.alpha = 1.0
    head.bias[...] = 0.0
    mlp.vel_alpha = 0.0
    mlp.vel_bias[...] = 0.0
    if mlp.vel_head_w is not None:
        mlp.vel_head_w[...] = 0.0


def forward(mlp, z):
    """Return ``(representation, logits)`` and cache what backward needs."""
    z = np.asarray(z, dtype=np.float64)
    if z.ndim not in (1, 2) or z.shape[-1] != mlp.layers[0].n_in:
        raise ValueError(f"input shape {z.shape} does not match input width {mlp.layers[0].n_in}")
    inputs, pre = [], []
    h = z
    last = len(mlp.layers) - 1
    for k, layer in enumerate(mlp.layers):
        inputs.append(h)
        a = h @ layer.w.T + layer.b
        pre.append(a)
        h = a if k == last else np.maximum(a, 0.0)
    mlp._cache = (inputs, pre, h)
    return h, hmod.logits(mlp.head, h)


def backward(mlp, t):
    """Fill every gradient buffer from the cached forward pass; return the loss."""
    if mlp._cache is None:
        raise RuntimeError("backward() called before forward()")
    inputs, pre, x = mlp._cache
    head = mlp.head
    if mlp.loss == "ce":
        loss, hg = hmod.loss_and_grads(head, x, t)
        mlp.grad_alpha = hg.d_alpha if head.fixed and head.alpha_trainable else 0.0
        mlp.grad_bias[...] = hg.d_bias
        if mlp.grad_head_w is not None:
            mlp.grad_head_w[...] = hg.d_weights if hg.d_weights is not None else 0.0
        delta = hg.d_input
    else:
        loss, delta = hmod.cosine_loss_and_grads(head, x, t, mlp.cosine_reduction)
        mlp.grad_alpha = 0.0
        mlp.grad_bias[...] = 0.0
    for k in range(len(mlp.layers) - 1, -1, -1):
        layer = mlp.layers[k]
        if k != len(mlp.layers) - 1:
            delta = delta * (pre[k] > 0.0)
        h = inputs[k]
        if delta.ndim == 1:
            layer.grad_w[...] = np.outer(delta, h)
            layer.grad_b[...] = delta
        else:
            layer.grad_w[...] = delta.T @ h
            layer.grad_b[...] = delta.sum(axis=0)
        if k:
            delta = delta @ layer.w
    mlp._cache = None
    return loss


def _update(param, grad, vel, lr, cfg, scale):
    vel *= cfg.momentum
    vel += grad * scale + cfg.weight_decay * param
    param -= lr * vel


def sgd_step(mlp, cfg, batch_size, epoch=0):
    """Momentum SGD with L2 weight decay on every trainable parameter.

    ``v <- momentum * v + (grad / batch_size + wd * param)``,
    ``param <- param - lr * v``. Fixed classifier weights are never touched.
    """
    lr = cfg.lr_at(epoch)
    scale = 1.0 / batch_size
    for layer in mlp.layers:
        _update(layer.w, layer.grad_w, layer.vel_w, lr, cfg, scale)
        _update(layer.b, layer.grad_b, layer.vel_b, lr, cfg, scale)
    head = mlp.head
    if mlp.loss == "ce":
        _update(head.bias, mlp.grad_bias, mlp.vel_bias, lr, cfg, scale)
    if head.mode == "learned":
        _update(head.weights, mlp.grad_head_w, mlp.vel_head_w, lr, cfg, scale)
    elif head.alpha_trainable and mlp.loss == "ce":
        mlp.vel_alpha = cfg.momentum * mlp.vel_alpha + (
            mlp.grad_alpha * scale + cfg.weight_decay * head.alpha
        )
        head.alpha -= lr * mlp.vel_alpha


def parameters(mlp):
    """Trainable array parameters as ``(name, array, grad)``. Alpha is a float on the head."""
    out = []
    for k, layer in enumerate(mlp.layers):
        out.append((f"layer{k}.w", layer.w, layer.grad_w))
        out.append((f"layer{k}.b", layer.b, layer.grad_b))
    head = mlp.head
    if head.mode == "learned":
        out.append(("head.w", head.weights, mlp.grad_head_w))
    if mlp.loss == "ce":
        out.append(("head.b", head.bias, mlp.grad_bias))
    return out


def parameter_checksum(mlp):
    h = hashlib.sha256()
    for _, p, _ in parameters(mlp):
        h.update(np.ascontiguousarray(p, dtype="<f8").tobytes())
    h.update(np.array([mlp.head.alpha], dtype="<f8").tobytes())
    return h.hexdigest()


# checkpoint: header, widths, then float64 LE parameters in declaration order
CKPT_MAGIC = b"FXCK"
CKPT_VERSION = 1
_CKPT_HEADER = struct.Struct("<4sIIIIIII")


class CheckpointError(ValueError):
    pass


def save_checkpoint(mlp, path):
    head = mlp.head
    widths = mlp.widths
    had_n = head.geometry.n if head.mode == "hadamard" else 0
    with open(path, "wb") as f:
        f.write(_CKPT_HEADER.pack(
            CKPT_MAGIC, CKPT_VERSION, hmod.MODES.index(head.mode), LOSSES.index(mlp.loss),
            int(head.alpha_trainable), len(widths), head.n_classes, had_n,
        ))
        f.write(np.array(widths, dtype="<u4").tobytes())
        for layer in mlp.layers:
            f.write(np.ascontiguousarray(layer.w, dtype="<f8").tobytes())
            f.write(np.ascontiguousarray(layer.b, dtype="<f8").tobytes())
        if head.weights is not None:
            f.write(np.ascontiguousarray(head.weights, dtype="<f8").tobytes())
        f.write(np.array([head.alpha], dtype="<f8").tobytes())
        f.write(np.ascontiguousarray(head.bias, dtype="<f8").tobytes())


def load_checkpoint(path):
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < _CKPT_HEADER.size:
        raise CheckpointError(f"{path}: truncated header")
    magic, version, mode_i, loss_i, alpha_tr, n_widths, n_classes, had_n = \
        _CKPT_HEADER.unpack_from(raw)
    if magic != CKPT_MAGIC:
        raise CheckpointError(f"{path}: bad magic {magic!r}")
    if version != CKPT_VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    off = _CKPT_HEADER.size
    widths = np.frombuffer(raw, dtype="<u4", count=n_widths, offset=off).astype(int).tolist()
    off += 4 * n_widths
    floats = np.frombuffer(raw, dtype="<f8", offset=off).astype(np.float64)
    pos = 0

    def take(shape):
        nonlocal pos
        size = int(np.prod(shape))
        if pos + size > floats.size:
            raise CheckpointError(f"{path}: truncated parameter block")
        arr = floats[pos:pos + size].reshape(shape).copy()
        pos += size
        return arr

    layers = [DenseLayer(take((o, i)), take((o,))) for i, o in zip(widths, widths[1:])]
    mode = hmod.MODES[mode_i]
    n_feat = widths[-1]
    weights = take((n_feat, n_classes)) if mode != "hadamard" else None
    alpha = float(take((1,))[0])
    bias = take((n_classes,))
    if pos != floats.size:
        raise CheckpointError(f"{path}: {floats.size - pos} trailing values")
    geom = hd.HadamardHeadGeometry(had_n, n_classes) if mode == "hadamard" else None
    head = hmod.Head(mode, n_feat, n_classes, bias, weights=weights, geometry=geom,
                     alpha=alpha, alpha_trainable=bool(alpha_tr))
    return Mlp(layers, head, LOSSES[loss_i])

"""Sylvester Hadamard matrices and the truncated-Hadamard classifier kernels."""

import math
from dataclasses import dataclass

import numpy as np

from fixhead import _backend


def is_power_of_two(n):
    return isinstance(n, (int, np.integer)) and n >= 1 and (n & (n - 1)) == 0


def next_power_of_two(n):
    if n < 1:
        raise ValueError(f"size must be positive, got {n}")
    return 1 << (int(n) - 1).bit_length()


def sylvester(n):
    """The ``n x n`` Sylvester Hadamard matrix, by Kronecker doubling from ``[[1]]``."""
    if not is_power_of_two(n):
        raise ValueError(f"Sylvester Hadamard size must be a power of two, got {n}")
    h = np.ones((1, 1))
    while h.shape[0] < n:
        h = np.block([[h, h], [h, -h]])
    return h


def fwht_in_place(x, backend=None):
    """Replace ``x`` by ``H @ x`` (unnormalized) along its last axis.

    ``x`` must be a C-contiguous float64 array, 1-D or 2-D (one transform per
    row). Returns ``x`` for convenience.
    """
    if not isinstance(x, np.ndarray) or x.dtype != np.float64 or not x.flags.c_contiguous:
        raise TypeError("fwht_in_place needs a C-contiguous float64 ndarray")
    n = x.shape[-1]
    if not is_power_of_two(n):
        raise ValueError(f"FWHT length must be a power of two, got {n}")
    if x.ndim == 1:
        _backend.get(backend).fwht_rows(x.reshape(1, n))
    elif x.ndim == 2:
        _backend.get(backend).fwht_rows(x)
    else:
        raise ValueError(f"expected 1-D or 2-D input, got shape {x.shape}")
    return x


def fwht(x, backend=None):
    """Out-of-place FWHT."""
    return fwht_in_place(np.array(x, dtype=np.float64, order="C"), backend=backend)


@dataclass(frozen=True)
class HadamardHeadGeometry:
    n: int
    c: int

    def __post_init__(self):
        if not is_power_of_two(self.n):
            raise ValueError(f"transform size must be a power of two, got {self.n}")
        if not 1 <= self.c <= self.n:
            raise ValueError(f"need 1 <= c <= n, got c={self.c}, n={self.n}")

    @property
    def row_scale(self):
        return 1.0 / math.sqrt(self.n)

    def dense(self):
        """The explicit ``c x n`` row-normalized classifier (for oracles and benchmarks only)."""
        return sylvester(self.n)[: self.c] * self.row_scale


def hadamard_logits(geom, x_hat, alpha, b, backend=None):
    """``alpha * Hhat @ x_hat / sqrt(n) + b`` via one FWHT, never forming ``H``.

    ``x_hat`` is 1-D of length ``n`` or 2-D with one sample per row.
    """
    x_hat = np.asarray(x_hat, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if x_hat.shape[-1] != geom.n:
        raise ValueError(f"x_hat has length {x_hat.shape[-1]}, geometry expects n={geom.n}")
    if b.shape != (geom.c,):
        raise ValueError(f"bias has shape {b.shape}, geometry expects ({geom.c},)")
    work = np.array(x_hat, order="C")
    fwht_in_place(work, backend=backend)
    return (alpha * geom.row_scale) * work[..., : geom.c] + b


def hadamard_backward(geom, g_logits, alpha, backend=None):
    """Adjoint of :func:`hadamard_logits` with respect to ``x_hat``.

    Sylvester ``H`` is symmetric, so ``Hhat.T @ g`` is the FWHT of ``g``
    zero-padded from ``c`` to ``n``.
    """
    g_logits = np.asarray(g_logits, dtype=np.float64)
    if g_logits.shape[-1] != geom.c:
        raise ValueError(f"gradient has length {g_logits.shape[-1]}, geometry expects c={geom.c}")
    work = np.zeros(g_logits.shape[:-1] + (geom.n,))
    work[..., : geom.c] = g_logits
    fwht_in_place(work, backend=backend)
    work *= alpha * geom.row_scale
    return work

"""Pure-Python (numpy) versions of the compiled kernels.

Same signatures and the same summation order as ``_kernels.pyx`` so the two
backends agree bit for bit.
"""

import numpy as np


def fwht_rows(x):
    """In-place unnormalized Walsh-Hadamard transform of every row of ``x``."""
    rows, n = x.shape
    h = 1
    while h < n:
        # view each row as blocks of (pair, h): butterflies between the halves
        v = x.reshape(rows, n // (2 * h), 2, h)
        a = v[:, :, 0, :].copy()
        b = v[:, :, 1, :]
        v[:, :, 0, :] += b
        np.subtract(a, b, out=v[:, :, 1, :])
        h *= 2


def gemv(m, x, out):
    out[:] = 0.0
    for j in range(m.shape[1]):
        out += m[:, j] * x[j]


def gemv_transposed(m, g, out):
    out[:] = 0.0
    for i in range(m.shape[0]):
        out += m[i, :] * g[i]

"""Fixed random classifier matrices.

``random_orthonormal`` gives ``C <= N`` mutually orthogonal unit columns;
``unit_rows`` gives independent unit columns and also covers ``C > N``.
"""

import struct
import warnings
from dataclasses import dataclass

import numpy as np

from fixhead.numerics import Rng

STRICT = 0
UNIT_ROWS = 1
MODE_NAMES = {STRICT: "strict-orthonormal", UNIT_ROWS: "unit-rows"}

MAGIC = b"FIXQ"
_HEADER = struct.Struct("<4sIII")

BREAKDOWN_NORM = 1e-8
MAX_REDRAWS = 16


class ProjectionError(ValueError):
    pass


@dataclass(frozen=True)
class FixedProjection:
    q: np.ndarray  # (n_features, n_classes), columns are class directions
    n_features: int
    n_classes: int
    seed: int
    mode: int

    def __post_init__(self):
        self.q.setflags(write=False)


def _pin_sign(col):
    nz = np.flatnonzero(col)
    if nz.size and col[nz[0]] < 0:
        col *= -1.0


def _orthogonalize(v, basis):
    # modified Gram-Schmidt: subtract one projection at a time, two sweeps
    for _ in range(2):
        for q in basis:
            v -= np.dot(q, v) * q
    return v


def random_orthonormal(n_features, n_classes, seed):
    """Orthonormal columns from modified Gram-Schmidt over Gaussian draws.

    Column ``k`` is drawn from the seeded stream, orthogonalized against the
    accepted columns, and redrawn (up to ``MAX_REDRAWS`` times) if its residual
    norm falls below ``BREAKDOWN_NORM``. Each column's first nonzero entry is
    made positive.
    """
    if n_features < 1 or n_classes < 1:
        raise ProjectionError(f"sizes must be positive, got N={n_features}, C={n_classes}")
    if n_classes > n_features:
        raise ProjectionError(
            f"cannot fit {n_classes} orthonormal columns in dimension {n_features}; "
            "use unit_rows() for the C > N regime"
        )
    rng = Rng(seed)
    a = rng.normal(n_features * n_classes).reshape(n_classes, n_features)
    basis = []
    for k in range(n_classes):
        v = _orthogonalize(a[k].copy(), basis)
        norm = np.sqrt(np.dot(v, v))
        redraws = 0
        while norm < BREAKDOWN_NORM:
            if redraws == MAX_REDRAWS:
                raise ProjectionError(
                    f"Gram-Schmidt breakdown at column {k} after {MAX_REDRAWS} redraws"
                )
            v = _orthogonalize(rng.normal(n_features), basis)
            norm = np.sqrt(np.dot(v, v))
            redraws += 1
        v /= norm
        _pin_sign(v)
        basis.append(v)
    q = np.ascontiguousarray(np.array(basis).T)
    return FixedProjection(q, n_features, n_classes, int(seed), STRICT)


def unit_rows(n_features, n_classes, seed):
    """Independent normalized Gaussian columns; orthogonality is not enforced."""
    if n_features < 1 or n_classes < 1:
        raise ProjectionError(f"sizes must be positive, got N={n_features}, C={n_classes}")
    if n_classes <= n_features:
        warnings.warn(
            f"C={n_classes} <= N={n_features}: random_orthonormal() gives strictly orthogonal columns",
            stacklevel=2,
        )
    return _unit_rows(n_features, n_classes, seed)


def _unit_rows(n_features, n_classes, seed):
    a = Rng(seed).normal(n_features * n_classes).reshape(n_classes, n_features)
    a /= np.sqrt(np.einsum("ij,ij->i", a, a))[:, None]
    for col in a:
        _pin_sign(col)
    return FixedProjection(np.ascontiguousarray(a.T), n_features, n_classes, int(seed), UNIT_ROWS)


def make_projection(n_features, n_classes, seed):
    """Strict mode when it fits, unit-rows mode otherwise (no warning)."""
    if n_classes <= n_features:
        return random_orthonormal(n_features, n_classes, seed)
    return _unit_rows(n_features, n_classes, seed)


def save_projection(proj, path):
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, proj.n_features, proj.n_classes, proj.mode))
        f.write(np.ascontiguousarray(proj.q, dtype="<f8").tobytes())


def load_projection(path, seed=0):
    """Read a projection file. The file does not carry the seed; pass it if known."""
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < _HEADER.size:
        raise ProjectionError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, n, c, mode = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ProjectionError(f"{path}: bad magic {magic!r}")
    if mode not in MODE_NAMES:
        raise ProjectionError(f"{path}: unknown mode {mode}")
    expected = _HEADER.size + 8 * n * c
    if len(raw) != expected:
        raise ProjectionError(f"{path}: expected {expected} bytes, found {len(raw)}")
    q = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).astype(np.float64).reshape(n, c)
    return FixedProjection(q, n, c, seed, mode)

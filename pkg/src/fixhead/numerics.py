"""Dense linear algebra helpers and the seeded random source.

Matrices and vectors are plain C-contiguous ``float64`` numpy arrays. The
matrix-vector products run through the kernel backend and accumulate in a
fixed left-to-right order, so they match a scalar triple loop bit for bit.
"""

import math

import numpy as np

from fixhead import _backend

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_TWO_PI = 2.0 * math.pi


def as_matrix(m):
    m = np.ascontiguousarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {m.shape}")
    return m


def as_vector(x):
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {x.shape}")
    return x


def gemv(m, x, backend=None):
    """``m @ x`` with left-to-right accumulation along each row."""
    m, x = as_matrix(m), as_vector(x)
    if m.shape[1] != x.shape[0]:
        raise ValueError(f"gemv shape mismatch: matrix {m.shape} vs vector ({x.shape[0]},)")
    out = np.empty(m.shape[0])
    _backend.get(backend).gemv(m, x, out)
    return out


def gemv_transposed(m, g, backend=None):
    """``m.T @ g`` with left-to-right accumulation over the rows of ``m``."""
    m, g = as_matrix(m), as_vector(g)
    if m.shape[0] != g.shape[0]:
        raise ValueError(
            f"gemv_transposed shape mismatch: matrix {m.shape} vs vector ({g.shape[0]},)"
        )
    out = np.empty(m.shape[1])
    _backend.get(backend).gemv_transposed(m, g, out)
    return out


def l2_norm(x):
    x = np.asarray(x, dtype=np.float64)
    return float(math.sqrt(float(np.dot(x, x))))


def _mix(z):
    # splitmix64 finalizer, vectorized over uint64 arrays (wraps mod 2**64)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


def mix64(value):
    """Scalar splitmix64 finalizer on a Python int."""
    z = (value + _GAMMA) & _MASK
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


def derive_seed(seed, *tags):
    """Hash a seed together with integer tags into a new 64-bit seed."""
    h = mix64(seed & _MASK)
    for tag in tags:
        h = mix64(h ^ (tag & _MASK))
    return h


class Rng:
    """Counter-based splitmix64 generator.

    Output ``k`` (0-based) for seed ``s`` is ``mix(s + (k + 1) * GAMMA)``
    modulo 2**64, which makes block generation vectorizable and the stream
    identical on every platform. Not thread-safe: one instance per thread.
    """

    def __init__(self, seed):
        self.seed = int(seed) & _MASK
        self.counter = 0

    def next_u64(self, n):
        k = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            states = np.uint64(self.seed) + k * np.uint64(_GAMMA)
            return _mix(states)

    def uniform(self, n):
        """``n`` doubles in (0, 1], 53-bit resolution."""
        bits = self.next_u64(n) >> np.uint64(11)
        return (bits.astype(np.float64) + 1.0) * (1.0 / 9007199254740992.0)

    def normal(self, n):
        """``n`` standard normal draws by Box-Muller over consecutive uniform pairs.

        Both outputs of each pair are used; for odd ``n`` the last sine output
        is dropped, so the stream always advances by ``2 * ceil(n / 2)``.
        """
        if n <= 0:
            raise ValueError(f"n must be positive, got {n}")
        pairs = (n + 1) // 2
        u = self.uniform(2 * pairs).reshape(pairs, 2)
        r = np.sqrt(-2.0 * np.log(u[:, 0]))
        theta = _TWO_PI * u[:, 1]
        out = np.empty((pairs, 2))
        out[:, 0] = r * np.cos(theta)
        out[:, 1] = r * np.sin(theta)
        return out.reshape(-1)[:n]

    def below(self, bound):
        """Uniform integer in ``[0, bound)`` by 64x64 multiply-high."""
        u = int(self.next_u64(1)[0])
        return (u * bound) >> 64

    def permutation(self, n):
        """Fisher-Yates shuffle of ``range(n)``."""
        perm = np.arange(n)
        if n < 2:
            return perm
        draws = [int(u) for u in self.next_u64(n - 1)]
        for step, i in enumerate(range(n - 1, 0, -1)):
            j = (draws[step] * (i + 1)) >> 64
            perm[i], perm[j] = perm[j], perm[i]
        return perm


def rng_normal(rng, n):
    return rng.normal(n)

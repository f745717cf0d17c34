"""Compiled kernels against the numpy fallback: results must be bit-identical."""

import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fixhead import _backend, _fallback
from fixhead import hadamard as hd
from fixhead import numerics

compiled = pytest.mark.skipif("compiled" not in _backend.BACKENDS,
                              reason="compiled extension not built")


def test_fallback_always_available():
    assert _backend.get("python") is _fallback
    assert _backend.BACKEND in _backend.BACKENDS


def test_unknown_backend():
    with pytest.raises(ValueError, match="not available"):
        _backend.get("fortran")


def test_env_forces_fallback():
    code = "import fixhead; print(fixhead.BACKEND)"
    env = dict(os.environ, FIXHEAD_PURE="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "python"


@compiled
@settings(max_examples=40, deadline=None)
@given(k=st.integers(0, 10), rows=st.integers(1, 4), seed=st.integers(0, 2**32))
def test_fwht_bit_exact(k, rows, seed):
    x = np.random.default_rng(seed).standard_normal((rows, 1 << k))
    a, b = x.copy(), x.copy()
    hd.fwht_in_place(a, backend="python")
    hd.fwht_in_place(b, backend="compiled")
    np.testing.assert_array_equal(a, b)


@compiled
@settings(max_examples=40, deadline=None)
@given(r=st.integers(1, 40), c=st.integers(1, 40), seed=st.integers(0, 2**32))
def test_gemv_bit_exact(r, c, seed):
    g = np.random.default_rng(seed)
    m, x, y = g.standard_normal((r, c)), g.standard_normal(c), g.standard_normal(r)
    np.testing.assert_array_equal(numerics.gemv(m, x, "python"), numerics.gemv(m, x, "compiled"))
    np.testing.assert_array_equal(numerics.gemv_transposed(m, y, "python"),
                                  numerics.gemv_transposed(m, y, "compiled"))


@compiled
def test_hadamard_logits_bit_exact(rng):
    geom = hd.HadamardHeadGeometry(256, 100)
    x = rng.standard_normal((5, 256))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    b = rng.standard_normal(100)
    np.testing.assert_array_equal(hd.hadamard_logits(geom, x, 2.0, b, backend="python"),
                                  hd.hadamard_logits(geom, x, 2.0, b, backend="compiled"))

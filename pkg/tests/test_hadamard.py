import tracemalloc

import numpy as np
import pytest

from fixhead import hadamard as hd
from fixhead.numerics import gemv


def test_sylvester_small():
    np.testing.assert_array_equal(hd.sylvester(1), [[1.0]])
    np.testing.assert_array_equal(hd.sylvester(2), [[1, 1], [1, -1]])
    h4 = hd.sylvester(4)
    np.testing.assert_array_equal(h4, [[1, 1, 1, 1], [1, -1, 1, -1], [1, 1, -1, -1], [1, -1, -1, 1]])
    np.testing.assert_array_equal(h4 @ h4.T, 4 * np.eye(4))


@pytest.mark.parametrize("n", [3, 6, 12, 0])
def test_sylvester_rejects_non_power_of_two(n):
    with pytest.raises(ValueError):
        hd.sylvester(n)


@pytest.mark.parametrize("n", [1, 2, 8, 64, 256])
def test_sylvester_orthogonal_and_symmetric(n):
    h = hd.sylvester(n)
    assert set(np.unique(h)) <= {-1.0, 1.0}
    np.testing.assert_array_equal(h @ h.T, n * np.eye(n))
    np.testing.assert_array_equal(h, h.T)


def test_fwht_examples(backend):
    np.testing.assert_array_equal(hd.fwht(np.array([1.0, 0, 0, 0]), backend), [1, 1, 1, 1])
    np.testing.assert_array_equal(hd.fwht(np.array([1.0, 1, 1, 1]), backend), [4, 0, 0, 0])


def test_fwht_rejects_bad_input():
    with pytest.raises(ValueError):
        hd.fwht(np.ones(6))
    with pytest.raises(TypeError):
        hd.fwht_in_place(np.ones(8)[::2].copy().astype(np.float32))
    with pytest.raises(TypeError):
        hd.fwht_in_place(np.ones(16)[::2])


def test_fwht_in_place_mutates(rng):
    x = rng.standard_normal(16)
    y = x.copy()
    out = hd.fwht_in_place(x)
    assert out is x
    assert not np.array_equal(x, y)


@pytest.mark.parametrize("n", [2 ** k for k in range(11)])
def test_fwht_matches_dense(n, rng, backend):
    h = hd.sylvester(n)
    for _ in range(10):
        x = rng.standard_normal(n)
        fast = hd.fwht(x, backend)
        dense = gemv(h, x)
        np.testing.assert_allclose(fast, dense, rtol=1e-12, atol=1e-12 * np.abs(dense).max())


def test_fwht_involution(rng, backend):
    x = rng.standard_normal(64)
    np.testing.assert_allclose(hd.fwht(hd.fwht(x, backend), backend), 64 * x, rtol=1e-12)


def test_fwht_batch_rows(rng, backend):
    x = rng.standard_normal((5, 32))
    batched = hd.fwht(x, backend)
    for row, out in zip(x, batched):
        np.testing.assert_array_equal(hd.fwht(row, backend), out)


def test_geometry_invariants():
    g = hd.HadamardHeadGeometry(256, 10)
    assert g.row_scale ** 2 * g.n == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(ValueError):
        hd.HadamardHeadGeometry(12, 3)
    with pytest.raises(ValueError):
        hd.HadamardHeadGeometry(4, 5)


@pytest.mark.parametrize("n", [4, 32, 256])
def test_normalized_rows_orthonormal(n):
    q = hd.HadamardHeadGeometry(n, n).dense()
    np.testing.assert_allclose(q @ q.T, np.eye(n), atol=1e-12)


def test_logits_examples():
    g = hd.HadamardHeadGeometry(4, 2)
    e0 = np.array([1.0, 0, 0, 0])
    np.testing.assert_allclose(hd.hadamard_logits(g, e0, 1.0, np.zeros(2)), [0.5, 0.5])
    np.testing.assert_allclose(hd.hadamard_logits(g, e0, 1.0, np.array([1.0, -1.0])), [1.5, -0.5])


@pytest.mark.parametrize("n,c", [(4, 2), (16, 10), (64, 64), (128, 3)])
def test_logits_match_dense(n, c, rng, backend):
    g = hd.HadamardHeadGeometry(n, c)
    for _ in range(5):
        x = rng.standard_normal(n)
        x /= np.linalg.norm(x)
        alpha = rng.uniform(0.1, 20)
        b = rng.standard_normal(c)
        dense = alpha * (hd.sylvester(n)[:c] / np.sqrt(n)) @ x + b
        np.testing.assert_allclose(hd.hadamard_logits(g, x, alpha, b, backend), dense,
                                   rtol=1e-12, atol=1e-12)


def test_logits_dimension_errors():
    g = hd.HadamardHeadGeometry(8, 3)
    with pytest.raises(ValueError):
        hd.hadamard_logits(g, np.ones(4), 1.0, np.zeros(3))
    with pytest.raises(ValueError):
        hd.hadamard_logits(g, np.ones(8), 1.0, np.zeros(2))
    with pytest.raises(ValueError):
        hd.hadamard_backward(g, np.ones(8), 1.0)


def test_backward_example():
    g = hd.HadamardHeadGeometry(4, 2)
    np.testing.assert_allclose(hd.hadamard_backward(g, np.array([1.0, 0.0]), 1.0), 0.5 * np.ones(4))


@pytest.mark.parametrize("n,c", [(4, 2), (32, 7), (256, 256)])
def test_backward_matches_dense_adjoint(n, c, rng, backend):
    g = hd.HadamardHeadGeometry(n, c)
    grad = rng.standard_normal(c)
    alpha = 3.5
    dense = alpha * (hd.sylvester(n)[:c] / np.sqrt(n)).T @ grad
    np.testing.assert_allclose(hd.hadamard_backward(g, grad, alpha, backend), dense,
                               rtol=1e-12, atol=1e-12)


def test_backward_finite_differences(rng):
    n, c, alpha = 16, 5, 2.0
    g = hd.HadamardHeadGeometry(n, c)
    b = rng.standard_normal(c)
    w = rng.standard_normal(c)  # loss = w . logits
    x = rng.standard_normal(n)
    analytic = hd.hadamard_backward(g, w, alpha)
    numeric = np.zeros(n)
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1e-6
        numeric[i] = (w @ hd.hadamard_logits(g, x + e, alpha, b)
                      - w @ hd.hadamard_logits(g, x - e, alpha, b)) / 2e-6
    err = np.abs(analytic - numeric) / np.maximum(np.abs(analytic), 1e-4)
    assert err.max() < 1e-6


def test_logits_never_allocate_full_matrix():
    n, c = 1024, 1024
    g = hd.HadamardHeadGeometry(n, c)
    x = np.ones(n) / np.sqrt(n)
    b = np.zeros(c)
    hd.hadamard_logits(g, x, 1.0, b)
    tracemalloc.start()
    hd.hadamard_logits(g, x, 1.0, b)
    hd.hadamard_backward(g, b, 1.0)
    _, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    # a dense n x n float64 matrix would be 8 MiB; O(n) work is a few vectors
    assert peak < 16 * 8 * n


def test_next_power_of_two():
    assert [hd.next_power_of_two(k) for k in (1, 2, 3, 5, 64, 65)] == [1, 2, 4, 8, 64, 128]

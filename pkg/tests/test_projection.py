import warnings

import numpy as np
import pytest

from fixhead import projection as pj


def gram_error(q):
    return np.abs(q.T @ q - np.eye(q.shape[1])).max()


def test_one_dimensional():
    p = pj.random_orthonormal(1, 1, seed=3)
    assert p.q.shape == (1, 1)
    assert abs(p.q[0, 0]) == 1.0


def test_gram_identity_8x4():
    p = pj.random_orthonormal(8, 4, seed=7)
    assert p.q.shape == (8, 4)
    assert gram_error(p.q) < 1e-10


def test_deterministic_per_seed():
    a = pj.random_orthonormal(16, 5, seed=11)
    b = pj.random_orthonormal(16, 5, seed=11)
    c = pj.random_orthonormal(16, 5, seed=12)
    np.testing.assert_array_equal(a.q, b.q)
    assert not np.array_equal(a.q, c.q)


def test_sign_pinned_first_nonzero_positive():
    q = pj.random_orthonormal(12, 12, seed=1).q
    for col in q.T:
        assert col[np.flatnonzero(col)[0]] > 0


def test_rejects_c_greater_than_n():
    with pytest.raises(pj.ProjectionError, match="unit_rows"):
        pj.random_orthonormal(4, 5, seed=0)


def test_immutable():
    p = pj.random_orthonormal(4, 2, seed=0)
    with pytest.raises(ValueError):
        p.q[0, 0] = 2.0


@pytest.mark.parametrize("n,c", [(2, 2), (10, 3), (64, 64), (100, 37), (300, 299)])
def test_strict_mode_orthonormal(n, c):
    assert gram_error(pj.random_orthonormal(n, c, seed=n * 1000 + c).q) < 1e-10


def test_breakdown_redraw(monkeypatch):
    # force every first attempt into the span of the accepted basis
    calls = {"n": 0}
    orig = pj._orthogonalize

    def flaky(v, basis):
        calls["n"] += 1
        out = orig(v, basis)
        if basis and calls["n"] % 2 == 1:
            out[:] = 0.0
        return out

    monkeypatch.setattr(pj, "_orthogonalize", flaky)
    p = pj.random_orthonormal(6, 4, seed=2)
    assert gram_error(p.q) < 1e-10


def test_breakdown_gives_up(monkeypatch):
    monkeypatch.setattr(pj, "_orthogonalize", lambda v, basis: v * 0.0 if basis else v)
    with pytest.raises(pj.ProjectionError, match="breakdown"):
        pj.random_orthonormal(6, 3, seed=2)


def test_unit_rows_norms():
    p = pj.unit_rows(16, 40, seed=5)
    assert p.q.shape == (16, 40)
    np.testing.assert_allclose(np.linalg.norm(p.q, axis=0), 1.0, atol=1e-12)
    assert p.mode == pj.UNIT_ROWS


def test_unit_rows_coherence_concentrates():
    n = 64
    q = pj.unit_rows(n, 128, seed=9).q
    g = np.abs(q.T @ q)
    off = g[~np.eye(128, dtype=bool)]
    assert off.mean() < 3 / np.sqrt(n)
    # mean |q_i.q_j| for random unit vectors is about sqrt(2 / (pi n))
    assert off.mean() == pytest.approx(np.sqrt(2 / (np.pi * n)), rel=0.15)


def test_unit_rows_warns_when_strict_is_available():
    with pytest.warns(UserWarning, match="random_orthonormal"):
        pj.unit_rows(8, 4, seed=0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        pj.unit_rows(4, 8, seed=0)


def test_unit_rows_deterministic():
    np.testing.assert_array_equal(pj.unit_rows(5, 9, 3).q, pj.unit_rows(5, 9, 3).q)


@pytest.mark.parametrize("maker,n,c", [(pj.random_orthonormal, 6, 4), (pj._unit_rows, 3, 7)])
def test_file_round_trip(tmp_path, maker, n, c):
    p = maker(n, c, 21)
    path = tmp_path / "q.fixq"
    pj.save_projection(p, path)
    raw = path.read_bytes()
    assert raw[:4] == b"FIXQ" and len(raw) == 16 + 8 * n * c
    back = pj.load_projection(path, seed=21)
    np.testing.assert_array_equal(back.q, p.q)
    assert (back.n_features, back.n_classes, back.mode) == (n, c, p.mode)


def test_file_errors(tmp_path):
    path = tmp_path / "bad.fixq"
    path.write_bytes(b"NOPE" + bytes(12))
    with pytest.raises(pj.ProjectionError, match="magic"):
        pj.load_projection(path)
    pj.save_projection(pj.random_orthonormal(4, 2, 0), path)
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(pj.ProjectionError, match="bytes"):
        pj.load_projection(path)

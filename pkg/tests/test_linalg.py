import numpy as np
import pytest

from etlinks.linalg import jacobi_eigh, jacobi_svd, round_robin


@pytest.mark.parametrize("n", [1, 2, 3, 6, 7])
def test_round_robin_covers_each_pair_once(n):
    pairs = [(int(p), int(q)) for ps, qs in round_robin(n) for p, q in zip(ps, qs)]
    assert sorted(pairs) == [(i, j) for i in range(n) for j in range(i + 1, n)]
    for ps, qs in round_robin(n):
        touched = list(ps) + list(qs)
        assert len(touched) == len(set(touched))


@pytest.mark.parametrize("shape", [(1, 1), (3, 3), (7, 4), (4, 7), (30, 30)])
def test_svd_against_lapack(rng, shape):
    a = rng.standard_normal(shape)
    u, s, vt = jacobi_svd(a)
    np.testing.assert_allclose(s, np.linalg.svd(a, compute_uv=False), atol=1e-12)
    np.testing.assert_allclose(u @ np.diag(s) @ vt, a, atol=1e-12)
    np.testing.assert_allclose(u.T @ u, np.eye(u.shape[1]), atol=1e-12)
    np.testing.assert_allclose(vt @ vt.T, np.eye(vt.shape[0]), atol=1e-12)


def test_svd_rank_deficient_still_orthonormal(rng):
    a = rng.standard_normal((6, 2)) @ rng.standard_normal((2, 6))
    u, s, vt = jacobi_svd(a)
    assert np.all(s[2:] < 1e-12)
    np.testing.assert_allclose(u.T @ u, np.eye(6), atol=1e-10)
    np.testing.assert_allclose(u @ np.diag(s) @ vt, a, atol=1e-12)


def test_svd_zero_matrix():
    u, s, vt = jacobi_svd(np.zeros((3, 3)))
    assert np.all(s == 0)
    np.testing.assert_allclose(u.T @ u, np.eye(3))


@pytest.mark.parametrize("d", [1, 2, 5, 17])
def test_eigh_against_lapack(rng, d):
    m = rng.standard_normal((d, d))
    c = m @ m.T
    w, v = jacobi_eigh(c)
    np.testing.assert_allclose(w, np.linalg.eigvalsh(c)[::-1], atol=1e-11)
    np.testing.assert_allclose(v @ np.diag(w) @ v.T, c, atol=1e-11)
    np.testing.assert_allclose(v.T @ v, np.eye(d), atol=1e-12)


def test_eigh_two_by_two_closed_form():
    a, b, c = 3.0, 1.0, 2.0
    w, v = jacobi_eigh(np.array([[a, b], [b, c]]))
    mid, rad = (a + c) / 2, np.hypot((a - c) / 2, b)
    np.testing.assert_allclose(w, [mid + rad, mid - rad], atol=1e-14)
    theta = 0.5 * np.arctan2(2 * b, a - c)
    top = np.array([np.cos(theta), np.sin(theta)])
    assert abs(abs(top @ v[:, 0]) - 1) < 1e-14


@pytest.mark.parametrize("n, d", [(16, 50), (40, 50), (33, 100), (99, 100)])
def test_svd_numerically_rank_deficient_cross_product(rng, n, d):
    # X^T Y with n < d has d - n singular values at rounding level
    a = rng.standard_normal((n, d)).T @ rng.standard_normal((n, d))
    u, s, vt = jacobi_svd(a)
    assert np.abs(u.T @ u - np.eye(d)).max() < 1e-12
    assert np.abs(vt @ vt.T - np.eye(d)).max() < 1e-12
    assert np.abs(u @ np.diag(s) @ vt - a).max() < 1e-10 * np.abs(a).max()

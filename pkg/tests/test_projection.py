import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from etlinks.errors import DimensionError, InputError
from etlinks.projection import MapLayout, export_layout_csv, fit_pca, transform

from conftest import random_orthogonal


def test_collinear_closed_form():
    pts = np.array([[1, 1], [-1, -1], [2, 2], [-2, -2]], dtype=float)
    p = fit_pca(pts)
    np.testing.assert_allclose(p.components[0], [1 / np.sqrt(2), 1 / np.sqrt(2)], atol=1e-12)
    assert p.explained_variance[1] == pytest.approx(0.0, abs=1e-12)
    assert p.explained_variance[0] == pytest.approx(20 / 3, abs=1e-12)
    layout = transform(p, list("abcd"), pts)
    assert np.all(np.abs(layout.points[:, 1]) <= 1e-9)


def test_axis_aligned():
    pts = np.full((5, 3), 7.0)
    pts[:, 0] = [1, 2, 3, 4, 10]
    p = fit_pca(pts)
    np.testing.assert_allclose(p.components[0], [1, 0, 0], atol=1e-12)
    assert p.explained_variance[1] == 0.0


def test_mean_maps_to_origin(rng):
    x = rng.standard_normal((10, 4))
    p = fit_pca(x)
    assert transform(p, ["m"], [p.mean]).points.tolist() == [[0.0, 0.0]]


def test_errors(rng):
    with pytest.raises(InputError):
        fit_pca(rng.standard_normal((2, 4)))
    with pytest.raises(InputError):
        fit_pca(rng.standard_normal((5, 1)))
    with pytest.raises(InputError):
        fit_pca(np.ones((5, 3)))
    p = fit_pca(rng.standard_normal((5, 3)))
    with pytest.raises(DimensionError):
        transform(p, ["a"], [[1.0, 2.0]])


def covariance_oracle(x):
    """Independent route: numpy's LAPACK symmetric eigensolver on np.cov."""
    w, v = np.linalg.eigh(np.cov(x, rowvar=False))
    return w[::-1], v[:, ::-1]


@pytest.mark.parametrize("d", [2, 5])
def test_components_match_oracle(rng, d):
    for _ in range(20):
        x = rng.standard_normal((40, d)) @ rng.standard_normal((d, d))
        p = fit_pca(x)
        w, v = covariance_oracle(x)
        np.testing.assert_allclose(p.explained_variance, w[:2], atol=1e-8)
        for comp, ref in zip(p.components, v[:, :2].T):
            ref = ref * np.sign(ref[np.argmax(np.abs(ref))])
            np.testing.assert_allclose(comp, ref, atol=1e-8)


def test_two_by_two_closed_form(rng):
    x = rng.standard_normal((50, 2)) * [3.0, 1.0]
    (a, b), (_, c) = np.cov(x, rowvar=False)
    theta = 0.5 * np.arctan2(2 * b, a - c)
    top = np.array([np.cos(theta), np.sin(theta)])
    top *= np.sign(top[np.argmax(np.abs(top))])
    p = fit_pca(x)
    np.testing.assert_allclose(p.components[0], top, atol=1e-8)


def test_variance_of_scores_equals_explained(rng):
    x = rng.standard_normal((60, 7)) @ rng.standard_normal((7, 7))
    p = fit_pca(x)
    scores = transform(p, [str(i) for i in range(60)], x).points
    np.testing.assert_allclose(scores.var(axis=0, ddof=1), p.explained_variance, atol=1e-8)


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 40), st.integers(2, 9), st.integers(0, 2**32 - 1))
def test_invariants(n, d, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, d)) * rng.uniform(0.5, 3, d)
    p = fit_pca(x)
    np.testing.assert_allclose(p.components @ p.components.T, np.eye(2), atol=1e-9)
    assert p.explained_variance[0] >= p.explained_variance[1] >= 0
    q = random_orthogonal(rng, d)
    ids = [str(i) for i in range(n)]
    a = transform(p, ids, x).points
    b = transform(fit_pca(x @ q), ids, x @ q).points
    dist = lambda v: np.linalg.norm(v[:, None] - v[None], axis=-1)
    w = np.linalg.eigvalsh(np.cov(x, rowvar=False))[::-1]
    if d > 2 and (w[1] - w[2]) < 1e-6 * w[0] or (w[0] - w[1]) < 1e-6 * w[0]:
        return  # near-degenerate spectrum: the plane itself is not identified
    assert np.max(np.abs(dist(a) - dist(b))) <= 1e-8


def test_deterministic_bytes(rng):
    x = rng.standard_normal((30, 6))
    a = transform(fit_pca(x), [str(i) for i in range(30)], x)
    b = transform(fit_pca(x.copy()), [str(i) for i in range(30)], x.copy())
    assert a.points.tobytes() == b.points.tobytes()


def test_layout_export():
    layout = MapLayout(("t1", "Acme"), np.array([[0.5, -1.0], [2.0, 3.0]]))
    text = export_layout_csv(layout, {"t1": "technology", "Acme": "company"}, {"t1": 0, "Acme": 1}, {"Acme": 12.5})
    assert text.decode().splitlines() == ["entity_id,kind,x,y,cluster,rnd_meur", "t1,technology,0.5,-1,0,",
                                          "Acme,company,2,3,1,12.5"]
    assert layout.extents == (0.5, -1.0, 2.0, 3.0)

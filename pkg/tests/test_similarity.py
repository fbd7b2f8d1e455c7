import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from etlinks.errors import DimensionError, InputError
from etlinks.similarity import (COMPANY_TO_TECHS, TECH_TO_COMPANIES, SimilarityMatrix, cosine_similarity,
                                cross_similarity, export_matrix_csv, load_matrix_csv, top_k)

from conftest import unit_rows


def test_cosine_closed_forms():
    assert cosine_similarity([1, 0], [1, 0]) == 1.0
    assert cosine_similarity([1, 0], [0, 1]) == 0.0
    assert cosine_similarity([1, 1], [1, 0]) == pytest.approx(1 / np.sqrt(2), abs=1e-8)
    assert cosine_similarity([2, 0], [-3, 0]) == -1.0


def test_cosine_errors():
    with pytest.raises(InputError):
        cosine_similarity([0, 0], [1, 0])
    with pytest.raises(DimensionError):
        cosine_similarity([1, 0], [1, 0, 0])


def test_single_pair():
    m = cross_similarity(["t"], [[0.6, 0.8]], ["c"], [[0.6, 0.8]])
    assert m.values.tolist() == [[1.0]]


def test_planar_angles():
    angle = lambda a: [np.cos(np.deg2rad(a)), np.sin(np.deg2rad(a))]
    m = cross_similarity(["t0", "t1"], [angle(0), angle(60)], ["c0", "c1"], [angle(30), angle(135)])
    expected = np.cos(np.deg2rad([[30, 135], [30, 75]]))
    np.testing.assert_allclose(m.values, expected, atol=1e-15)


def test_matrix_equals_scalar_oracle(rng):
    t, c = rng.standard_normal((7, 5)), rng.standard_normal((9, 5))
    m = cross_similarity([f"t{i}" for i in range(7)], t, [f"c{j}" for j in range(9)], c)
    for i in range(7):
        for j in range(9):
            assert abs(m.values[i, j] - cosine_similarity(t[i], c[j])) <= 1e-15


def test_swapped_roles_transpose(rng):
    t, c = unit_rows(rng, 6, 4), unit_rows(rng, 8, 4)
    a = cross_similarity(list("abcdef"), t, list("ABCDEFGH"), c)
    b = cross_similarity(list("ABCDEFGH"), c, list("abcdef"), t)
    assert np.max(np.abs(a.values.T - b.values)) <= 1e-12


def test_empty_side_rejected():
    with pytest.raises(InputError):
        cross_similarity([], np.empty((0, 2)), ["c"], [[1.0, 0.0]])


def test_top1_for_identical_vector(rng):
    t = unit_rows(rng, 5, 6)
    c = np.vstack([unit_rows(rng, 4, 6), t[2]])
    m = cross_similarity([f"t{i}" for i in range(5)], t, [f"c{j}" for j in range(5)], c)
    (cid, s), = top_k(m, "t2", TECH_TO_COMPANIES, 1).neighbors
    assert cid == "c4" and s == pytest.approx(1.0, abs=1e-15)


def test_ties_break_by_id():
    m = SimilarityMatrix(("t",), ("b", "a", "c"), np.array([[0.5, 0.5, 0.9]]))
    assert top_k(m, "t", TECH_TO_COMPANIES, 3).ids == ["c", "a", "b"]


def test_k_larger_than_axis_and_unknown_query():
    m = SimilarityMatrix(("t1", "t2"), ("c",), np.array([[0.1], [0.2]]))
    assert top_k(m, "c", COMPANY_TO_TECHS, 10).ids == ["t2", "t1"]
    with pytest.raises(KeyError):
        top_k(m, "zz", COMPANY_TO_TECHS, 1)
    with pytest.raises(KeyError):
        top_k(m, "c", TECH_TO_COMPANIES, 1)


def naive_top(ids, sims, k):
    pairs = sorted(zip(ids, sims), key=lambda p: (-p[1], p[0]))
    return pairs[:k]


@st.composite
def matrices(draw):
    nt, nc = draw(st.integers(1, 12)), draw(st.integers(1, 12))
    levels = draw(st.integers(2, 6))  # few distinct values => many ties
    rng = np.random.default_rng(draw(st.integers(0, 2**32 - 1)))
    values = rng.integers(-levels, levels + 1, size=(nt, nc)) / levels
    rows = tuple(draw(st.permutations([f"t{i:02d}" for i in range(nt)])))
    cols = tuple(draw(st.permutations([f"c{i:02d}" for i in range(nc)])))
    return SimilarityMatrix(rows, cols, values)


@settings(max_examples=80, deadline=None)
@given(matrices())
def test_top_k_matches_full_sort(m):
    for i, t in enumerate(m.rows):
        for k in range(1, len(m.cols) + 2):
            got = top_k(m, t, TECH_TO_COMPANIES, k).neighbors
            assert list(got) == naive_top(m.cols, m.values[i].tolist(), k)
    for j, c in enumerate(m.cols):
        got = top_k(m, c, COMPANY_TO_TECHS, len(m.rows)).neighbors
        assert list(got) == naive_top(m.rows, m.values[:, j].tolist(), len(m.rows))


def test_values_in_range(rng):
    t = rng.standard_normal((30, 3)) * 1e3
    m = cross_similarity([str(i) for i in range(30)], t, [str(i) for i in range(30)], t)
    assert np.all(np.abs(m.values) <= 1.0)


def test_spend_scaling_changes_nothing(rng):
    # spends are metadata only; similarities come from vectors alone
    from etlinks.registry import Company
    comps = [Company(i + 1, f"C{i}", f"C{i}", 100.0 * (i + 1)) for i in range(4)]
    scaled = [Company(c.rank, c.name, c.wiki_title, c.rnd_meur * 7.5) for c in comps]
    t, c = unit_rows(rng, 3, 4), unit_rows(rng, 4, 4)
    a = cross_similarity(["a", "b", "c"], t, [x.id for x in comps], c)
    b = cross_similarity(["a", "b", "c"], t, [x.id for x in scaled], c)
    np.testing.assert_array_equal(a.values, b.values)


def test_csv_export_nine_digits(rng):
    m = SimilarityMatrix(("t1",), ("Acme, Inc.", "B"), np.array([[0.123456789123, -1 / 3]]))
    text = export_matrix_csv(m).decode()
    assert text == 'tech_id,"Acme, Inc.",B\nt1,0.123456789,-0.333333333\n'
    back = load_matrix_csv(text)
    assert back.cols == m.cols and back.values[0, 0] == 0.123456789

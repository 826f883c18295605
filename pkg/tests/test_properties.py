"""Randomized property checks (hypothesis)."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from warpcone.coarse import FiniteMetricSpace
from warpcone.groups import make_group
from warpcone.measure import FiniteMeasure, prokhorov_distance, total_variation
from warpcone.spaces import Circle, Torus

GROUPS = [make_group("z", dim=1), make_group("z", dim=2), make_group("free", rank=2), make_group("cyclic", n=5)]


@st.composite
def group_and_words(draw):
    group = draw(st.sampled_from(GROUPS))
    word = st.lists(st.sampled_from(group.generators), max_size=8)
    return group, draw(word), draw(word)


@given(group_and_words())
def test_word_length_subadditive_and_symmetric(data):
    group, u, v = data
    a, b = group.canonical(u), group.canonical(v)
    assert group.length(group.multiply(a, b)) <= group.length(a) + group.length(b)
    assert group.length(group.inverse(a)) == group.length(a)
    assert group.length(a) <= len(u)
    assert group.canonical(group.word_of(a)) == a


@given(group_and_words())
def test_group_law(data):
    group, u, v = data
    a, b = group.canonical(u), group.canonical(v)
    assert group.multiply(a, group.inverse(a)) == group.identity
    assert group.multiply(group.identity, b) == b
    assert group.canonical(u + v) == group.multiply(a, b)


coords = st.floats(0, 1, allow_nan=False, exclude_max=True)


@given(st.lists(coords, min_size=3, max_size=3))
def test_circle_triangle(xs):
    S = Circle()
    p = np.array(xs).reshape(3, 1)
    D = S.pairwise(p, p)
    assert np.allclose(D, D.T)
    assert D[0, 2] <= D[0, 1] + D[1, 2] + 1e-12
    assert np.all(D <= 0.5 + 1e-12)


@given(st.lists(coords, min_size=6, max_size=6))
def test_torus_triangle(xs):
    T = Torus(2)
    p = np.array(xs).reshape(3, 2)
    D = T.pairwise(p, p)
    assert D[0, 2] <= D[0, 1] + D[1, 2] + 1e-12


@st.composite
def measure_triples(draw):
    n = draw(st.integers(2, 5))
    pts = np.array(draw(st.lists(st.floats(0, 3), min_size=n, max_size=n)))
    X = FiniteMetricSpace.from_matrix(np.abs(pts[:, None] - pts[None, :]))
    def weights():
        raw = np.array(draw(st.lists(st.integers(0, 10), min_size=n, max_size=n)), float)
        raw[0] += 1
        return raw / raw.sum()
    return [FiniteMeasure(X, weights()) for _ in range(3)]


@settings(max_examples=60, deadline=None)
@given(measure_triples())
def test_prokhorov_metric(ms):
    a, b, c = ms
    ab = prokhorov_distance(a, b)
    assert abs(ab - prokhorov_distance(b, a)) <= 1e-9
    assert prokhorov_distance(a, a) == 0
    assert prokhorov_distance(a, c) <= ab + prokhorov_distance(b, c) + 1e-9
    assert 0 <= ab <= min(1.0, total_variation(a, b)) + 1e-12

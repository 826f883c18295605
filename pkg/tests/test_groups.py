import itertools

import networkx as nx
import pytest

from warpcone.errors import InputError, ResourceLimitError
from warpcone.groups import (
    CyclicGroup,
    DirectProduct,
    FreeAbelianGroup,
    FreeGroup,
    cayley_ball_graph,
    make_group,
    word_ball,
    word_length,
)


def crosspolytope_count(d, r):
    return sum(1 for v in itertools.product(range(-r, r + 1), repeat=d) if sum(map(abs, v)) <= r)


def test_integer_ball_radius_two():
    ball = word_ball(FreeAbelianGroup(1), 2)
    assert sorted(el.key[0] for el in ball) == [-2, -1, 0, 1, 2]
    assert {el.key[0]: el.length for el in ball}[-2] == 2


def test_free_group_ball_sizes():
    F2 = FreeGroup(2)
    assert [len(word_ball(F2, r)) for r in range(4)] == [1, 5, 17, 53]


def test_z2_unit_ball():
    assert len(word_ball(FreeAbelianGroup(2), 1)) == 5


@pytest.mark.parametrize("d", [1, 2, 3])
@pytest.mark.parametrize("r", [0, 1, 3, 8])
def test_crosspolytope_counts(d, r):
    assert len(word_ball(FreeAbelianGroup(d), r)) == crosspolytope_count(d, r)


def test_ball_lengths_match_closed_form():
    F2 = FreeGroup(2)
    for el in word_ball(F2, 3):
        assert el.length == F2.length(el.key) == len(el.canonical_word)


def test_ball_cap():
    with pytest.raises(ResourceLimitError, match="cap 10"):
        word_ball(FreeGroup(2), 3, cap=10)


def test_negative_radius_rejected():
    with pytest.raises(InputError):
        word_ball(FreeAbelianGroup(1), -1)


def test_word_length_examples():
    assert word_length(FreeAbelianGroup(1), ["+1", "+1", "-1"]) == 1
    assert word_length(FreeGroup(2), ["a", "b", "a^-1"]) == 3
    assert word_length(CyclicGroup(5), ["+1"] * 7) == 2


def test_word_length_unknown_label():
    with pytest.raises(InputError):
        word_length(FreeGroup(2), ["a", "z"])


def test_canonical_is_idempotent_and_identity():
    F2 = FreeGroup(2)
    assert F2.canonical([]) == F2.identity
    w = ["a", "b", "b^-1", "a", "b"]
    key = F2.canonical(w)
    assert F2.canonical(F2.word_of(key)) == key


def test_generator_set_symmetric():
    for G in (FreeAbelianGroup(3), FreeGroup(2), CyclicGroup(7), DirectProduct([FreeAbelianGroup(1), CyclicGroup(3)])):
        for s in G.generators:
            assert G.inverse_label(s) in G.generators


def test_direct_product_lengths():
    G = DirectProduct([FreeAbelianGroup(1), FreeGroup(2)])
    assert len(word_ball(G, 1)) == 1 + 2 + 4


def test_trivial_group():
    G = make_group("trivial")
    assert len(word_ball(G, 5)) == 1


def test_make_group_rejects_presentations():
    with pytest.raises(InputError):
        make_group("presentation", relators="abAB")


def test_cayley_ball_graph_shapes():
    path = cayley_ball_graph(FreeAbelianGroup(1), 2)
    assert nx.is_isomorphic(path, nx.path_graph(5))
    star = cayley_ball_graph(FreeAbelianGroup(2), 1)
    assert nx.is_isomorphic(star, nx.star_graph(4))
    tree = cayley_ball_graph(FreeGroup(2), 2)
    assert tree.number_of_nodes() == 17 and tree.number_of_edges() == 16 and nx.is_tree(tree)


def test_cayley_graph_distance_inside_ball():
    G = FreeAbelianGroup(2)
    graph = cayley_ball_graph(G, 4)
    e = G.identity
    for el in word_ball(G, 4):
        assert nx.shortest_path_length(graph, e, el.key) == el.length

"""Finitely generated groups with a decidable canonical form.

Only the groups needed by the built-in actions are supported: free abelian
groups Z^d, free groups F_k, cyclic groups Z/n and direct products of these.
Elements are represented by hashable integer tuples ("keys"), so iteration
order over sets of elements is reproducible across processes.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import networkx as nx

from warpcone.errors import InputError, ResourceLimitError

DEFAULT_BALL_CAP = 10**6

Key = tuple


@dataclass(frozen=True)
class GroupElement:
    key: Key
    canonical_word: tuple[str, ...]
    length: int

    def __str__(self):
        return "e" if not self.canonical_word else "*".join(self.canonical_word)


class GroupSpec:
    """Base class for the built-in groups.

    Subclasses provide ``generators`` (a symmetric tuple of labels), the
    label -> key table and the group law on keys.
    """

    name: str
    generators: tuple[str, ...]

    # -- group law ---------------------------------------------------------
    @property
    def identity(self) -> Key:
        raise NotImplementedError

    def multiply(self, a: Key, b: Key) -> Key:
        raise NotImplementedError

    def inverse(self, a: Key) -> Key:
        raise NotImplementedError

    def length(self, a: Key) -> int:
        """Word length of a canonical key, in closed form."""
        raise NotImplementedError

    def word_of(self, a: Key) -> tuple[str, ...]:
        """A geodesic word spelling ``a``."""
        raise NotImplementedError

    def generator_key(self, label: str) -> Key:
        raise NotImplementedError

    # -- shared helpers ----------------------------------------------------
    def inverse_label(self, label: str) -> str:
        self._check_label(label)
        target = self.inverse(self.generator_key(label))
        for other in self.generators:
            if self.generator_key(other) == target:
                return other
        raise AssertionError(f"generator set of {self.name} is not symmetric")

    def canonical(self, word: Iterable[str]) -> Key:
        key = self.identity
        for label in word:
            self._check_label(label)
            key = self.multiply(key, self.generator_key(label))
        return key

    def element(self, key: Key) -> GroupElement:
        return GroupElement(key, self.word_of(key), self.length(key))

    def element_of_word(self, word: Iterable[str]) -> GroupElement:
        return self.element(self.canonical(word))

    @property
    def identity_element(self) -> GroupElement:
        return self.element(self.identity)

    def _check_label(self, label):
        if label not in self._label_set:
            raise InputError(f"unknown generator label {label!r} for group {self.name}")

    @property
    def _label_set(self):
        return frozenset(self.generators)

    def __repr__(self):
        return f"<{type(self).__name__} {self.name}>"


class FreeAbelianGroup(GroupSpec):
    """Z^d with generators +-e_i; keys are exponent vectors."""

    def __init__(self, dim: int = 1):
        if dim < 1:
            raise InputError("free abelian group needs dim >= 1")
        self.dim = dim
        self.name = "Z" if dim == 1 else f"Z^{dim}"
        if dim == 1:
            self._labels = {"+1": (1,), "-1": (-1,)}
        else:
            self._labels = {}
            for i in range(dim):
                unit = tuple(1 if j == i else 0 for j in range(dim))
                self._labels[f"+e{i + 1}"] = unit
                self._labels[f"-e{i + 1}"] = tuple(-c for c in unit)
        self.generators = tuple(self._labels)

    @property
    def identity(self):
        return (0,) * self.dim

    def multiply(self, a, b):
        return tuple(x + y for x, y in zip(a, b))

    def inverse(self, a):
        return tuple(-x for x in a)

    def length(self, a):
        return sum(abs(x) for x in a)

    def word_of(self, a):
        word = []
        for i, x in enumerate(a):
            if self.dim == 1:
                plus, minus = "+1", "-1"
            else:
                plus, minus = f"+e{i + 1}", f"-e{i + 1}"
            word.extend([plus if x > 0 else minus] * abs(x))
        return tuple(word)

    def generator_key(self, label):
        return self._labels[label]


class FreeGroup(GroupSpec):
    """F_k on letters a, b, c, ...; keys are freely reduced words of signed ints."""

    def __init__(self, rank: int = 2):
        if not 1 <= rank <= 26:
            raise InputError("free group rank must be in 1..26")
        self.rank = rank
        self.name = f"F_{rank}"
        self._labels = {}
        for i in range(rank):
            letter = chr(ord("a") + i)
            self._labels[letter] = (i + 1,)
            self._labels[f"{letter}^-1"] = (-(i + 1),)
        self._by_letter = {v[0]: k for k, v in self._labels.items()}
        self.generators = tuple(self._labels)

    @property
    def identity(self):
        return ()

    def multiply(self, a, b):
        out = list(a)
        for x in b:
            if out and out[-1] == -x:
                out.pop()
            else:
                out.append(x)
        return tuple(out)

    def inverse(self, a):
        return tuple(-x for x in reversed(a))

    def length(self, a):
        return len(a)

    def word_of(self, a):
        return tuple(self._by_letter[x] for x in a)

    def generator_key(self, label):
        return self._labels[label]


class CyclicGroup(GroupSpec):
    """Z/n with generators +1, -1; keys are residues. n = 1 is the trivial group."""

    def __init__(self, n: int):
        if n < 1:
            raise InputError("cyclic group order must be >= 1")
        self.n = n
        self.name = "1" if n == 1 else f"Z/{n}"
        self.generators = ("+1", "-1")

    @property
    def identity(self):
        return (0,)

    def multiply(self, a, b):
        return ((a[0] + b[0]) % self.n,)

    def inverse(self, a):
        return ((-a[0]) % self.n,)

    def length(self, a):
        r = a[0] % self.n
        return min(r, self.n - r)

    def word_of(self, a):
        r = a[0] % self.n
        if r <= self.n - r:
            return ("+1",) * r
        return ("-1",) * (self.n - r)

    def generator_key(self, label):
        return ((1 if label == "+1" else -1) % self.n,)


class DirectProduct(GroupSpec):
    """Direct product; generators are the factor generators tagged ``i:label``."""

    def __init__(self, factors: Sequence[GroupSpec]):
        if not factors:
            raise InputError("direct product needs at least one factor")
        self.factors = tuple(factors)
        self.name = " x ".join(f.name for f in self.factors)
        self.generators = tuple(
            f"{i}:{label}" for i, f in enumerate(self.factors) for label in f.generators
        )

    @property
    def identity(self):
        return tuple(f.identity for f in self.factors)

    def multiply(self, a, b):
        return tuple(f.multiply(x, y) for f, x, y in zip(self.factors, a, b))

    def inverse(self, a):
        return tuple(f.inverse(x) for f, x in zip(self.factors, a))

    def length(self, a):
        return sum(f.length(x) for f, x in zip(self.factors, a))

    def word_of(self, a):
        word = []
        for i, (f, x) in enumerate(zip(self.factors, a)):
            word.extend(f"{i}:{label}" for label in f.word_of(x))
        return tuple(word)

    def generator_key(self, label):
        i, _, inner = label.partition(":")
        i = int(i)
        key = list(self.identity)
        key[i] = self.factors[i].generator_key(inner)
        return tuple(key)


def make_group(kind: str, **params) -> GroupSpec:
    """Build a built-in group from a config-style description."""
    kind = kind.lower()
    if kind in ("integers", "abelian", "z"):
        return FreeAbelianGroup(int(params.get("dim", 1)))
    if kind == "free":
        return FreeGroup(int(params.get("rank", 2)))
    if kind == "cyclic":
        return CyclicGroup(int(params["n"]))
    if kind == "trivial":
        return CyclicGroup(1)
    raise InputError(f"unsupported group kind {kind!r} (arbitrary presentations are not supported)")


def word_ball(group: GroupSpec, r: int, cap: int = DEFAULT_BALL_CAP) -> list[GroupElement]:
    """All elements of word length <= r, in breadth-first order."""
    if r < 0:
        raise InputError("ball radius must be non-negative")
    seen = {group.identity: 0}
    order = [group.identity]
    frontier = deque([group.identity])
    gens = [group.generator_key(s) for s in group.generators]
    while frontier:
        g = frontier.popleft()
        depth = seen[g]
        if depth == r:
            continue
        for s in gens:
            h = group.multiply(g, s)
            if h in seen:
                continue
            if len(seen) >= cap:
                raise ResourceLimitError(f"word ball of radius {r} in {group.name}", cap)
            seen[h] = depth + 1
            order.append(h)
            frontier.append(h)
    return [GroupElement(k, group.word_of(k), seen[k]) for k in order]


def word_length(group: GroupSpec, word: Iterable[str]) -> int:
    return group.length(group.canonical(word))


def cayley_ball_graph(group: GroupSpec, r: int, cap: int = DEFAULT_BALL_CAP) -> nx.Graph:
    """Cayley graph induced on the ball of radius r.

    Edges join g and g*s for generators s.  Graph distance inside the ball
    agrees with the word metric for pairs g, h whose geodesic stays inside,
    which is guaranteed when |g| + |g^-1 h| <= r; near the boundary it can
    exceed the word distance.
    """
    ball = word_ball(group, r, cap)
    graph = nx.Graph()
    for el in ball:
        graph.add_node(el.key, length=el.length)
    gens = [group.generator_key(s) for s in group.generators]
    for el in ball:
        for s in gens:
            h = group.multiply(el.key, s)
            if h != el.key and h in graph:
                graph.add_edge(el.key, h)
    return graph

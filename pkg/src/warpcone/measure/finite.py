"""Finitely supported measures and the Prokhorov metric."""

from __future__ import annotations

import math
from dataclasses import dataclass

import networkx as nx
import numpy as np

from warpcone.coarse.metric import DiscreteMap, FiniteMetricSpace
from warpcone.errors import InputError

MASS_TOL = 1e-9
FLOW_ROUNDING = 1e-12  # max-flow residue below this (relative to mass) is floating-point noise


@dataclass(frozen=True, eq=False)
class FiniteMeasure:
    space: FiniteMetricSpace
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.shape != (len(self.space),):
            raise InputError("one weight per point is required")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise InputError("weights must be finite and non-negative")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    def is_probability(self) -> bool:
        return abs(self.mass - 1.0) <= MASS_TOL

    def of(self, indices) -> float:
        idx = np.asarray(sorted(set(int(i) for i in indices)), dtype=np.int64)
        return float(self.weights[idx].sum()) if len(idx) else 0.0

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("index,weight\n")
            for i, w in enumerate(self.weights):
                fh.write(f"{i},{float(w)!r}\n")


def _check_pair(nu1, nu2):
    if nu1.space is not nu2.space and (
        len(nu1.space) != len(nu2.space) or not np.array_equal(nu1.space.dist, nu2.space.dist)
    ):
        raise InputError("measures live on different spaces")
    if abs(nu1.mass - nu2.mass) > MASS_TOL:
        raise InputError(f"total masses differ ({nu1.mass} vs {nu2.mass})")


def excess(nu1: FiniteMeasure, nu2: FiniteMeasure, eta: float) -> float:
    """max over sets A of nu1(A) - nu2(A^eta), closed enlargement.

    By max-flow/min-cut this equals ``mass(nu1) - maxflow`` on the bipartite
    graph joining x to y whenever d(x, y) <= eta.
    """
    a = np.nonzero(nu1.weights > 0)[0]
    b = np.nonzero(nu2.weights > 0)[0]
    if len(a) == 0:
        return 0.0
    D = nu1.space.dist
    G = nx.DiGraph()
    for i in a:
        G.add_edge("s", ("a", int(i)), capacity=float(nu1.weights[i]))
    for j in b:
        G.add_edge(("b", int(j)), "t", capacity=float(nu2.weights[j]))
    close = D[np.ix_(a, b)] <= eta
    for p, q in zip(*np.nonzero(close)):
        G.add_edge(("a", int(a[p])), ("b", int(b[q])))
    if "t" not in G:
        return float(nu1.weights[a].sum())
    flow = nx.maximum_flow_value(G, "s", "t")
    mass = float(nu1.weights[a].sum())
    gap = mass - flow
    return gap if gap > FLOW_ROUNDING * mass else 0.0


def _ultrametric_excess(nu1, nu2, eta):
    # closed eta-balls of an ultrametric partition the space
    D = nu1.space.dist
    n = len(D)
    label = np.full(n, -1)
    out = 0.0
    for i in range(n):
        if label[i] >= 0:
            continue
        members = np.nonzero(D[i] <= eta)[0]
        label[members] = i
        out += max(0.0, float(nu1.weights[members].sum() - nu2.weights[members].sum()))
    return out


def prokhorov_distance(nu1: FiniteMeasure, nu2: FiniteMeasure, ultrametric: bool = False) -> float:
    """Exact Prokhorov distance between equal-mass measures on one finite space.

    Feasibility of eta means ``nu1(A) <= nu2(A^eta) + eta`` for every A (and
    the same with the roles swapped).  The excess ``e(eta)`` is a step
    function that only changes at pairwise distances ``d_k``, so the answer is
    ``min_k max(d_k, e(d_k))``; each ``e(d_k)`` is one max-flow.  With
    ``ultrametric=True`` the excess is computed from the ball partition.
    """
    _check_pair(nu1, nu2)
    support = np.nonzero((nu1.weights > 0) | (nu2.weights > 0))[0]
    if len(support) == 0:
        return 0.0
    D = nu1.space.dist[np.ix_(support, support)]
    levels = np.unique(D)
    fn = _ultrametric_excess if ultrametric else excess
    best = math.inf
    for d in levels:
        if d >= best:
            break
        e = max(fn(nu1, nu2, d), fn(nu2, nu1, d))
        best = min(best, max(float(d), e))
    return best


def total_variation(nu1: FiniteMeasure, nu2: FiniteMeasure) -> float:
    return 0.5 * float(np.abs(nu1.weights - nu2.weights).sum())


def pushforward(f: DiscreteMap, nu: FiniteMeasure) -> FiniteMeasure:
    """Weights summed along the fibres of f."""
    if len(nu.weights) != len(f.source):
        raise InputError("measure is not on the source of the map")
    w = np.bincount(f.assignment, weights=nu.weights, minlength=len(f.target))
    return FiniteMeasure(f.target, w)


def sigma_generator_membership(f: DiscreteMap, B, B_prime, eps: float, weights) -> bool:
    """Whether the mass of B intersected with f^-1(B') is strictly below eps."""
    B = set(int(b) for b in B)
    Bp = set(int(b) for b in B_prime)
    mass = sum(float(weights[i]) for i in B if int(f.assignment[i]) in Bp)
    return mass < eps

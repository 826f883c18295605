"""Finite levels of a warped cone.

A level is a net on the base space carrying the warped metric: the largest
metric that is at most ``t * d`` and moves every point by at most 1 along a
generator.  On a net this is the shortest-path metric of a graph with

* metric edges ``x -- y`` of weight ``t * d(x, y)`` for ``d(x, y) <= 2 mesh``;
* generator edges ``x -- snap(s . x)`` of weight 1.

Metric edge weights are rounded to multiples of ``QUANTUM`` (a power of two),
so every path length is an exactly representable float and different
shortest-path algorithms agree bit for bit.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import networkx as nx
import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components, shortest_path

from warpcone.errors import ConvergenceError, DiscretizationError, InputError, WarpError
from warpcone.groups import word_ball
from warpcone.spaces import ActionSpec, Net, act

QUANTUM = 2.0**-32


def quantize(w):
    """Round metric weights onto the dyadic grid, never below one quantum."""
    w = np.asarray(w, dtype=float)
    return np.maximum(np.round(w / QUANTUM) * QUANTUM, QUANTUM)


@dataclass(frozen=True)
class EdgeList:
    """Undirected weighted edges (i < j) after merging parallel edges."""

    i: np.ndarray
    j: np.ndarray
    weight: np.ndarray
    n: int

    def dense(self) -> np.ndarray:
        """Adjacency matrix with inf for non-edges and 0 on the diagonal."""
        W = np.full((self.n, self.n), np.inf)
        W[self.i, self.j] = self.weight
        W[self.j, self.i] = self.weight
        np.fill_diagonal(W, 0.0)
        return W

    def csr(self):
        g = sparse.coo_matrix((self.weight, (self.i, self.j)), shape=(self.n, self.n))
        return g.tocsr()


def snap_generators(net: Net, action: ActionSpec, tol: float):
    """Nearest net point of ``s . x`` for every generator s and net point x.

    Returns ``{label: (target_indices, snap_distances)}``.
    """
    out = {}
    for label in action.group.generators:
        moved = action.generator_maps[label](net.points)
        idx, dist = net.nearest(moved)
        bad = np.nonzero(dist > tol)[0]
        if len(bad):
            k = int(bad[0])
            raise DiscretizationError(
                f"generator {label!r} moves net point {k} to distance {dist[k]:.3g} "
                f"from the net (snap tolerance {tol:.3g})"
            )
        out[label] = (idx.astype(np.int64), dist)
    return out


def constraint_edges(net: Net, t: float, snaps) -> EdgeList:
    """Merged metric and generator edges of the level graph."""
    mi, mj, md = net.index.pairs_within(2.0 * net.mesh)
    mw = quantize(t * md)
    gi, gj = [], []
    for targets, _ in snaps.values():
        src = np.arange(len(targets))
        keep = targets != src
        gi.append(np.minimum(src[keep], targets[keep]))
        gj.append(np.maximum(src[keep], targets[keep]))
    gi = np.concatenate(gi) if gi else np.zeros(0, dtype=np.int64)
    gj = np.concatenate(gj) if gj else np.zeros(0, dtype=np.int64)
    i = np.concatenate([mi, gi]).astype(np.int64)
    j = np.concatenate([mj, gj]).astype(np.int64)
    w = np.concatenate([mw, np.ones(len(gi))])
    n = len(net)
    # keep the lightest edge per pair
    order = np.lexsort((w, j, i))
    i, j, w = i[order], j[order], w[order]
    first = np.ones(len(i), dtype=bool)
    first[1:] = (i[1:] != i[:-1]) | (j[1:] != j[:-1])
    return EdgeList(i[first], j[first], w[first], n)


@dataclass(frozen=True, eq=False)
class WarpedLevel:
    """One level of the warped cone over ``action`` realized on ``net``."""

    t: float
    net: Net
    action: ActionSpec
    snap_tolerance: float
    edges: EdgeList
    snaps: dict = field(repr=False)
    threads: int = 1
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return len(self.net)

    @property
    def mesh(self) -> float:
        return self.net.mesh

    @property
    def max_snap(self) -> float:
        return max((float(np.max(d)) for _, d in self.snaps.values()), default=0.0)

    def distances_from(self, sources) -> np.ndarray:
        """Rows of the warped distance matrix for the given source indices."""
        sources = np.atleast_1d(np.asarray(sources, dtype=np.int64))
        if "rho" in self._cache:
            return self._cache["rho"][sources]
        graph = self._cache.setdefault("csr", self.edges.csr())
        return shortest_path(graph, method="D", directed=False, indices=sources)

    @property
    def rho(self) -> np.ndarray:
        if "rho" not in self._cache:
            self._cache["rho"] = _apsp(self._cache.setdefault("csr", self.edges.csr()), self.n, self.threads)
        return self._cache["rho"]

    def header(self) -> dict:
        return {"t": self.t, "mesh": self.mesh, "snap_tolerance": self.snap_tolerance}


def _apsp(graph, n, threads):
    if threads <= 1 or n < 64:
        rho = shortest_path(graph, method="D", directed=False)
    else:
        chunks = np.array_split(np.arange(n), threads)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda c: shortest_path(graph, method="D", directed=False, indices=c), chunks))
        rho = np.vstack(parts)
    if not np.all(np.isfinite(rho)):
        raise WarpError("warped level graph is disconnected; mesh-radius edges should connect the net")
    rho.setflags(write=False)
    return rho


def warped_level(net: Net, action: ActionSpec, t: float, snap_tolerance: float | None = None,
                 threads: int = 1) -> WarpedLevel:
    """Level ``t`` of the warped cone on ``net``."""
    if t <= 0:
        raise InputError("level t must be positive")
    if action.space.kind != net.space.kind:
        raise InputError("action and net live on different spaces")
    tol = net.mesh if snap_tolerance is None else float(snap_tolerance)
    snaps = snap_generators(net, action, tol)
    edges = constraint_edges(net, t, snaps)
    ncomp, _ = connected_components(edges.csr(), directed=False)
    if ncomp != 1:
        raise WarpError("warped level graph is disconnected; mesh-radius edges should connect the net")
    return WarpedLevel(float(t), net, action, tol, edges, snaps, max(1, int(threads)))


def floyd_warshall(W: np.ndarray) -> np.ndarray:
    """Plain Floyd-Warshall closure of a dense weight matrix (reference oracle)."""
    D = np.array(W, dtype=float)
    for k in range(len(D)):
        D = np.minimum(D, D[:, k : k + 1] + D[k : k + 1, :])
    return D


def warped_ball(level: WarpedLevel, center: int, r: float) -> np.ndarray:
    """Indices y with rho(center, y) <= r, in increasing order."""
    row = level.distances_from([center])[0]
    return np.nonzero(row <= r)[0]


# -- local product structure ---------------------------------------------------------

@dataclass
class TrivializationReport:
    defect: float
    ball: np.ndarray
    elements: list = field(default_factory=list)
    offsets: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)


def trivialization_report(level: WarpedLevel, m0: int, r: float) -> TrivializationReport:
    """Compare the warped r-ball around net point ``m0`` with the model ball.

    The model space is Gamma x R^m with distance ``|g' g^-1| + |u - v|``: the
    word metric on the group factor plus the Euclidean metric on the rescaled
    tangent factor.  Every ball point x is decomposed as ``g . exp_m0(v / t)``
    with the cheapest ``|g| + |v|``; the defect is the largest discrepancy
    between warped and model distances over pairs of ball points.

    An infinite defect means the decomposition is ambiguous or impossible at
    this scale (two orbit points are too close, or a ball point is not near
    any orbit point of length <= r).
    """
    if r <= 0:
        raise InputError("trivialization radius must be positive")
    action, space, t = level.action, level.net.space, level.t
    group = action.group
    slack = 2.0 * t * level.mesh
    ball = warped_ball(level, m0, r)
    base = level.net.points[m0 : m0 + 1]
    elements = word_ball(group, int(math.floor(r)))
    orbit = np.vstack([act(action, g, base) for g in elements])
    lengths = np.array([g.length for g in elements], dtype=float)
    report = TrivializationReport(math.inf, ball, elements)

    # orbit points whose model balls would overlap make the chart ambiguous
    sep = t * space.pairwise(orbit, orbit)
    budget = 2.0 * r - lengths[:, None] - lengths[None, :] + slack
    np.fill_diagonal(sep, np.inf)
    clash = np.argwhere(sep <= budget)
    if len(clash):
        a, b = clash[0]
        report.diagnostics = {
            "reason": "orbit collision",
            "pair": [str(elements[a]), str(elements[b])],
            "rescaled_distance": float(sep[a, b]),
        }
        return report

    pts = level.net.points[ball]
    costs = np.empty((len(ball), len(elements)))
    offsets = np.empty((len(elements), len(ball), space.dim))
    for k, o in enumerate(orbit):
        v = t * np.atleast_2d(space.log(np.broadcast_to(o, pts.shape), pts))
        offsets[k] = v
        costs[:, k] = lengths[k] + np.linalg.norm(v, axis=1)
    choice = np.argmin(costs, axis=1)
    best = costs[np.arange(len(ball)), choice]
    worst = int(np.argmax(best)) if len(best) else 0
    if len(best) and best[worst] > r + (r + 1.0) * t * level.mesh:
        report.diagnostics = {
            "reason": "no decomposition",
            "point": int(ball[worst]),
            "model_radius": float(best[worst]),
        }
        return report

    v = offsets[choice, np.arange(len(ball))]
    keys = [elements[c].key for c in choice]
    # word distance |g' g^-1| between the chosen group parts
    word = np.zeros((len(ball), len(ball)))
    uniq = sorted(set(choice.tolist()))
    table = {}
    for a in uniq:
        for b in uniq:
            ga, gb = elements[a].key, elements[b].key
            table[a, b] = group.length(group.multiply(gb, group.inverse(ga)))
    for p in range(len(ball)):
        word[p] = [table[choice[p], choice[q]] for q in range(len(ball))]
    eucl = np.linalg.norm(v[:, None, :] - v[None, :, :], axis=-1)
    model = word + eucl
    warped = level.distances_from(ball)[:, ball]
    report.defect = float(np.max(np.abs(warped - model))) if len(ball) else 0.0
    report.offsets = v
    report.diagnostics = {"ball_size": int(len(ball)), "sheets": len(set(keys))}
    return report


def trivialization_defect(level: WarpedLevel, m0: int, r: float) -> float:
    """Distortion of the chart from the warped r-ball onto the model ball (inf if none)."""
    return trivialization_report(level, m0, r).defect


# -- level graphs and spectral gaps ------------------------------------------------------

def level_graph(level: WarpedLevel, threshold: float) -> nx.Graph:
    """Unweighted graph on the net joining points at warped distance <= threshold."""
    if threshold <= 0:
        raise InputError("threshold must be positive")
    rho = level.rho
    i, j = np.nonzero(np.triu(rho <= threshold, k=1))
    graph = nx.Graph()
    graph.add_nodes_from(range(level.n))
    graph.add_edges_from(zip(i.tolist(), j.tolist()))
    return graph


def spectral_gap(graph: nx.Graph, tol: float = 1e-6, max_iter: int = 100_000, seed: int = 0) -> float:
    """Second smallest eigenvalue of the normalized Laplacian.

    Power iteration runs on ``2I - L`` (spectrum in [0, 2]) with the top
    eigenvector ``D^{1/2} 1`` projected out after every step.  Disconnected
    graphs (and graphs with fewer than two vertices) return 0.
    """
    n = graph.number_of_nodes()
    if n < 2 or not nx.is_connected(graph):
        return 0.0
    nodes = list(graph.nodes())
    A = nx.to_scipy_sparse_array(graph, nodelist=nodes, format="csr", dtype=float)
    deg = np.asarray(A.sum(axis=1)).ravel()
    inv_sqrt = 1.0 / np.sqrt(deg)
    N = sparse.diags(inv_sqrt) @ A @ sparse.diags(inv_sqrt)
    top = np.sqrt(deg)
    top /= np.linalg.norm(top)

    def apply(x):
        return x + N @ x

    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    x -= top * (top @ x)
    x /= np.linalg.norm(x)
    lam = math.inf
    for it in range(max_iter):
        y = apply(x)
        mu = float(x @ y)
        y -= top * (top @ y)
        resid = float(np.linalg.norm(y - mu * x))
        new = 2.0 - mu
        norm = np.linalg.norm(y)
        if norm <= 1e-12:
            # x lies in the kernel of 2I - L (up to rounding), i.e. lambda_2 = 2
            return 2.0
        x = y / norm
        # the residual bounds the eigenvalue error (squared, over the spectral gap)
        if abs(new - lam) <= tol * max(abs(new), 1e-12) * 1e-2 and resid <= math.sqrt(tol) * 1e-2:
            return max(new, 0.0)
        lam = new
    raise ConvergenceError(f"spectral gap did not converge in {max_iter} iterations", last=lam)

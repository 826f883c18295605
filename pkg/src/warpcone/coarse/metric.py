"""Finite metric spaces, maps between them and their coarse invariants."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from warpcone.errors import InputError

METRIC_TOL = 1e-9
QI_GRID = 1e-3
CHECK_LIMIT = 500


@dataclass(frozen=True, eq=False)
class FiniteMetricSpace:
    """Points with labels and a symmetric distance matrix."""

    labels: tuple
    dist: np.ndarray
    basepoint: int | None = None
    _lookup: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        D = np.array(self.dist, dtype=float)
        if D.ndim != 2 or D.shape[0] != D.shape[1] or D.shape[0] != len(self.labels):
            raise InputError("distance matrix must be square and match the labels")
        D.setflags(write=False)
        object.__setattr__(self, "dist", D)
        object.__setattr__(self, "labels", tuple(self.labels))
        self._lookup.update({lab: i for i, lab in enumerate(self.labels)})

    @classmethod
    def from_matrix(cls, dist, labels=None, basepoint=None, check=True):
        dist = np.asarray(dist, dtype=float)
        labels = tuple(range(len(dist))) if labels is None else tuple(labels)
        space = cls(labels, dist, basepoint)
        if check:
            space.check_metric()
        return space

    def __len__(self):
        return len(self.labels)

    def index_of(self, label) -> int:
        return self._lookup[label]

    def check_metric(self, tol: float = METRIC_TOL, samples: int = 20_000, seed: int = 0):
        """Assert the metric axioms (all triples up to 500 points, sampled above)."""
        D = self.dist
        if np.any(D < -tol) or np.any(np.abs(D - D.T) > tol) or np.any(np.abs(np.diag(D)) > tol):
            raise InputError("matrix is not a symmetric non-negative matrix with zero diagonal")
        n = len(D)
        if n <= CHECK_LIMIT:
            for k in range(n):
                if np.any(D > D[:, k : k + 1] + D[k : k + 1, :] + tol):
                    raise InputError("triangle inequality fails")
        else:
            rng = np.random.default_rng(seed)
            i, j, k = rng.integers(0, n, size=(3, samples))
            if np.any(D[i, j] > D[i, k] + D[k, j] + tol):
                raise InputError("triangle inequality fails on sampled triples")

    def subspace(self, indices, basepoint=None) -> "FiniteMetricSpace":
        idx = np.asarray(indices, dtype=np.int64)
        return FiniteMetricSpace(tuple(self.labels[i] for i in idx), self.dist[np.ix_(idx, idx)], basepoint)

    def diameter(self) -> float:
        return float(np.max(self.dist)) if len(self) else 0.0


@dataclass(frozen=True, eq=False)
class DiscreteMap:
    """A total map between finite metric spaces given by target indices."""

    source: FiniteMetricSpace
    target: FiniteMetricSpace
    assignment: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=np.int64)
        if a.shape != (len(self.source),):
            raise InputError("assignment must give one target index per source point")
        if len(a) and (a.min() < 0 or a.max() >= len(self.target)):
            raise InputError("assignment refers to points outside the target")
        if self.source.basepoint is not None and self.target.basepoint is not None:
            if a[self.source.basepoint] != self.target.basepoint:
                raise InputError("map does not preserve the basepoint")
        a.setflags(write=False)
        object.__setattr__(self, "assignment", a)

    def pulled_back(self) -> np.ndarray:
        """Target distances between images, as a source-indexed matrix."""
        a = self.assignment
        return self.target.dist[np.ix_(a, a)]

    def as_dict(self) -> dict:
        return {self.source.labels[i]: self.target.labels[j] for i, j in enumerate(self.assignment)}

    def preimage(self, target_indices) -> np.ndarray:
        mask = np.isin(self.assignment, np.asarray(list(target_indices), dtype=np.int64))
        return np.nonzero(mask)[0]


def identity_map(space: FiniteMetricSpace) -> DiscreteMap:
    return DiscreteMap(space, space, np.arange(len(space)))


def distortion(f: DiscreteMap) -> float:
    """sup |d_Y(fx, fx') - d_X(x, x')| over source pairs."""
    if len(f.source) == 0:
        return 0.0
    return float(np.max(np.abs(f.pulled_back() - f.source.dist)))


def density_radius(f: DiscreteMap) -> float:
    """sup over target points of the distance to the image."""
    image = np.unique(f.assignment)
    if len(image) == 0:
        return math.inf
    return float(np.max(np.min(f.target.dist[:, image], axis=1)))


def _companion_c(dx, dy, K):
    return max(0.0, float(np.max(dy - K * dx)), float(np.max(dx / K - dy)))


def _grid_k(i):
    # grid points are 1 + i/1000, computed from integers to avoid drift
    return 1.0 + i * QI_GRID


def qi_constants(f: DiscreteMap) -> tuple[float, float, float]:
    """(K, C, c_dense) of a map.

    ``C(K)`` is the least additive constant with ``d/K - C <= d_Y <= K d + C``
    for all pairs.  It does not increase with K, and stops improving once K
    reaches the largest finite distance ratio ``K_max``.  The returned K is
    the smallest grid value (step 1e-3) in ``[1, K_max]`` whose C equals the
    best C on that range; ``c_dense`` is the density radius of the image.
    """
    n = len(f.source)
    if n < 2:
        raise InputError("qi_constants needs at least two source points")
    iu = np.triu_indices(n, k=1)
    dx = f.source.dist[iu]
    dy = f.pulled_back()[iu]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.concatenate([dy[dx > 0] / dx[dx > 0], dx[dy > 0] / dy[dy > 0]])
    kmax = max(1.0, float(np.max(ratios))) if len(ratios) else 1.0
    top = int(math.ceil((kmax - 1.0) / QI_GRID - 1e-9))
    best = _companion_c(dx, dy, _grid_k(top))
    lo, hi = 0, top
    # C(K) is non-increasing, so the first grid K reaching ``best`` is found by bisection
    while lo < hi:
        mid = (lo + hi) // 2
        if _companion_c(dx, dy, _grid_k(mid)) <= best + 1e-12:
            hi = mid
        else:
            lo = mid + 1
    K = _grid_k(lo)
    return K, _companion_c(dx, dy, K), density_radius(f)


def satisfies_qi(f: DiscreteMap, K: float, C: float, tol: float = METRIC_TOL) -> bool:
    """Whether ``d/K - C <= d_Y <= K d + C`` on all pairs (no density condition)."""
    dx = f.source.dist
    dy = f.pulled_back()
    return bool(np.all(dy <= K * dx + C + tol) and np.all(dx / K - C <= dy + tol))


def epsilon_isometry_defect(f: DiscreteMap) -> float:
    """Smallest eps for which f is an eps-isometry: max(distortion, density radius)."""
    return max(distortion(f), density_radius(f))


def hausdorff_distance(A, B, ambient: FiniteMetricSpace) -> float:
    A = np.asarray(sorted(set(int(a) for a in A)), dtype=np.int64)
    B = np.asarray(sorted(set(int(b) for b in B)), dtype=np.int64)
    if len(A) == 0 or len(B) == 0:
        raise InputError("Hausdorff distance needs non-empty sets")
    D = ambient.dist[np.ix_(A, B)]
    return float(max(np.max(np.min(D, axis=1)), np.max(np.min(D, axis=0))))


# -- Gromov-Hausdorff ------------------------------------------------------------

@dataclass
class GHResult:
    value: float
    exact: bool
    correspondence: list


def _correspondence_distortion(X, Y, pairs):
    xs = np.array([p[0] for p in pairs])
    ys = np.array([p[1] for p in pairs])
    return float(np.max(np.abs(X.dist[np.ix_(xs, xs)] - Y.dist[np.ix_(ys, ys)])))


def _feasible(DX, DY, v, tol=1e-12):
    """Backtracking search for a correspondence with distortion <= v."""
    nx_, ny_ = len(DX), len(DY)
    chosen: list[tuple[int, int]] = []

    def compatible(x, y):
        for a, b in chosen:
            if abs(DX[x, a] - DY[y, b]) > v + tol:
                return False
        return True

    def cover_y(j):
        covered = {b for _, b in chosen}
        while j < ny_ and j in covered:
            j += 1
        if j == ny_:
            return True
        for x in range(nx_):
            if compatible(x, j):
                chosen.append((x, j))
                if cover_y(j + 1):
                    return True
                chosen.pop()
        return False

    def cover_x(i):
        if i == nx_:
            return cover_y(0)
        for y in range(ny_):
            if compatible(i, y):
                chosen.append((i, y))
                if cover_x(i + 1):
                    return True
                chosen.pop()
        return False

    return list(chosen) if cover_x(0) else None


def _greedy_correspondence(X, Y, rng, order=None):
    DX, DY = X.dist, Y.dist
    nx_, ny_ = len(X), len(Y)
    pairs = []
    xs = list(range(nx_)) if order is None else list(order)
    for x in xs:
        if not pairs:
            pairs.append((x, int(rng.integers(ny_))))
            continue
        a = np.array([p[0] for p in pairs])
        b = np.array([p[1] for p in pairs])
        cost = np.max(np.abs(DX[x, a][None, :] - DY[:, b]), axis=1)
        pairs.append((x, int(np.argmin(cost))))
    used = {p[1] for p in pairs}
    for y in range(ny_):
        if y in used:
            continue
        a = np.array([p[0] for p in pairs])
        b = np.array([p[1] for p in pairs])
        cost = np.max(np.abs(DX[:, a] - DY[y, b][None, :]), axis=1)
        pairs.append((int(np.argmin(cost)), y))
    return pairs


def _local_search(X, Y, pairs, rounds=3):
    best = _correspondence_distortion(X, Y, pairs)
    for _ in range(rounds):
        improved = False
        for k in range(len(pairs)):
            x, y = pairs[k]
            fixed_x = [p for i, p in enumerate(pairs) if i != k]
            covered_x = {p[0] for p in fixed_x}
            covered_y = {p[1] for p in fixed_x}
            options = []
            if x in covered_x:
                options += [(xx, y) for xx in range(len(X))]
            if y in covered_y:
                options += [(x, yy) for yy in range(len(Y))]
            for cand in options:
                trial = fixed_x + [cand]
                val = _correspondence_distortion(X, Y, trial)
                if val < best - 1e-15:
                    best, pairs, improved = val, trial, True
                    break
        if not improved:
            break
    return pairs, best


def gh_distance(X: FiniteMetricSpace, Y: FiniteMetricSpace, budget: int = 64, restarts: int = 8,
                seed: int = 0) -> GHResult:
    """Gromov-Hausdorff distance, exact when |X| * |Y| <= budget.

    Exact mode bisects over the finitely many candidate values
    ``|d_X(x, x') - d_Y(y, y')|`` with a backtracking correspondence search;
    otherwise the best of several greedy + local-search correspondences gives
    an upper bound.
    """
    if len(X) == 0 or len(Y) == 0:
        raise InputError("GH distance needs non-empty spaces")
    if len(X) * len(Y) <= budget:
        cands = np.unique(np.abs(X.dist.ravel()[:, None] - Y.dist.ravel()[None, :]))
        lo, hi = 0, len(cands) - 1
        while lo < hi:
            mid = (lo + hi) // 2
            if _feasible(X.dist, Y.dist, cands[mid]) is not None:
                hi = mid
            else:
                lo = mid + 1
        return GHResult(0.5 * float(cands[lo]), True, _feasible(X.dist, Y.dist, cands[lo]))
    rng = np.random.default_rng(seed)
    best_pairs, best_val = None, math.inf
    for r in range(restarts):
        order = rng.permutation(len(X)) if r else None
        pairs, val = _local_search(X, Y, _greedy_correspondence(X, Y, rng, order))
        if val < best_val:
            best_pairs, best_val = pairs, val
    return GHResult(0.5 * best_val, False, best_pairs)


def gh_distance_upper(X: FiniteMetricSpace, Y: FiniteMetricSpace, budget: int = 64) -> float:
    return gh_distance(X, Y, budget).value


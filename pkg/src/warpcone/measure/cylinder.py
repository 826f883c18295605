"""Gaussian-increment measures on cylinder sets of grid functions.

A partition of the cube ``[0, a]^m`` (one quadrant of the symmetric cube
around a base point) is given by breakpoints ``0 = x_0 <= x_1 <= ... <= x_k = a``
per coordinate.  A grid function ``u`` lives on the points ``q = (q_1..q_m)``
with ``1 <= q_p <= k_p`` and extends by zero to any index that is 0.  Its
m-fold difference ``Delta u(q)`` is the alternating sum over the corners of
the cell ``S(q)``, and the energy is ``W(u) = sum_q Delta u(q)^2 / mu(S(q))``.

The measure of a cylinder set (values of u at the grid points constrained to
intervals) is ``K(P) * integral_E exp(-W(u)) du``.  In increment coordinates
the Jacobian is 1 and the increments are independent ``Normal(0, mu/2)``
variables, so the integral is evaluated by nested Gauss-Legendre quadrature
over the increments in lexicographic order, with the innermost integral done
in closed form.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import erf

from warpcone.errors import ConvergenceError, InputError, ResourceLimitError, SingularityError

TAIL_SIGMAS = 8.0
QUAD_RTOL = 1e-8
MIN_ORDER = 8
MAX_ORDER = 256
NODE_CAP = 4_000_000  # live quadrature nodes (rows of partial increment vectors)


def max_cube_halfside(r: float, m: int) -> float:
    """Half-side of the largest symmetric cube inside the Euclidean r-ball of R^m."""
    if r <= 0 or m < 1:
        raise InputError("need r > 0 and m >= 1")
    return r / math.sqrt(m)


@dataclass(frozen=True, eq=False)
class Partition:
    """Breakpoints of one (gamma, quadrant) component and its cell measures."""

    breakpoints: tuple
    cell_measures: np.ndarray
    gamma: object = None
    quadrant: tuple = ()

    def __post_init__(self):
        bps = tuple(np.asarray(b, dtype=float) for b in self.breakpoints)
        for b in bps:
            if len(b) == 0 or np.any(np.diff(b) < 0) or b[0] < 0:
                raise InputError("breakpoints must be non-empty, sorted and non-negative")
        a = {float(b[-1]) for b in bps}
        if len(a) != 1:
            raise InputError("all coordinates must end at the same half-side a")
        mu = np.asarray(self.cell_measures, dtype=float)
        if mu.shape != self.shape:
            raise InputError(f"cell measures must have shape {self.shape}")
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "cell_measures", mu)
        if not self.quadrant:
            object.__setattr__(self, "quadrant", (1,) * len(bps))

    @classmethod
    def from_breakpoints(cls, breakpoints: Sequence, density: float = 1.0, **kw) -> "Partition":
        """Cells measured by ``density`` times their Euclidean volume."""
        bps = [np.asarray(b, dtype=float) for b in breakpoints]
        widths = [np.diff(np.concatenate([[0.0], b])) for b in bps]
        mu = density * _outer(widths)
        return cls(tuple(bps), mu, **kw)

    @classmethod
    def uniform(cls, a: float, k: int, m: int = 1, density: float = 1.0, **kw) -> "Partition":
        b = a * np.arange(1, k + 1) / k
        return cls.from_breakpoints([b] * m, density, **kw)

    @property
    def m(self) -> int:
        return len(self.breakpoints)

    @property
    def shape(self) -> tuple:
        return tuple(len(b) for b in self.breakpoints)

    @property
    def k(self) -> int:
        return int(np.prod(self.shape))

    @property
    def halfside(self) -> float:
        return float(self.breakpoints[0][-1])

    def points(self) -> list:
        """Grid multi-indices (1-based) in lexicographic order."""
        return list(itertools.product(*[range(1, n + 1) for n in self.shape]))


def _outer(vectors):
    out = np.asarray(vectors[0], dtype=float)
    for v in vectors[1:]:
        out = np.multiply.outer(out, np.asarray(v, dtype=float))
    return out


@dataclass(frozen=True, eq=False)
class CylinderSet:
    """Constraints ``lo[q] <= u(q) <= hi[q]`` on one or more partitions.

    ``components`` is a list of ``(partition, lo, hi)`` with ``lo``/``hi``
    arrays shaped like the grid; infinite bounds mean no constraint.
    """

    components: list = field(default_factory=list)

    @classmethod
    def single(cls, partition: Partition, lo=None, hi=None) -> "CylinderSet":
        lo = np.full(partition.shape, -np.inf) if lo is None else np.broadcast_to(np.asarray(lo, float), partition.shape)
        hi = np.full(partition.shape, np.inf) if hi is None else np.broadcast_to(np.asarray(hi, float), partition.shape)
        return cls([(partition, np.array(lo), np.array(hi))])


def _check_cells(P: Partition):
    if np.any(P.cell_measures <= 0):
        raise SingularityError("cell measure is zero")


def delta_difference(u, P: Partition, q) -> float:
    """m-fold alternating difference of u at the 1-based multi-index q (zero boundary)."""
    u = np.asarray(u, dtype=float)
    if u.shape != P.shape:
        raise InputError(f"grid function must have shape {P.shape}")
    q = tuple(int(c) for c in q)
    if any(c < 1 or c > n for c, n in zip(q, P.shape)):
        raise InputError("multi-index out of range")
    total = 0.0
    for corner in itertools.product((0, 1), repeat=P.m):
        idx = tuple(c - s for c, s in zip(q, corner))
        if min(idx) == 0:
            continue
        total += (-1) ** sum(corner) * u[tuple(i - 1 for i in idx)]
    return total


def increments(u) -> np.ndarray:
    """All m-fold differences at once (zero padding, then a difference per axis)."""
    d = np.asarray(u, dtype=float)
    for ax in range(d.ndim):
        pad = [(0, 0)] * d.ndim
        pad[ax] = (1, 0)
        d = np.diff(np.pad(d, pad), axis=ax)
    return d


def integrate_increments(delta) -> np.ndarray:
    """Inverse of ``increments``: cumulative sums along every axis."""
    u = np.asarray(delta, dtype=float)
    for ax in range(u.ndim):
        u = np.cumsum(u, axis=ax)
    return u


def normalization_K(P: Partition, mode: str = "unit-mass") -> float:
    """Normalizing constant; ``as-written`` is 1 / (pi^k prod mu^1/2)."""
    _check_cells(P)
    mu = P.cell_measures.ravel()
    if mode == "as-written":
        return float(1.0 / (math.pi ** len(mu) * np.prod(np.sqrt(mu))))
    if mode == "unit-mass":
        return float(np.prod(1.0 / np.sqrt(math.pi * mu)))
    raise InputError(f"unknown normalization mode {mode!r}")


def energy_W(P: Partition, u) -> float:
    _check_cells(P)
    u = np.asarray(u, dtype=float)
    if u.shape != P.shape:
        raise InputError(f"grid function must have shape {P.shape}")
    d = increments(u)
    return float(np.sum(d * d / P.cell_measures))


# -- quadrature --------------------------------------------------------------------

def _prefix_coefficients(shape):
    """c[j, i] = 1 when grid point i <= grid point j componentwise (i before j)."""
    pts = list(itertools.product(*[range(n) for n in shape]))
    k = len(pts)
    c = np.zeros((k, k))
    for j, pj in enumerate(pts):
        for i in range(j):
            if all(a <= b for a, b in zip(pts[i], pj)):
                c[j, i] = 1.0
    return c


def _component_integral(P: Partition, lo, hi, density, order):
    """Integral of exp(-W) over the box constraints, in increment coordinates."""
    mu = P.cell_measures.ravel()
    lo = np.asarray(lo, dtype=float).ravel()
    hi = np.asarray(hi, dtype=float).ravel()
    c = _prefix_coefficients(P.shape)
    k = len(mu)
    nodes, wts = np.polynomial.legendre.leggauss(order)
    # state: increments chosen so far (rows) and accumulated weights
    chosen = np.zeros((1, 0))
    weight = np.ones(1)
    for j in range(k):
        cut = TAIL_SIGMAS * math.sqrt(mu[j] / 2.0)
        shift = chosen @ c[j, :j] if j else np.zeros(len(weight))
        a = np.clip(lo[j] - shift, -cut, cut)
        b = np.clip(hi[j] - shift, -cut, cut)
        b = np.maximum(a, b)
        if j == k - 1 and density is None:
            s = math.sqrt(mu[j])
            inner = 0.5 * math.sqrt(math.pi * mu[j]) * (erf(b / s) - erf(a / s))
            return float(np.sum(weight * inner))
        half = 0.5 * (b - a)
        mid = 0.5 * (b + a)
        x = mid[:, None] + half[:, None] * nodes[None, :]
        w = weight[:, None] * half[:, None] * wts[None, :] * np.exp(-x * x / mu[j])
        if density is not None:
            w = w * density(x + shift[:, None])
        keep = w.ravel() != 0.0
        if np.count_nonzero(keep) > NODE_CAP:
            raise ResourceLimitError(f"nested quadrature with {k} increments at order {order}", NODE_CAP)
        chosen = np.concatenate([np.repeat(chosen, order, axis=0), x.reshape(-1, 1)], axis=1)[keep]
        weight = w.ravel()[keep]
        if len(weight) == 0:
            return 0.0
    return float(np.sum(weight))


def cylinder_measure(F: CylinderSet, density_N: Callable | None = None, mode: str = "unit-mass",
                     rtol: float = QUAD_RTOL) -> float:
    """K(P) times the Gaussian integral over F, summed over components.

    ``density_N`` (a vectorized density of the target measure) defaults to the
    Lebesgue density 1.  Gauss-Legendre order doubles from 8 until the relative
    change drops below ``rtol``.
    """
    total = 0.0
    for P, lo, hi in F.components:
        _check_cells(P)
        K = normalization_K(P, mode)
        prev = None
        order = MIN_ORDER
        while True:
            val = _component_integral(P, lo, hi, density_N, order)
            if prev is not None and abs(val - prev) <= rtol * max(abs(val), 1e-300):
                break
            if prev is not None and val == 0.0 and prev == 0.0:
                break
            if order >= MAX_ORDER:
                raise ConvergenceError(f"quadrature did not converge by order {MAX_ORDER}", last=K * val)
            prev = val
            order *= 2
        total += K * val
    return total


# -- sampling ------------------------------------------------------------------------------

def sample_fields(P: Partition, n: int, seed) -> np.ndarray:
    """n grid functions with independent Normal(0, mu/2) increments, shape (n, *grid)."""
    rng = np.random.default_rng(seed)
    sd = np.sqrt(P.cell_measures / 2.0)
    delta = rng.standard_normal((n,) + P.shape) * sd
    u = delta
    for ax in range(1, P.m + 1):
        u = np.cumsum(u, axis=ax)
    return u


def sample_field(P: Partition, seed) -> np.ndarray:
    return sample_fields(P, 1, seed)[0]


def cylinder_frequency(F: CylinderSet, samples: int, seed) -> float:
    """Monte-Carlo estimate of the unit-mass measure of F (components weighted equally)."""
    total = 0.0
    for n, (P, lo, hi) in enumerate(F.components):
        u = sample_fields(P, samples, np.random.SeedSequence([int(seed), n]))
        inside = np.all((u >= lo) & (u <= hi), axis=tuple(range(1, P.m + 1)))
        total += float(np.mean(inside))
    return total

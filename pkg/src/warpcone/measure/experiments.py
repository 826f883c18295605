"""Finite-scale invariance experiments for the Gaussian-increment measures.

The measure at level (t, r) is modelled as a mixture over components
``(g, I)``: g in the word ball B(r) and I a quadrant sign vector.  A sample
picks a component uniformly, draws a Gaussian-increment field u on the lattice
cube of that component and perturbs the reference map (the identity) there.
It is recorded by its floor fingerprint: ``floor(u)`` at every grid point of
its own component and 0 at the grid points of all other components.

Grid points ("slots") of a level are ordered by model radius
``|g| + |x|``; two fingerprints are at distance ``2^-rho`` where rho is the
radius of the first slot on which they differ.  This is an ultrametric, so
the Prokhorov distance is computed from prefix classes.

The group acts by moving component labels, ``(g, I) -> (gamma g, I)``, which
is the action ``m -> psi(gamma^-1)^-1 Psi(gamma^-1 m)`` for the identity
reference map.  Translated samples are restricted to the smaller level
``r - |gamma|`` before comparison.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from warpcone.errors import InputError
from warpcone.groups import GroupElement, word_ball
from warpcone.measure.cylinder import Partition, sample_fields
from warpcone.measure.finite import FiniteMeasure, prokhorov_distance, pushforward
from warpcone.spaces import ActionSpec, Net, act


@dataclass(frozen=True, eq=False)
class FieldLevel:
    """Component and slot layout of one level of the mixture model."""

    action: ActionSpec
    r: int
    spacing: float
    elements: list
    quadrants: list
    partition: Partition
    slots: list  # (radius, component index, grid multi-index)

    @property
    def components(self):
        return [(g, I) for g in self.elements for I in self.quadrants]

    @property
    def slot_radius(self) -> np.ndarray:
        return np.array([s[0] for s in self.slots])


def field_level(action: ActionSpec, r: int, spacing: float = 1.0, cap: int | None = None) -> FieldLevel:
    """Layout of level r: components of B(r) x quadrants, lattice cube grids."""
    if r < 1:
        raise InputError("level radius must be >= 1")
    m = action.space.dim
    a = r / math.sqrt(m)
    k = int(math.floor(a / spacing + 1e-9))
    if k < 1:
        raise InputError("lattice cube is empty; lower the spacing")
    partition = Partition.uniform(k * spacing, k, m)
    elements = word_ball(action.group, r, **({"cap": cap} if cap else {}))
    quadrants = list(itertools.product((1, -1), repeat=m))
    slots = []
    comps = [(g, I) for g in elements for I in quadrants]
    for c, (g, I) in enumerate(comps):
        for q in partition.points():
            x = spacing * np.array(q, dtype=float)
            slots.append((g.length + float(np.linalg.norm(x)), c, q))
    slots.sort(key=lambda s: (s[0], s[1], s[2]))
    return FieldLevel(action, r, spacing, elements, quadrants, partition, slots)


def _slot_table(level: FieldLevel):
    comps = level.components
    return {(comps[c][0].key, comps[c][1], q): i for i, (_, c, q) in enumerate(level.slots)}


@dataclass
class FieldSamples:
    level: FieldLevel
    component: np.ndarray  # per accepted sample
    fields: np.ndarray  # (n, *grid) floor values
    rejected: int

    def fingerprints(self) -> np.ndarray:
        comps = self.level.components
        table = _slot_table(self.level)
        n = len(self.component)
        F = np.zeros((n, len(self.level.slots)), dtype=np.int64)
        pts = self.level.partition.points()
        for c in np.unique(self.component):
            rows = np.nonzero(self.component == c)[0]
            g, I = comps[c]
            cols = [table[(g.key, I, q)] for q in pts]
            F[np.ix_(rows, cols)] = self.fields[rows].reshape(len(rows), -1)
        return F


def sample_level(level: FieldLevel, samples: int, seed, bound: float) -> FieldSamples:
    """Draw mixture samples; fields with max |u| > bound are rejected and counted."""
    rng = np.random.default_rng(seed)
    comp = rng.integers(0, len(level.components), size=samples)
    u = sample_fields(level.partition, samples, rng.integers(2**63))
    ok = np.max(np.abs(u.reshape(samples, -1)), axis=1) <= bound
    return FieldSamples(level, comp[ok], np.floor(u[ok]).astype(np.int64), int(samples - ok.sum()))


def translate_restrict(samples: FieldSamples, gamma: GroupElement, small: FieldLevel) -> np.ndarray:
    """Fingerprints of the translated samples, read on the slots of ``small``."""
    G = samples.level.action.group
    comps = samples.level.components
    table = _slot_table(small)
    pts = samples.level.partition.points()
    n = len(samples.component)
    F = np.zeros((n, len(small.slots)), dtype=np.int64)
    for c in np.unique(samples.component):
        g, I = comps[c]
        moved = G.multiply(gamma.key, g.key)
        rows = np.nonzero(samples.component == c)[0]
        vals = samples.fields[rows].reshape(len(rows), -1)
        for col, q in enumerate(pts):
            slot = table.get((moved, I, q))
            if slot is not None:
                F[rows, slot] = vals[:, col]
    return F


def prokhorov_fingerprints(F1: np.ndarray, F2: np.ndarray, radii: np.ndarray) -> float:
    """Prokhorov distance between the empirical measures of two fingerprint arrays.

    Columns are slots sorted by radius; the distance between rows is
    ``2^-(radius of first differing column)``.  Closed eta-balls are classes of
    equal prefixes over the columns with radius < -log2(eta).
    """
    n1, n2 = len(F1), len(F2)
    if n1 == 0 or n2 == 0:
        raise InputError("empirical measures need at least one sample each")
    both = np.concatenate([F1, F2])
    # integer weights n2 and -n1 keep the class excess exact (0 for equal samples)
    w = np.concatenate([np.full(n1, n2, dtype=np.int64), np.full(n2, -n1, dtype=np.int64)])
    scale = float(n1) * float(n2)
    levels = sorted(set(radii.tolist()))
    # eta candidates: 0 and 2^-rho for each slot radius, visited in increasing eta
    etas = [(0.0, len(radii))] + [(2.0 ** (-rho), int(np.searchsorted(radii, rho, side="left"))) for rho in reversed(levels)]
    best = math.inf
    for eta, ncols in etas:
        if eta >= best:
            break
        if ncols == 0:
            e = max(0, int(w.sum())) / scale
        else:
            _, inv = np.unique(both[:, :ncols], axis=0, return_inverse=True)
            net = np.zeros(inv.max() + 1, dtype=np.int64)
            np.add.at(net, inv.ravel(), w)
            e = int(np.maximum(net, 0).sum()) / scale
        best = min(best, max(eta, e))
    return best


def shell_elements(group, gamma: GroupElement, r: int):
    """T = gamma B(r) minus B(r - |gamma|), as group elements."""
    small = {g.key for g in word_ball(group, r - gamma.length)}
    out = []
    for g in word_ball(group, r):
        h = group.multiply(gamma.key, g.key)
        if h not in small:
            out.append(group.element(h))
    return out


def shell_mass(action: ActionSpec, net: Net, gamma: GroupElement, r: int, t: float, m0) -> float:
    """Sum over g in T of the net weight within r/t of g . m0."""
    total = 0.0
    for g in shell_elements(action.group, gamma, r):
        centre = act(action, g, m0)
        d = action.space.dist_to(net.points, centre[0])
        total += float(net.weights[d <= r / t].sum())
    return total


@dataclass
class InvarianceReport:
    gamma: str
    r: int
    t: float
    defect: float
    shell_mass: float
    rejected_samples: int
    samples: int

    def as_dict(self):
        return {
            "gamma": self.gamma,
            "r": self.r,
            "t": self.t,
            "defect": self.defect,
            "shell_mass": self.shell_mass,
            "rejected_samples": self.rejected_samples,
            "samples": self.samples,
        }


def invariance_defect_experiment(
    action: ActionSpec,
    gamma: GroupElement,
    r: int,
    t: float,
    samples: int,
    seed: int,
    net: Net | None = None,
    m0=None,
    bound: float = 6.0,
    spacing: float = 1.0,
) -> InvarianceReport:
    """Prokhorov distance between the translated level-r measure and the level r-|gamma| one.

    Sample seeds depend only on ``(seed, level radius)``, so gamma = e compares
    a sample set with itself and returns exactly 0.
    """
    if gamma.length > r - 1:
        raise InputError("need |gamma| <= r - 1 so the smaller level is non-empty")
    big = field_level(action, r, spacing)
    small = big if gamma.length == 0 else field_level(action, r - gamma.length, spacing)
    s_big = sample_level(big, samples, np.random.SeedSequence([seed, r]), bound)
    s_small = s_big if gamma.length == 0 else sample_level(
        small, samples, np.random.SeedSequence([seed, r - gamma.length]), bound
    )
    F1 = translate_restrict(s_big, gamma, small)
    F2 = s_small.fingerprints()
    defect = prokhorov_fingerprints(F1, F2, small.slot_radius)
    m0 = np.zeros((1, action.space.coord_dim)) if m0 is None else np.atleast_2d(m0)
    shell = shell_mass(action, net, gamma, r, t, m0) if net is not None else float("nan")
    return InvarianceReport(str(gamma), r, float(t), defect, shell, s_big.rejected + (
        s_small.rejected if s_small is not s_big else 0), samples)


# -- weak* diagnostics --------------------------------------------------------------------------

@dataclass
class WeakStarReport:
    consecutive: list
    invariance: dict = field(default_factory=dict)


def weak_star_diagnostic(measures, actions=None, ultrametric: bool = False) -> WeakStarReport:
    """Consecutive Prokhorov distances, plus invariance defects of the last measure.

    ``actions`` maps a label to a self-map (``DiscreteMap``) of the common
    space; the defect for that label is ``d_P(gamma_* nu, nu)``.
    """
    measures = list(measures)
    cons = [prokhorov_distance(a, b, ultrametric) for a, b in zip(measures[:-1], measures[1:])]
    inv = {}
    if measures and actions:
        last = measures[-1]
        for label, f in actions.items():
            inv[label] = prokhorov_distance(pushforward(f, last), last, ultrametric)
    return WeakStarReport(cons, inv)


def empirical_measure(points: np.ndarray, space_rows: np.ndarray) -> np.ndarray:
    """Weights of the empirical measure of ``points`` on the rows of ``space_rows``."""
    lookup = {tuple(r): i for i, r in enumerate(space_rows.tolist())}
    w = np.zeros(len(space_rows))
    for p in points.tolist():
        w[lookup[tuple(p)]] += 1.0
    return w / max(len(points), 1)


def fingerprint_space(rows: np.ndarray, radii: np.ndarray):
    """Ultrametric space on distinct fingerprint rows (2^-first differing radius)."""
    from warpcone.coarse.metric import FiniteMetricSpace

    rows = np.unique(rows, axis=0)
    n = len(rows)
    D = np.zeros((n, n))
    pending = ~np.eye(n, dtype=bool)
    for col in range(rows.shape[1]):
        hit = pending & (rows[:, col][:, None] != rows[:, col][None, :])
        D[hit] = 2.0 ** (-radii[col])
        pending &= ~hit
    return FiniteMetricSpace(tuple(range(n)), D), rows


def tower_measures(action: ActionSpec, r: int, sample_counts, seed: int, bound: float = 6.0,
                   spacing: float = 1.0):
    """Empirical level-r measures with growing sample counts on one common space.

    Returns ``(measures, samples)``; the sample sets feed ``tower_invariance``.
    """
    level = field_level(action, r, spacing)
    drawn = [sample_level(level, int(n), np.random.SeedSequence([seed, r, k]), bound)
             for k, n in enumerate(sample_counts)]
    prints = [s.fingerprints() for s in drawn]
    space, rows = fingerprint_space(np.concatenate(prints), level.slot_radius)
    measures = [FiniteMeasure(space, empirical_measure(p, rows)) for p in prints]
    return measures, drawn


def tower_invariance(samples: FieldSamples, gamma: GroupElement) -> float:
    """Prokhorov distance between the gamma-translate of one empirical measure and itself.

    Both are read on the level ``r - |gamma|`` slots, so this is the
    invariance defect of a single sample set.
    """
    level = samples.level
    if gamma.length > level.r - 1:
        raise InputError("need |gamma| <= r - 1")
    small = field_level(level.action, level.r - gamma.length, level.spacing)
    identity = level.action.group.identity_element
    F1 = translate_restrict(samples, gamma, small)
    F2 = translate_restrict(samples, identity, small)
    return prokhorov_fingerprints(F1, F2, small.slot_radius)

"""Finite map spaces between two warped levels.

Maps are recorded on the canonical lattice of the model ball: points
``(g, z)`` of ``Gamma x Z^m`` with model radius ``|g| + spacing * |z|_2 <= R``,
realized in a level by the anchor points ``g . exp_m0(spacing * z / t)`` of an
orbit net (see ``warpcone.spaces.build_orbit_net``).  Values are lattice
points ``(lam, w)`` of the target model ball.  Because both sides are lattice
points, the coordinate-wise floor fingerprint of a map is the map itself
(up to the fixed rescaling by ``spacing``).

Distances used for the (K, C) window are the warped distances of the levels,
so the admissible maps depend on t.  The agreement radius behind the 2^-R
metric uses the model radius, which is exactly subadditive under the group
translation ``(g, z) -> (h g, z)``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from warpcone.coarse.metric import DiscreteMap, FiniteMetricSpace, gh_distance_upper
from warpcone.errors import BoundaryError, InputError, ResourceLimitError
from warpcone.groups import GroupElement, GroupSpec, word_ball
from warpcone.spaces import ActionSpec, build_orbit_net
from warpcone.warped import WarpedLevel, warped_level

QI_TOL = 1e-9
DEFAULT_MAP_CAP = 2000


# -- lattice charts ----------------------------------------------------------------

def _zvectors(m: int, zmax: int):
    rng = range(-zmax, zmax + 1)
    return [tuple(z) for z in itertools.product(rng, repeat=m)]


def lattice_keys(group: GroupSpec, m: int, R: float, spacing: float = 1.0):
    """Lattice points ``(g.key, z)`` of model radius <= R, sorted by radius then key."""
    if R < 0:
        return []
    ball = word_ball(group, int(math.floor(R + 1e-9)))
    zs = _zvectors(m, int(math.floor(R / spacing + 1e-9)))
    out = []
    for g in ball:
        for z in zs:
            rad = g.length + spacing * math.sqrt(sum(c * c for c in z))
            if rad <= R + 1e-9:
                out.append((rad, g.key, z))
    out.sort()
    return [(k, z) for _, k, z in out]


def model_radius(group: GroupSpec, key, spacing: float = 1.0) -> float:
    g, z = key
    return group.length(g) + spacing * math.sqrt(sum(c * c for c in z))


def lattice_space(level: WarpedLevel, keys, label="lattice") -> FiniteMetricSpace:
    """Anchor points of ``keys`` with the warped distances of ``level``."""
    anchors = level.net.anchors
    missing = [k for k in keys if k not in anchors]
    if missing:
        raise BoundaryError(f"{label} point {missing[0]} has no anchor in the orbit net; enlarge the net")
    idx = np.array([anchors[k] for k in keys], dtype=np.int64)
    rows = level.distances_from(idx)[:, idx]
    rows = np.minimum(rows, rows.T)
    return FiniteMetricSpace(tuple(keys), rows, basepoint=0)


def orbit_level(action: ActionSpec, m0, t: float, radius: float, seed: int, spacing: float = 1.0,
                mesh_scale: float = 0.5, **net_kw):
    """Warped level on an orbit net whose anchors cover the lattice ball of ``radius``.

    The filler mesh is ``mesh_scale / t`` so that rescaled net gaps stay below
    ``mesh_scale``.  Returns ``(level, index of m0)``.
    """
    net = build_orbit_net(
        action.space, action, m0, t,
        orbit_radius=int(math.floor(radius + 1e-9)),
        lattice_radius=radius,
        eps=mesh_scale / t,
        seed=seed,
        spacing=spacing,
        **net_kw,
    )
    level = warped_level(net, action, t)
    zero = (action.group.identity, tuple([0] * action.space.dim))
    return level, net.anchors[zero]


# -- the map space -------------------------------------------------------------------

@dataclass(eq=False)
class MapSpaceLevel:
    """Enumerated basepointed orbit-preserving (K, C) maps at one level."""

    t: float
    K: float
    C: float
    R: float
    spacing: float
    source_group: GroupSpec
    target_group: GroupSpec
    source: FiniteMetricSpace
    target: FiniteMetricSpace
    values: np.ndarray
    domain_radius: np.ndarray
    weights: np.ndarray
    candidate_radius: float
    truncated: bool = False
    action_radius: int = 0
    delta: np.ndarray | None = None
    gamma_action: dict = field(default_factory=dict)
    action_elements: list = field(default_factory=list)

    def __len__(self):
        return len(self.values)

    @property
    def n_maps(self) -> int:
        return len(self.values)

    def map(self, i: int) -> DiscreteMap:
        return DiscreteMap(self.source, self.target, self.values[i])

    def maps(self):
        return [self.map(i) for i in range(len(self))]

    def radius_of(self, label) -> float:
        return model_radius(self.source_group, label, self.spacing)

    def weight_of(self, label) -> float:
        return float(self.weights[self.source.index_of(label)])

    def psi(self, i: int) -> dict:
        """Orbit part of map i: g.key -> lam.key."""
        out = {}
        for col, (g, z) in enumerate(self.source.labels):
            if not any(z):
                out[g] = self.target.labels[self.values[i, col]][0]
        return out

    def as_metric_space(self) -> FiniteMetricSpace:
        return FiniteMetricSpace(tuple(range(len(self))), self.delta, basepoint=None)

    def fingerprint(self, i: int) -> tuple:
        return fingerprint(self.map(i), self.spacing)

    def counting_bound(self, m: int, n: int) -> int:
        """(|S_Gamma| + 2m)^R (|S_Lambda| + 2n)^(KR + C)."""
        a = len(self.source_group.generators) + 2 * m
        b = len(self.target_group.generators) + 2 * n
        return a ** self.R * b ** (self.K * self.R + self.C)

    def to_json(self) -> str:
        doc = {
            "t": self.t,
            "K": self.K,
            "C": self.C,
            "R": self.R,
            "spacing": self.spacing,
            "truncated": self.truncated,
            "domain": [[list(g), list(z)] for g, z in self.source.labels],
            "target": [[list(g), list(z)] for g, z in self.target.labels],
            "maps": self.values.tolist(),
            "delta": self.delta.tolist() if self.delta is not None else None,
            "action": {
                str(el): self.gamma_action[el.key].tolist() for el in self.action_elements
            },
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def fingerprint(f: DiscreteMap, spacing: float = 1.0) -> tuple:
    """Coordinate-wise floor of the model coordinates of the values."""
    out = []
    for j in f.assignment:
        lam, w = f.target.labels[j]
        out.append((lam, tuple(int(math.floor(c * spacing + 1e-9)) for c in w)))
    return tuple(out)


def enumerate_map_space(
    source_level: WarpedLevel,
    target_level: WarpedLevel,
    m0: int,
    n0: int,
    K: float,
    C: float,
    R: float,
    spacing: float = 1.0,
    action_radius: int = 1,
    cap: int = DEFAULT_MAP_CAP,
    allow_truncation: bool = True,
) -> MapSpaceLevel:
    """Enumerate the basepointed, orbit-preserving (K, C) maps of the R-ball.

    The orbit part (values on ``(g, 0)``) is chosen first, then the remaining
    lattice points, each restricted by the (K, C) window against every point
    already assigned.  Values range over target lattice points of model
    radius <= K R + C; the stored target region is larger by
    ``K * action_radius + C`` so that translated maps stay representable.
    """
    if R <= 0:
        raise InputError("map space radius must be positive")
    if K < 1 or C < 0:
        raise InputError("need K >= 1 and C >= 0")
    Gam = source_level.action.group
    Lam = target_level.action.group
    m = source_level.net.space.dim
    n = target_level.net.space.dim
    dom_keys = lattice_keys(Gam, m, R, spacing)
    region = K * R + C + K * action_radius + C
    tgt_keys = lattice_keys(Lam, n, region, spacing)
    src = lattice_space(source_level, dom_keys, "source")
    tgt = lattice_space(target_level, tgt_keys, "target")
    anchors_src = source_level.net.anchors
    anchors_tgt = target_level.net.anchors
    if anchors_src[dom_keys[0]] != m0 or anchors_tgt[tgt_keys[0]] != n0:
        raise InputError("m0 / n0 must be the anchors of the lattice origins")

    cand_radius = K * R + C
    tgt_rad = np.array([model_radius(Lam, k, spacing) for k in tgt_keys])
    cand = tgt_rad <= cand_radius + 1e-9
    on_orbit_t = np.array([not any(z) for _, z in tgt_keys])
    on_orbit_s = [not any(z) for _, z in dom_keys]

    # domain order: basepoint, orbit points, then the rest (each by radius)
    order = [0] + [i for i in range(1, len(dom_keys)) if on_orbit_s[i]]
    order += [i for i in range(1, len(dom_keys)) if not on_orbit_s[i]]
    DX = src.dist
    DY = tgt.dist
    values = np.full(len(dom_keys), -1, dtype=np.int64)
    values[0] = 0
    found = []
    seen = set()
    truncated = False

    def allowed(pos):
        x = order[pos]
        mask = cand & (on_orbit_t if on_orbit_s[x] else True)
        for p in range(pos):
            a = order[p]
            d = DX[a, x]
            row = DY[values[a]]
            mask = mask & (row <= K * d + C + QI_TOL) & (d / K - C <= row + QI_TOL)
            if not mask.any():
                break
        return np.nonzero(mask)[0]

    def walk(pos):
        nonlocal truncated
        if truncated:
            return
        if pos == len(order):
            fp = tuple(values.tolist())
            if fp not in seen:
                if len(found) >= cap:
                    truncated = True
                    return
                seen.add(fp)
                found.append(values.copy())
            return
        x = order[pos]
        for v in allowed(pos):
            values[x] = v
            walk(pos + 1)
            if truncated:
                return
        values[x] = -1

    walk(1)
    if truncated and not allow_truncation:
        raise ResourceLimitError("map space enumeration", cap)
    vals = np.array(found, dtype=np.int64).reshape(len(found), len(dom_keys))
    # canonical order: lexicographic in the values, so results do not depend on search order
    if len(vals):
        vals = vals[np.lexsort(vals.T[::-1])]
    weights = source_level.net.weights[[anchors_src[k] for k in dom_keys]]
    level = MapSpaceLevel(
        t=source_level.t,
        K=K,
        C=C,
        R=R,
        spacing=spacing,
        source_group=Gam,
        target_group=Lam,
        source=src,
        target=tgt,
        values=vals,
        domain_radius=np.array([model_radius(Gam, k, spacing) for k in dom_keys]),
        weights=np.asarray(weights, dtype=float),
        candidate_radius=cand_radius,
        truncated=truncated,
        action_radius=action_radius,
    )
    level.delta = delta_matrix(level)
    _fill_action(level)
    return level


# -- the 2^-R metric ---------------------------------------------------------------------

def _agreement(level: MapSpaceLevel, psi: DiscreteMap, xi: DiscreteMap):
    """Sorted (radius, label) of points where the maps disagree on their common domain."""
    if psi.target is not xi.target and psi.target.labels != xi.target.labels:
        raise InputError("maps have different targets")
    for f in (psi, xi):
        base = f.source.basepoint if f.source.basepoint is not None else 0
        if f.target.labels[f.assignment[base]] != f.target.labels[0]:
            raise InputError("maps do not share the basepoint image")
    a = psi.as_dict()
    b = xi.as_dict()
    diff = [lab for lab in a if lab in b and a[lab] != b[lab]]
    return sorted((level.radius_of(lab), lab) for lab in diff)


def delta_metric(psi: DiscreteMap, xi: DiscreteMap, level: MapSpaceLevel) -> float:
    """2^-R* where R* is the model radius of the nearest disagreement (0 if none)."""
    diff = _agreement(level, psi, xi)
    return 0.0 if not diff else 2.0 ** (-diff[0][0])


def tilde_delta_metric(psi: DiscreteMap, xi: DiscreteMap, level: MapSpaceLevel) -> float:
    """Measure-aware variant: excise the nearest disagreements at the cost of their mass.

    Returns ``min_j max(mass(A_j), delta_j)`` where ``A_j`` holds the j nearest
    disagreement points and ``delta_j`` is the 2^-R metric on the rest.
    """
    diff = _agreement(level, psi, xi)
    best = math.inf
    mass = 0.0
    for j in range(len(diff) + 1):
        rest = 2.0 ** (-diff[j][0]) if j < len(diff) else 0.0
        best = min(best, max(mass, rest))
        if j < len(diff):
            mass += level.weight_of(diff[j][1])
    return best


def delta_matrix(level: MapSpaceLevel) -> np.ndarray:
    V = level.values
    n = len(V)
    D = np.zeros((n, n))
    pending = ~np.eye(n, dtype=bool)
    # domain columns are sorted by radius: the first differing column decides
    for col in range(V.shape[1]):
        hit = pending & (V[:, col][:, None] != V[:, col][None, :])
        D[hit] = 2.0 ** (-level.domain_radius[col])
        pending &= ~hit
    D[pending] = 0.0
    D.setflags(write=False)
    return D


# -- the group action on maps --------------------------------------------------------------

def gamma_act(gamma: GroupElement, psi: DiscreteMap, psi_assignment: dict | None, level: MapSpaceLevel) -> DiscreteMap:
    """[M_gamma Psi](m) = psi(gamma^-1)^-1 . Psi(gamma^-1 m).

    The result is defined on the lattice ball of radius ``r - |gamma|``, where
    r is the largest model radius in the domain of ``psi``.
    """
    G, L = level.source_group, level.target_group
    values = psi.as_dict()
    radius = max(level.radius_of(lab) for lab in values)
    new_radius = radius - gamma.length
    if new_radius < -1e-9:
        raise BoundaryError(f"|gamma| = {gamma.length} exceeds the domain radius {radius}")
    inv = G.inverse(gamma.key)
    zero = next(iter(values))[1]
    zero = tuple(0 for _ in zero)
    if psi_assignment is None:
        lam = values.get((inv, zero))
        if lam is None:
            raise BoundaryError("gamma^-1 m0 lies outside the domain")
        lam = lam[0]
    else:
        lam = psi_assignment[inv]
    lam_inv = L.inverse(lam)
    labels, targets = [], []
    for lab in psi.source.labels:
        if level.radius_of(lab) > new_radius + 1e-9:
            continue
        g, z = lab
        mu, w = values[(G.multiply(inv, g), z)]
        key = (L.multiply(lam_inv, mu), w)
        try:
            targets.append(psi.target.index_of(key))
        except KeyError:
            raise BoundaryError(f"translated value {key} leaves the stored target region") from None
        labels.append(psi.source.index_of(lab))
    source = psi.source.subspace(labels, basepoint=0)
    return DiscreteMap(source, psi.target, np.array(targets, dtype=np.int64))


def restrict(f: DiscreteMap, radius: float, level: MapSpaceLevel) -> DiscreteMap:
    keep = [i for i, lab in enumerate(f.source.labels) if level.radius_of(lab) <= radius + 1e-9]
    return DiscreteMap(f.source.subspace(keep, basepoint=0), f.target, f.assignment[keep])


def _fill_action(level: MapSpaceLevel):
    """Tabulate M_gamma on stored maps: index of the stored map agreeing on the smaller ball."""
    elements = word_ball(level.source_group, level.action_radius)
    level.action_elements = elements
    for el in elements:
        table = np.full(len(level), -1, dtype=np.int64)
        small = level.domain_radius <= (level.domain_radius.max() - el.length) + 1e-9
        cols = np.nonzero(small)[0]
        lookup = {}
        for j in range(len(level)):
            lookup.setdefault(tuple(level.values[j, cols].tolist()), j)
        for i in range(len(level)):
            try:
                acted = gamma_act(el, level.map(i), None, level)
            except BoundaryError:
                continue
            # acted domain is the ball of the largest stored radius minus |gamma|
            vals = dict(zip(acted.source.labels, acted.assignment.tolist()))
            key = tuple(vals.get(level.source.labels[c], -2) for c in cols)
            table[i] = lookup.get(key, -1)
        level.gamma_action[el.key] = table


def equicontinuity_delta(eps: float, gamma: GroupElement) -> float:
    """Admissible delta for a given eps: eps * 2^|gamma|."""
    if eps <= 0:
        raise InputError("eps must be positive")
    return eps * 2.0**gamma.length


# -- maps between map spaces ------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LevelMap:
    """A map from the stored maps of one level to those of another."""

    source: MapSpaceLevel
    target: MapSpaceLevel
    assignment: np.ndarray

    def as_discrete_map(self) -> DiscreteMap:
        return DiscreteMap(self.source.as_metric_space(), self.target.as_metric_space(), self.assignment)


def _act_index(level: MapSpaceLevel, gamma: GroupElement, i: int) -> int:
    table = level.gamma_action.get(gamma.key)
    if table is None:
        raise BoundaryError(f"gamma = {gamma} is outside the tabulated action ball")
    j = int(table[i])
    if j < 0:
        raise BoundaryError(f"M_gamma of map {i} is not among the stored maps")
    return j


def equivariance_defect(f: LevelMap, gamma: GroupElement) -> float:
    """sup_x delta(M_gamma f(x), f(M_gamma x))."""
    worst = 0.0
    for i in range(len(f.source)):
        a = _act_index(f.target, gamma, int(f.assignment[i]))
        b = int(f.assignment[_act_index(f.source, gamma, i)])
        worst = max(worst, float(f.target.delta[a, b]))
    return worst


def act_on_set(level: MapSpaceLevel, gamma: GroupElement, indices) -> set:
    return {_act_index(level, gamma, int(i)) for i in indices}


def gh_cauchy_diagnostic(levels, budget: int = 64) -> list[float]:
    """GH distances (upper bounds beyond ``budget``) between consecutive levels."""
    return [
        gh_distance_upper(a.as_metric_space(), b.as_metric_space(), budget)
        for a, b in zip(levels[:-1], levels[1:])
    ]

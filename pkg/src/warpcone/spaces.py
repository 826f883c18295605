"""Compact model manifolds, finite nets on them, and isometric group actions.

Points are stored as 2-D float arrays of shape ``(n, coord_dim)``:

* circle of circumference 1: one coordinate in [0, 1);
* flat torus [0, 1)^d: d coordinates;
* SO(3): unit quaternions (w, x, y, z); q and -q are the same rotation.

All measures are the normalized Lebesgue/Haar measure.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Mapping

import numpy as np
from scipy.spatial import cKDTree

from warpcone.errors import InputError, ResourceLimitError
from warpcone.groups import GroupElement, GroupSpec, word_ball

QUAT_TOL = 1e-9
DEFAULT_NET_CAP = 50_000
DEFAULT_WEIGHT_SAMPLES = 100_000
DEFAULT_PROBES = 10_000
MIN_POOL = 20_000  # candidate pool for farthest-point selection; small pools leave holes in coarse nets


def _wrap01(x):
    x = np.mod(x, 1.0)
    # np.mod can return exactly 1.0 for tiny negative inputs
    return np.where(x >= 1.0, 0.0, x)


def _centered(x):
    """Wrap differences into [-1/2, 1/2)."""
    return np.mod(x + 0.5, 1.0) - 0.5


# -- quaternion helpers --------------------------------------------------------

def quat_mul(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    aw, ax, ay, az = np.moveaxis(a, -1, 0)
    bw, bx, by, bz = np.moveaxis(b, -1, 0)
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )


def quat_conj(q):
    q = np.asarray(q, dtype=float)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def quat_from_rotvec(v):
    v = np.asarray(v, dtype=float)
    theta = np.linalg.norm(v, axis=-1, keepdims=True)
    half = 0.5 * theta
    # sin(x)/x with a series fallback near 0
    with np.errstate(invalid="ignore", divide="ignore"):
        k = np.where(theta > 1e-8, np.sin(half) / np.where(theta > 0, theta, 1.0), 0.5 - theta**2 / 48.0)
    return np.concatenate([np.cos(half), k * v], axis=-1)


def rotvec_from_quat(q):
    q = np.asarray(q, dtype=float)
    q = np.where(q[..., :1] < 0, -q, q)
    w = q[..., 0:1]
    v = q[..., 1:]
    s = np.linalg.norm(v, axis=-1, keepdims=True)
    theta = 2.0 * np.arctan2(s, w)
    with np.errstate(invalid="ignore", divide="ignore"):
        k = np.where(s > 1e-12, theta / np.where(s > 0, s, 1.0), 2.0 / np.maximum(w, 1e-300))
    return k * v


# -- spaces ---------------------------------------------------------------------

class CompactSpace:
    """A compact Riemannian manifold with closed-form geodesics.

    ``dim`` is the manifold dimension m, ``coord_dim`` the width of the point
    arrays.  The measure is normalized so ``total_mass`` is always 1.
    """

    kind: str
    dim: int
    coord_dim: int
    total_mass = 1.0

    def check(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[-1] != self.coord_dim:
            raise InputError(f"{self.kind} points need {self.coord_dim} coordinates, got {pts.shape[-1]}")
        return pts

    def distance(self, p, q) -> float:
        return float(self.pairwise(self.check(p), self.check(q))[0, 0])

    def pairwise(self, P, Q) -> np.ndarray:
        raise NotImplementedError

    def dist_to(self, P, q) -> np.ndarray:
        """Distances from every row of P to the single point q."""
        return self.pairwise(self.check(P), self.check(q))[:, 0]

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError

    def exp(self, p, v) -> np.ndarray:
        """Point reached from p along tangent vector v (unrescaled units)."""
        raise NotImplementedError

    def log(self, p, q) -> np.ndarray:
        """Tangent vector at p pointing to q, inverse of ``exp`` near p."""
        raise NotImplementedError

    @property
    def diameter(self) -> float:
        raise NotImplementedError

    def ball_volume(self, radius: float) -> float:
        """Normalized measure of a small geodesic ball (used for size estimates)."""
        raise NotImplementedError

    def index(self, points) -> "NearestIndex":
        return NearestIndex(self, points)

    def describe(self) -> dict:
        return {"kind": self.kind, "dim": self.dim}


class Circle(CompactSpace):
    kind = "circle"
    dim = 1
    coord_dim = 1

    def pairwise(self, P, Q):
        d = np.abs(_centered(P[:, None, 0] - Q[None, :, 0]))
        return d

    def sample(self, rng, n):
        return rng.random((n, 1))

    def exp(self, p, v):
        return _wrap01(self.check(p) + np.atleast_2d(v))

    def log(self, p, q):
        return _centered(self.check(q) - self.check(p))

    @property
    def diameter(self):
        return 0.5

    def ball_volume(self, radius):
        return min(1.0, 2.0 * radius)


class Torus(CompactSpace):
    kind = "torus"

    def __init__(self, dim: int = 2):
        if dim < 1:
            raise InputError("torus dimension must be >= 1")
        self.dim = dim
        self.coord_dim = dim

    def pairwise(self, P, Q):
        diff = _centered(P[:, None, :] - Q[None, :, :])
        return np.sqrt(np.sum(diff * diff, axis=-1))

    def sample(self, rng, n):
        return rng.random((n, self.dim))

    def exp(self, p, v):
        return _wrap01(self.check(p) + np.atleast_2d(v))

    def log(self, p, q):
        return _centered(self.check(q) - self.check(p))

    @property
    def diameter(self):
        return 0.5 * math.sqrt(self.dim)

    def ball_volume(self, radius):
        d = self.dim
        return min(1.0, math.pi ** (d / 2) / math.gamma(d / 2 + 1) * radius**d)

    def describe(self):
        return {"kind": self.kind, "dim": self.dim}


class RotationGroup(CompactSpace):
    """SO(3) with the bi-invariant angle metric and normalized Haar measure."""

    kind = "so3"
    dim = 3
    coord_dim = 4

    def check(self, points):
        pts = super().check(points)
        norms = np.linalg.norm(pts, axis=-1)
        if np.any(np.abs(norms - 1.0) > QUAT_TOL):
            raise InputError("rotation points must be unit quaternions (|norm - 1| <= 1e-9)")
        return pts

    def pairwise(self, P, Q):
        # angle of P^-1 Q, computed with atan2 for accuracy near 0
        rel = quat_mul(quat_conj(P)[:, None, :], Q[None, :, :])
        w = np.abs(rel[..., 0])
        s = np.linalg.norm(rel[..., 1:], axis=-1)
        return 2.0 * np.arctan2(s, w)

    def sample(self, rng, n):
        q = rng.standard_normal((n, 4))
        return q / np.linalg.norm(q, axis=1, keepdims=True)

    def exp(self, p, v):
        return quat_mul(self.check(p), quat_from_rotvec(np.atleast_2d(v)))

    def log(self, p, q):
        return rotvec_from_quat(quat_mul(quat_conj(self.check(p)), self.check(q)))

    @property
    def diameter(self):
        return math.pi

    def ball_volume(self, radius):
        # Haar measure of {angle <= r} is (r - sin r) / pi
        r = min(radius, math.pi)
        return (r - math.sin(r)) / math.pi


def make_space(kind: str, dim: int | None = None) -> CompactSpace:
    kind = kind.lower()
    if kind == "circle":
        return Circle()
    if kind == "torus":
        return Torus(2 if dim is None else int(dim))
    if kind in ("so3", "rotation", "rotation-group-3d"):
        return RotationGroup()
    raise InputError(f"unknown space kind {kind!r}")


def geodesic_distance(space: CompactSpace, p, q) -> float:
    return space.distance(p, q)


class NearestIndex:
    """Nearest-neighbour queries returning geodesic distances."""

    def __init__(self, space: CompactSpace, points):
        self.space = space
        self.points = np.asarray(points, dtype=float)
        n = len(self.points)
        if isinstance(space, RotationGroup):
            self._tree = cKDTree(np.concatenate([self.points, -self.points]))
            self._n = n
        else:
            self._tree = cKDTree(_wrap01(self.points), boxsize=1.0)
            self._n = None

    def query(self, queries, k: int = 1):
        q = np.atleast_2d(np.asarray(queries, dtype=float))
        if self._n is None:
            dist, idx = self._tree.query(_wrap01(q), k=k)
            return dist, idx
        dist, idx = self._tree.query(q, k=k)
        idx = idx % self._n
        # chordal -> angle: |q1 -+ q2|^2 = 2 - 2|<q1,q2>|
        cos_half = np.clip(1.0 - dist**2 / 2.0, -1.0, 1.0)
        return 2.0 * np.arccos(cos_half), idx

    def pairs_within(self, radius):
        """Unordered pairs (i < j) at geodesic distance <= radius, with distances."""
        if self._n is None:
            pairs = self._tree.query_pairs(radius + 1e-15, output_type="ndarray")
        else:
            chord = math.sqrt(max(0.0, 2.0 - 2.0 * math.cos(min(radius, math.pi) / 2.0)))
            pairs = self._tree.query_pairs(chord + 1e-15, output_type="ndarray") % self._n
        if len(pairs) == 0:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64), np.zeros(0)
        i = np.minimum(pairs[:, 0], pairs[:, 1])
        j = np.maximum(pairs[:, 0], pairs[:, 1])
        keep = i != j
        i, j = i[keep], j[keep]
        uniq = np.unique(np.stack([i, j], axis=1), axis=0)
        i, j = uniq[:, 0], uniq[:, 1]
        d = _rowwise(self.space, self.points[i], self.points[j])
        keep = d <= radius
        return i[keep], j[keep], d[keep]

    def within(self, queries, radius):
        """Indices of points within geodesic ``radius`` of each query."""
        q = np.atleast_2d(np.asarray(queries, dtype=float))
        if self._n is None:
            return [sorted(set(r)) for r in self._tree.query_ball_point(_wrap01(q), radius + 1e-15)]
        chord = math.sqrt(max(0.0, 2.0 - 2.0 * math.cos(min(radius, math.pi) / 2.0)))
        return [sorted({i % self._n for i in r}) for r in self._tree.query_ball_point(q, chord + 1e-15)]


# -- nets -------------------------------------------------------------------------

def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Net:
    """Finite eps-net with Monte-Carlo Voronoi weights."""

    space: CompactSpace
    points: np.ndarray
    mesh: float
    weights: np.ndarray
    weight_samples: int
    seed: int
    probe_max: float = float("nan")
    anchors: Mapping = field(default_factory=dict)

    def __len__(self):
        return len(self.points)

    @cached_property
    def index(self) -> NearestIndex:
        return self.space.index(self.points)

    def nearest(self, points):
        dist, idx = self.index.query(points)
        return np.atleast_1d(idx), np.atleast_1d(dist)

    def distance_matrix(self) -> np.ndarray:
        return self.space.pairwise(self.points, self.points)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["index"] + [f"x{i}" for i in range(self.space.coord_dim)] + ["weight"])
            for i, (p, w) in enumerate(zip(self.points, self.weights)):
                writer.writerow([i] + [repr(float(c)) for c in p] + [repr(float(w))])


def _expected_count(space, eps):
    return int(math.ceil(1.0 / max(space.ball_volume(eps), 1e-300)))


def _farthest_point(space, pool, seeds, eps, cap):
    """Greedy farthest-point selection on ``pool`` until its covering radius <= eps."""
    chosen = [np.asarray(s) for s in seeds]
    if chosen:
        mind = np.min(space.pairwise(pool, np.vstack(chosen)), axis=1)
    else:
        chosen.append(pool[0])
        mind = space.dist_to(pool, pool[0])
    while True:
        j = int(np.argmax(mind))
        if mind[j] <= eps:
            break
        if len(chosen) >= cap:
            raise ResourceLimitError("net point count", cap)
        chosen.append(pool[j])
        mind = np.minimum(mind, space.dist_to(pool, pool[j]))
    return np.vstack(chosen)


def _fill_circle_gaps(points, eps):
    """Insert points so every gap on the circle is below 2 eps (exact covering).

    Gaps are kept strictly below ``2 eps`` so that neighbouring points are
    always joined by the ``d <= 2 mesh`` edges of a warped level despite
    rounding.
    """
    xs = np.sort(points[:, 0])
    extra = []
    gaps = np.diff(np.concatenate([xs, [xs[0] + 1.0]]))
    limit = 2 * eps * (1.0 - 1e-6)
    for x, g in zip(xs, gaps):
        if g > limit:
            k = int(math.floor(g / limit)) + 1
            extra.extend(_wrap01(x + g * np.arange(1, k) / k))
    if extra:
        points = np.vstack([points, np.array(extra)[:, None]])
    return points


def voronoi_weights(space, points, samples, rng):
    idx = NearestIndex(space, points)
    counts = np.zeros(len(points), dtype=np.int64)
    chunk = 200_000
    done = 0
    while done < samples:
        n = min(chunk, samples - done)
        _, nn = idx.query(space.sample(rng, n))
        counts += np.bincount(np.atleast_1d(nn), minlength=len(points))
        done += n
    return counts / samples


def _finish_net(space, points, eps, seed, rng, probes, weight_samples, anchors=None):
    # probabilistic covering certificate; failing probes are added to the net
    probe = space.sample(rng, probes)
    while True:
        dist, idx = NearestIndex(space, points).query(probe)
        dist = np.atleast_1d(dist)
        worst = int(np.argmax(dist))
        if dist[worst] <= eps:
            break
        points = np.vstack([points, probe[worst : worst + 1]])
    weights = voronoi_weights(space, points, weight_samples, rng)
    return Net(
        space=space,
        points=_readonly(points),
        mesh=float(eps),
        weights=_readonly(weights),
        weight_samples=int(weight_samples),
        seed=int(seed),
        probe_max=float(np.max(dist)),
        anchors=dict(anchors or {}),
    )


def build_net(
    space: CompactSpace,
    eps: float,
    seed: int,
    cap: int = DEFAULT_NET_CAP,
    weight_samples: int = DEFAULT_WEIGHT_SAMPLES,
    probes: int = DEFAULT_PROBES,
) -> Net:
    """Greedy farthest-point net with covering radius <= eps.

    The covering radius is certified by ``probes`` uniform probes (exactly on
    the circle).  Voronoi weights use ``max(weight_samples, 100 n)`` samples.
    """
    if eps <= 0:
        raise InputError("net mesh must be positive")
    expected = _expected_count(space, eps)
    if expected > cap:
        raise ResourceLimitError(f"expected net size {expected} for eps={eps}", cap)
    rng = np.random.default_rng(seed)
    pool = space.sample(rng, int(min(400_000, max(MIN_POOL, 40 * expected))))
    points = _farthest_point(space, pool, [], eps, cap)
    if isinstance(space, Circle):
        points = _fill_circle_gaps(points, eps)
    samples = max(int(weight_samples), 100 * len(points))
    return _finish_net(space, points, eps, seed, rng, probes, samples)


def build_orbit_net(
    space: CompactSpace,
    action: "ActionSpec",
    m0,
    t: float,
    orbit_radius: int,
    lattice_radius: float,
    eps: float,
    seed: int,
    spacing: float = 1.0,
    cap: int = DEFAULT_NET_CAP,
    weight_samples: int = DEFAULT_WEIGHT_SAMPLES,
    probes: int = DEFAULT_PROBES,
) -> Net:
    """Net containing the exact orbit-lattice points g . exp_m0(spacing * z / t).

    ``g`` runs over the word ball of radius ``orbit_radius`` and ``z`` over
    integer vectors with ``spacing * |z|_1 <= lattice_radius``.  These anchor
    points are recorded in ``Net.anchors`` as ``(g.key, z) -> index``; snapping
    a translated anchor onto another anchor is then exact.  The rest of the
    space is covered to mesh ``eps`` by farthest-point filler points.
    """
    m0 = space.check(m0)
    zmax = int(math.floor(lattice_radius / spacing + 1e-9))
    zs = [z for z in np.ndindex(*([2 * zmax + 1] * space.dim))]
    zs = [tuple(int(c) - zmax for c in z) for z in zs]
    zs = sorted((z for z in zs if sum(abs(c) for c in z) <= zmax), key=lambda z: (sum(abs(c) for c in z), z))
    base = {z: space.exp(m0, np.array(z, dtype=float) * spacing / t) for z in zs}
    anchors = {}
    pts = []
    for el in word_ball(action.group, orbit_radius):
        for z in zs:
            p = act(action, el, base[z])
            if pts:
                d = space.dist_to(np.vstack(pts), p[0])
                j = int(np.argmin(d))
                if d[j] <= 1e-12:
                    anchors[(el.key, z)] = j
                    continue
            anchors[(el.key, z)] = len(pts)
            pts.append(p[0])
    pts = np.vstack(pts)
    if len(pts) > cap:
        raise ResourceLimitError("orbit net anchor count", cap)
    rng = np.random.default_rng(seed)
    expected = _expected_count(space, eps)
    pool = space.sample(rng, int(min(400_000, max(MIN_POOL, 40 * expected))))
    points = _farthest_point(space, pool, list(pts), eps, cap)
    if isinstance(space, Circle):
        points = _fill_circle_gaps(points, eps)
    samples = max(int(weight_samples), 100 * len(points))
    return _finish_net(space, points, eps, seed, rng, probes, samples, anchors)


# -- actions ------------------------------------------------------------------------

GeneratorMap = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class ActionSpec:
    """An action of ``group`` on ``space`` through one isometry per generator."""

    group: GroupSpec
    space: CompactSpace
    generator_maps: Mapping[str, GeneratorMap]
    free: bool = True
    measure_preserving: bool = True
    ergodic: bool = True
    description: Mapping = field(default_factory=dict)

    def __post_init__(self):
        missing = set(self.group.generators) - set(self.generator_maps)
        if missing:
            raise InputError(f"action lacks maps for generators {sorted(missing)}")


def _positive_generators(group):
    return group.generators[0::2]


def circle_rotation(group: GroupSpec, angles, **flags) -> ActionSpec:
    """Rotate the circle by ``angles[i]`` for the i-th positive generator."""
    angles = [float(a) for a in np.atleast_1d(angles)]
    pos = _positive_generators(group)
    if len(angles) != len(pos):
        raise InputError(f"need {len(pos)} rotation angles, got {len(angles)}")
    maps = {}
    for label, a in zip(pos, angles):
        maps[label] = _shift(a)
        maps[group.inverse_label(label)] = _shift(-a)
    desc = {"kind": "rotation", "angles": angles}
    return ActionSpec(group, Circle(), maps, description=desc, **flags)


def torus_translation(group: GroupSpec, vectors, dim: int | None = None, **flags) -> ActionSpec:
    vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
    pos = _positive_generators(group)
    if len(vectors) != len(pos):
        raise InputError(f"need {len(pos)} translation vectors, got {len(vectors)}")
    space = Torus(dim or vectors.shape[1])
    maps = {}
    for label, v in zip(pos, vectors):
        maps[label] = _shift(v)
        maps[group.inverse_label(label)] = _shift(-v)
    desc = {"kind": "translation", "vectors": vectors.tolist()}
    return ActionSpec(group, space, maps, description=desc, **flags)


def so3_rotation(group: GroupSpec, rotvecs, **flags) -> ActionSpec:
    """Left multiplication on SO(3) by the rotations with the given rotation vectors."""
    rotvecs = np.atleast_2d(np.asarray(rotvecs, dtype=float))
    pos = _positive_generators(group)
    if len(rotvecs) != len(pos):
        raise InputError(f"need {len(pos)} rotation vectors, got {len(rotvecs)}")
    maps = {}
    for label, v in zip(pos, rotvecs):
        g = quat_from_rotvec(v[None, :])[0]
        maps[label] = _left_mul(g)
        maps[group.inverse_label(label)] = _left_mul(quat_conj(g))
    desc = {"kind": "so3", "rotvecs": rotvecs.tolist()}
    return ActionSpec(group, RotationGroup(), maps, description=desc, **flags)


def trivial_action(group: GroupSpec, space: CompactSpace) -> ActionSpec:
    maps = {label: _identity for label in group.generators}
    return ActionSpec(group, space, maps, free=False, ergodic=False, description={"kind": "trivial"})


def _identity(p):
    return np.array(p, dtype=float)


def _shift(v):
    v = np.asarray(v, dtype=float)

    def apply(p):
        return _wrap01(np.asarray(p, dtype=float) + v)

    return apply


def _left_mul(g):
    def apply(p):
        return quat_mul(g, np.asarray(p, dtype=float))

    return apply


def act(action: ActionSpec, gamma, p) -> np.ndarray:
    """Left action gamma . p; the canonical word is applied right to left."""
    word = gamma.canonical_word if isinstance(gamma, GroupElement) else action.group.word_of(gamma)
    out = np.atleast_2d(np.asarray(p, dtype=float)).copy()
    for label in reversed(word):
        out = action.generator_maps[label](out)
    return out


# -- audits ----------------------------------------------------------------------------

@dataclass
class AuditReport:
    samples: int
    isometry_defect: float
    inverse_defect: float
    measure_defect: dict
    freeness: dict
    non_free: list
    declared: dict

    @property
    def measure_noise_bound(self) -> float:
        return 3.0 / math.sqrt(self.samples)

    def as_dict(self):
        return {
            "samples": self.samples,
            "isometry_defect": self.isometry_defect,
            "inverse_defect": self.inverse_defect,
            "measure_defect": self.measure_defect,
            "measure_noise_bound": self.measure_noise_bound,
            "freeness": self.freeness,
            "non_free": self.non_free,
            "declared": self.declared,
        }


def action_audit(action: ActionSpec, net: Net, samples: int, seed: int = 0, radius: int = 3,
                 free_tol: float = 1e-12) -> AuditReport:
    """Numerical spot checks of the isometric / measure-preserving / free hypotheses."""
    if samples < 1:
        raise InputError("audit needs at least one sample")
    space = action.space
    rng = np.random.default_rng(seed)
    P = space.sample(rng, samples)
    Q = space.sample(rng, samples)
    base = _rowwise(space, P, Q)
    iso = 0.0
    inv = 0.0
    measure = {}
    _, cell_before = net.index.query(P)
    hist_before = np.bincount(np.atleast_1d(cell_before), minlength=len(net)) / samples
    for label, f in action.generator_maps.items():
        fp, fq = f(P), f(Q)
        iso = max(iso, float(np.max(np.abs(_rowwise(space, fp, fq) - base))))
        back = action.generator_maps[action.group.inverse_label(label)](fp)
        inv = max(inv, float(np.max(_rowwise(space, back, P))))
        _, cell_after = net.index.query(fp)
        hist_after = np.bincount(np.atleast_1d(cell_after), minlength=len(net)) / samples
        measure[label] = float(np.max(np.abs(hist_after - hist_before)))
    freeness = {}
    non_free = []
    for el in word_ball(action.group, radius):
        if el.length == 0:
            continue
        moved = act(action, el, net.points)
        disp = float(np.min(_rowwise(space, moved, net.points)))
        freeness[str(el)] = disp
        if disp <= free_tol:
            non_free.append(str(el))
    declared = {"free": action.free, "measure_preserving": action.measure_preserving, "ergodic": action.ergodic}
    return AuditReport(samples, iso, inv, measure, freeness, non_free, declared)


def _rowwise(space, A, B):
    if isinstance(space, RotationGroup):
        rel = quat_mul(quat_conj(A), B)
        return 2.0 * np.arctan2(np.linalg.norm(rel[:, 1:], axis=1), np.abs(rel[:, 0]))
    diff = _centered(A - B)
    return np.sqrt(np.sum(diff * diff, axis=1))


def orbit_points(action: ActionSpec, m0, r: int, cap: int | None = None):
    ball = word_ball(action.group, int(math.floor(r)), **({"cap": cap} if cap else {}))
    pts = np.vstack([act(action, el, m0) for el in ball])
    return ball, pts


def coverage_defect(action: ActionSpec, net: Net, t: float, r: float, m0, cap: int | None = None) -> float:
    """Net mass farther than r/t from every orbit point g.m0 with |g| <= r."""
    if t <= 0 or r <= 0:
        raise InputError("coverage needs t > 0 and r > 0")
    _, orbit = orbit_points(action, m0, r, cap)
    idx = action.space.index(orbit)
    dist, _ = idx.query(net.points)
    uncovered = np.atleast_1d(dist) > r / t
    return float(np.sum(net.weights[uncovered]))


def rowwise_distance(space: CompactSpace, A, B) -> np.ndarray:
    return _rowwise(space, np.atleast_2d(A), np.atleast_2d(B))

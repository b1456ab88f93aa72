"""Multiscale mass-threshold coverings of the unit box, clusters, enlarged
regions and bounded-overlap ball covers.

All geometry lives in the root box ``[-1/2, 1/2]^d``.  A level-``n`` cube with
integer index ``i`` spans ``[-1/2 + i eps^n, -1/2 + (i + 1) eps^n]`` per axis.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

SCHEMA_VERSION = 1
DEFAULT_TAU = 0.375
DEFAULT_MAX_DEPTH = 20
ALLOWED_EPS = (Fraction(1, 2), Fraction(1, 3))


class GeometryError(ValueError):
    """Invalid geometric input."""


class EmptyCoverError(GeometryError):
    """A ball cover was requested for a level without class-2 cubes."""


class ConsistencyError(RuntimeError):
    """An internal invariant of a construction failed."""


def parse_epsilon(eps) -> Fraction:
    frac = Fraction(eps).limit_denominator(10) if not isinstance(eps, str) else Fraction(eps)
    if frac not in ALLOWED_EPS:
        raise GeometryError(f"epsilon must be 1/2 or 1/3, got {eps}")
    return frac


@dataclass(frozen=True)
class Cube:
    level: int
    index: tuple
    side: Fraction
    mass: float = 0.0

    def __post_init__(self):
        if self.level < 0:
            raise GeometryError("level must be non-negative")
        if self.mass < 0 or not math.isfinite(self.mass):
            raise GeometryError(f"cube mass must be finite and non-negative, got {self.mass}")
        cells = round(1 / self.side)
        if any(i < 0 or i >= cells for i in self.index):
            raise GeometryError(f"cube index {self.index} lies outside the root box")

    @property
    def dim(self) -> int:
        return len(self.index)

    @property
    def lower(self) -> np.ndarray:
        return -0.5 + np.array(self.index, dtype=float) * float(self.side)

    @property
    def upper(self) -> np.ndarray:
        return self.lower + float(self.side)

    @property
    def center(self) -> np.ndarray:
        return self.lower + float(self.side) / 2

    def key(self):
        return (self.level, self.index)


def make_cube(level: int, index, eps: Fraction, mass: float = 0.0) -> Cube:
    return Cube(level, tuple(int(i) for i in index), eps ** level, float(mass))


@dataclass(frozen=True, eq=False)
class Cluster:
    level: int
    members: tuple
    enlarged_mass: float = 0.0
    klass: int = 0
    tau: float = DEFAULT_TAU

    @property
    def mass(self) -> float:
        return float(sum(c.mass for c in self.members))

    @property
    def side(self) -> Fraction:
        return self.members[0].side

    @property
    def indices(self) -> np.ndarray:
        return np.array([c.index for c in self.members], dtype=np.int64)


def detect_clusters(cubes) -> list[Cluster]:
    """Connected components under closure contact (corner contact included)."""
    cubes = list(cubes)
    if not cubes:
        return []
    levels = {c.level for c in cubes}
    if len(levels) != 1:
        raise GeometryError(f"cubes span several levels: {sorted(levels)}")
    by_index = {}
    for c in cubes:
        if c.index in by_index:
            raise GeometryError(f"duplicate cube index {c.index}")
        by_index[c.index] = c
    d = cubes[0].dim
    offsets = [o for o in itertools.product((-1, 0, 1), repeat=d) if any(o)]
    seen = set()
    clusters = []
    for start in sorted(by_index):
        if start in seen:
            continue
        comp = [start]
        seen.add(start)
        stack = [start]
        while stack:
            cur = stack.pop()
            for off in offsets:
                nb = tuple(c + o for c, o in zip(cur, off))
                if nb in by_index and nb not in seen:
                    seen.add(nb)
                    comp.append(nb)
                    stack.append(nb)
        members = tuple(by_index[i] for i in sorted(comp))
        clusters.append(Cluster(members[0].level, members))
    return clusters


# --- enlarged regions ----------------------------------------------------------

def _fine_pieces(indices: np.ndarray, cells_per_axis: int, tau: float, clip: bool = True):
    """Disjoint sub-boxes covering the union of sup-norm dilations.

    Each lattice cell is split per axis into ``[0, tau]``, ``[tau, 1 - tau]``
    and ``[1 - tau, 1]`` (in units of the side).  The dilation of cell ``i``
    is exactly the fine block ``3 i + 1 +- 2``.
    """
    d = indices.shape[1]
    offs = np.array(list(itertools.product(range(-2, 3), repeat=d)), dtype=np.int64)
    fine = (3 * indices[:, None, :] + 1 + offs[None, :, :]).reshape(-1, d)
    fine = np.unique(fine, axis=0)
    cell = np.floor_divide(fine, 3)
    piece = fine - 3 * cell
    if clip:
        keep = np.all((cell >= 0) & (cell < cells_per_axis), axis=1)
        fine, cell, piece = fine[keep], cell[keep], piece[keep]
    starts = np.array([0.0, tau, 1 - tau])
    ends = np.array([tau, 1 - tau, 1.0])
    nonempty = np.all(ends[piece] > starts[piece], axis=1)
    return fine[nonempty], cell[nonempty], piece[nonempty], starts, ends


@dataclass(frozen=True, eq=False)
class EnlargedRegion:
    """Union of open boxes ``{x : dist_inf(x, Q) < tau * side}`` over members."""

    owner: Cluster
    tau: float

    def __post_init__(self):
        if not 0.25 <= self.tau <= 0.5:
            raise GeometryError(f"tau must lie in [1/4, 1/2], got {self.tau}")

    @property
    def dim(self) -> int:
        return self.owner.members[0].dim

    def member_boxes(self):
        """Open dilated member boxes (not clipped to the root box)."""
        side = float(self.owner.side)
        lo = np.array([c.lower for c in self.owner.members]) - self.tau * side
        return lo, lo + side * (1 + 2 * self.tau)

    def intervals(self) -> list[tuple[float, float]]:
        """Merged open intervals of a 1D region."""
        if self.dim != 1:
            raise GeometryError("intervals() is only defined in one dimension")
        lo, hi = self.member_boxes()
        out = []
        for a, b in sorted(zip(lo[:, 0], hi[:, 0])):
            if out and a <= out[-1][1]:
                out[-1] = (out[-1][0], max(out[-1][1], b))
            else:
                out.append((float(a), float(b)))
        return out

    def contains(self, points) -> np.ndarray:
        """Strict membership (boundary points are excluded)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        lo, hi = self.member_boxes()
        inside = np.all((pts[:, None, :] > lo[None]) & (pts[:, None, :] < hi[None]), axis=2)
        return inside.any(axis=1)

    def boxes(self, clip: bool = True):
        """Disjoint boxes whose union is the region (clipped to the root box)."""
        side = float(self.owner.side)
        cells = round(1 / self.owner.side)
        _, cell, piece, starts, ends = _fine_pieces(self.owner.indices, cells, self.tau, clip)
        base = -0.5 + cell * side
        return base + starts[piece] * side, base + ends[piece] * side

    def integrate(self, oracle) -> float:
        lo, hi = self.boxes()
        if len(lo) == 0:
            return 0.0
        return float(np.sum(_call_oracle(oracle, lo, hi)))

    def check_sandwich(self, points) -> bool:
        """``Omega_{1/4} subset region subset Omega_{1/2}`` on the given points."""
        inner = EnlargedRegion(self.owner, 0.25).contains(points)
        outer = EnlargedRegion(self.owner, 0.5).contains(points)
        mine = self.contains(points)
        return bool(np.all(~inner | mine) and np.all(~mine | outer))


def enlarge(cluster: Cluster, tau: float = DEFAULT_TAU) -> EnlargedRegion:
    return EnlargedRegion(cluster, float(tau))


# --- covering ------------------------------------------------------------------

def _call_oracle(oracle, lo, hi) -> np.ndarray:
    fn = oracle.box_integral if hasattr(oracle, "box_integral") else oracle
    out = np.asarray(fn(lo, hi), dtype=float)
    if out.shape != lo.shape[:-1]:
        out = np.broadcast_to(out, lo.shape[:-1])
    if not np.all(np.isfinite(out)):
        raise GeometryError("density oracle returned a non-finite mass")
    if np.any(out < 0):
        raise GeometryError("density oracle returned a negative mass")
    return out


@dataclass(frozen=True, eq=False)
class LevelRecord:
    n: int
    class0: tuple
    clusters: tuple

    @property
    def class1(self) -> tuple:
        return tuple(k for k in self.clusters if k.klass == 1)

    @property
    def class2(self) -> tuple:
        return tuple(k for k in self.clusters if k.klass == 2)

    def class2_cubes(self) -> list[Cube]:
        return [c for k in self.class2 for c in k.members]


@dataclass(frozen=True, eq=False)
class Covering:
    epsilon: Fraction
    delta: float
    levels: tuple
    max_depth: int
    terminated: bool
    tau: float = DEFAULT_TAU
    total_mass: float = 0.0
    density: object = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.levels[0].class2[0].members[0].dim

    @property
    def depth(self) -> int:
        return self.levels[-1].n

    def level(self, n: int) -> LevelRecord:
        return self.levels[n]

    def class2_levels(self) -> list[int]:
        return [rec.n for rec in self.levels if rec.n >= 1 and rec.class2]

    def to_dict(self) -> dict:
        return covering_to_dict(self)


def _as_unit_oracle(density):
    if hasattr(density, "to_unit") and getattr(density, "box_side", 1.0) != 1.0:
        return density.to_unit()
    return density


def build_covering(density, delta: float, epsilon=Fraction(1, 2),
                   max_depth: int = DEFAULT_MAX_DEPTH, tau: float = DEFAULT_TAU,
                   dim: int | None = None) -> Covering:
    """Recursive three-way classification of sub-cubes by mass.

    ``density`` is a box-integral oracle on the root box (a DensityProfile,
    rescaled to unit coordinates when needed, or a callable ``f(lo, hi)``
    vectorized over box arrays).
    """
    if not 0 < delta < 1:
        raise GeometryError("delta must lie in (0, 1)")
    if max_depth < 1:
        raise GeometryError("max_depth must be >= 1")
    eps = parse_epsilon(epsilon)
    oracle = _as_unit_oracle(density)
    d = dim if dim is not None else getattr(oracle, "dim", None)
    if d is None:
        raise GeometryError("dimension unknown: pass dim for plain callables")
    b = round(1 / eps)
    root_mass = float(_call_oracle(oracle, -0.5 * np.ones((1, d)), 0.5 * np.ones((1, d)))[0])
    root = make_cube(0, (0,) * d, eps, root_mass)
    levels = [LevelRecord(0, (), (Cluster(0, (root,), root_mass, 2, tau),))]
    child_offsets = np.array(list(itertools.product(range(b), repeat=d)), dtype=np.int64)
    parents = [root]
    terminated = False
    for n in range(1, max_depth + 1):
        pidx = np.array([c.index for c in parents], dtype=np.int64)
        idx = (pidx[:, None, :] * b + child_offsets[None]).reshape(-1, d)
        order = np.lexsort(idx.T[::-1])
        idx = idx[order]
        side = float(eps ** n)
        lo = -0.5 + idx * side
        masses = _call_oracle(oracle, lo, lo + side)
        cubes = [make_cube(n, i, eps, m) for i, m in zip(idx.tolist(), masses.tolist())]
        class0 = tuple(c for c in cubes if c.mass <= delta)
        heavy = [c for c in cubes if c.mass > delta]
        clusters = []
        for raw in detect_clusters(heavy):
            probe = Cluster(n, raw.members, 0.0, 0, tau)
            emass = enlarge(probe, tau).integrate(oracle)
            klass = 1 if emass < 1 + delta else 2
            clusters.append(Cluster(n, raw.members, emass, klass, tau))
        record = LevelRecord(n, class0, tuple(clusters))
        _check_level_disjoint(record, b ** n, tau)
        levels.append(record)
        parents = record.class2_cubes()
        if not parents:
            terminated = True
            break
    return Covering(eps, float(delta), tuple(levels), max_depth, terminated, tau,
                    root_mass, oracle)


def _check_level_disjoint(record: LevelRecord, cells: int, tau: float):
    seen = set()
    for k in record.clusters:
        fine, *_ = _fine_pieces(k.indices, cells, tau)
        keys = set(map(tuple, fine.tolist()))
        if seen & keys:
            raise ConsistencyError(f"enlarged regions overlap at level {record.n}")
        seen |= keys


def cluster_size_bound(delta: float) -> int:
    return math.floor(1 / delta) + 2


def check_covering(cov: Covering, rel_tol: float = 1e-9) -> list[str]:
    """Return a list of violated invariants (empty when all hold)."""
    problems = []
    if len(cov.levels[0].clusters) != 1 or cov.levels[0].class0:
        problems.append("level 0 must hold exactly the root as class 2")
    prev_class2 = {c.index for c in cov.levels[0].class2_cubes()}
    eps = cov.epsilon
    b = round(1 / eps)
    for rec in cov.levels[1:]:
        expected = set()
        for p in prev_class2:
            for off in itertools.product(range(b), repeat=len(p)):
                expected.add(tuple(pi * b + o for pi, o in zip(p, off)))
        got = [c.index for c in rec.class0] + [c.index for k in rec.clusters for c in k.members]
        if len(got) != len(set(got)) or set(got) != expected:
            problems.append(f"level {rec.n}: cubes do not partition the class-2 children")
        for c in rec.class0:
            if not c.mass <= cov.delta:
                problems.append(f"level {rec.n}: class0 cube {c.index} has mass {c.mass}")
            if c.side != eps ** rec.n:
                problems.append(f"level {rec.n}: wrong side")
        for k in rec.clusters:
            if any(not c.mass > cov.delta for c in k.members):
                problems.append(f"level {rec.n}: light cube inside a cluster")
            if k.klass == 1 and not k.enlarged_mass < 1 + cov.delta:
                problems.append(f"level {rec.n}: class1 cluster too heavy")
            if k.klass == 2 and not k.enlarged_mass >= 1 + cov.delta:
                problems.append(f"level {rec.n}: class2 cluster too light")
            if k.klass == 1 and len(k.members) > cluster_size_bound(cov.delta):
                problems.append(f"level {rec.n}: class1 cluster exceeds size bound")
        comps = detect_clusters([c for k in rec.clusters for c in k.members])
        if len(comps) != len(rec.clusters):
            problems.append(f"level {rec.n}: clusters are not connected components")
        try:
            _check_level_disjoint(rec, b ** rec.n, cov.tau)
        except ConsistencyError as exc:
            problems.append(str(exc))
        prev_class2 = {c.index for c in rec.class2_cubes()}
    total = mass_budget(cov)
    if abs(total - cov.total_mass) > rel_tol * max(cov.total_mass, 1e-300):
        problems.append(f"mass conservation: {total} vs {cov.total_mass}")
    return problems


def mass_budget(cov: Covering) -> float:
    """Class-0 cubes + class-1 clusters + deepest-level class-2 clusters."""
    terms = []
    for rec in cov.levels[1:]:
        terms.extend(c.mass for c in rec.class0)
        terms.extend(k.mass for k in rec.class1)
    if not cov.terminated:
        terms.extend(c.mass for c in cov.levels[-1].class2_cubes())
    if len(cov.levels) == 1:
        terms.append(cov.total_mass)
    return math.fsum(terms)


def check_support_covered(cov: Covering, points) -> bool:
    """True when every point lies in some class0 cube or class1 enlarged region."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    hit = np.zeros(len(pts), dtype=bool)
    for rec in cov.levels[1:]:
        for c in rec.class0:
            hit |= np.all((pts >= c.lower) & (pts <= c.upper), axis=1)
        for k in rec.class1:
            for c in k.members:
                hit |= np.all((pts >= c.lower) & (pts <= c.upper), axis=1)
    return bool(hit.all())


# --- JSON ------------------------------------------------------------------------

def covering_to_dict(cov: Covering) -> dict:
    levels = []
    for rec in cov.levels:
        levels.append({
            "n": rec.n,
            "class0": [{"index": list(c.index), "mass": c.mass} for c in rec.class0],
            "clusters": [{"class": k.klass, "members": [list(c.index) for c in k.members],
                          "member_masses": [c.mass for c in k.members],
                          "enlarged_mass": k.enlarged_mass} for k in rec.clusters],
        })
    return {"schema_version": SCHEMA_VERSION, "epsilon": f"{cov.epsilon.numerator}/"
            f"{cov.epsilon.denominator}", "delta": cov.delta, "tau": cov.tau,
            "max_depth": cov.max_depth, "total_mass": cov.total_mass,
            "levels": levels, "terminated": cov.terminated}


def covering_to_json(cov: Covering) -> str:
    return json.dumps(covering_to_dict(cov), indent=2) + "\n"


def covering_from_dict(data: dict) -> Covering:
    if data.get("schema_version") != SCHEMA_VERSION:
        raise GeometryError(f"unsupported covering schema {data.get('schema_version')}")
    eps = parse_epsilon(data["epsilon"])
    tau = float(data.get("tau", DEFAULT_TAU))
    levels = []
    for rec in data["levels"]:
        n = rec["n"]
        class0 = tuple(make_cube(n, c["index"], eps, c["mass"]) for c in rec["class0"])
        clusters = []
        for k in rec["clusters"]:
            masses = k.get("member_masses", [0.0] * len(k["members"]))
            members = tuple(make_cube(n, i, eps, m) for i, m in zip(k["members"], masses))
            clusters.append(Cluster(n, members, k["enlarged_mass"], k["class"], tau))
        levels.append(LevelRecord(n, class0, tuple(clusters)))
    return Covering(eps, float(data["delta"]), tuple(levels), int(data.get("max_depth", 20)),
                    bool(data["terminated"]), tau, float(data.get("total_mass", 0.0)))


# --- ball covers -------------------------------------------------------------------

def exclusion_radius(d: int, delta: float, epsilon, n: int) -> float:
    """``R_n = 8 sqrt(d) (1/delta + 3) eps^n``."""
    return 8 * math.sqrt(d) * (1 / delta + 3) * float(parse_epsilon(epsilon)) ** n


@dataclass(frozen=True, eq=False)
class BallCover:
    level: int
    radius: float
    centers: np.ndarray
    overlap_bound: int
    masses: np.ndarray

    def multiplicity(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        dist = np.linalg.norm(pts[:, None, :] - self.centers[None], axis=2)
        return np.sum(dist <= self.radius, axis=1)

    def membership(self, points) -> np.ndarray:
        """Boolean ``(len(points), n_balls)`` closed-ball membership."""
        pts = np.asarray(points, dtype=float)
        dist = np.linalg.norm(pts[..., None, :] - self.centers, axis=-1)
        return dist <= self.radius


def greedy_centers(points: np.ndarray, separation: float) -> np.ndarray:
    """Maximal separated subset, scanning in the given (lexicographic) order."""
    chosen = []
    for p in points:
        if not chosen or np.min(np.linalg.norm(np.array(chosen) - p, axis=1)) >= separation:
            chosen.append(p)
    return np.array(chosen)


def max_overlap(centers: np.ndarray, radius: float, audit_points=None) -> int:
    """Maximum pointwise multiplicity of closed balls of equal radius.

    Exact in one and two dimensions (interval sweep / arrangement vertices);
    in higher dimensions the maximum over centres, pairwise midpoints and the
    supplied audit points.
    """
    centers = np.atleast_2d(centers)
    k, d = centers.shape
    if k == 0:
        return 0
    if d == 1:
        events = sorted([(c - radius, 0) for c in centers[:, 0]] +
                        [(c + radius, 1) for c in centers[:, 0]])
        best = cur = 0
        for _, kind in events:  # starts sort before ends at ties: closed intervals
            cur += 1 if kind == 0 else -1
            best = max(best, cur)
        return best
    cands = [centers]
    if d == 2:
        for i, j in itertools.combinations(range(k), 2):
            diff = centers[j] - centers[i]
            dist = float(np.hypot(*diff))
            if dist == 0 or dist > 2 * radius:
                continue
            mid = centers[i] + diff / 2
            h = math.sqrt(max(radius ** 2 - (dist / 2) ** 2, 0.0))
            perp = np.array([-diff[1], diff[0]]) / dist
            cands.append(np.array([mid + h * perp, mid - h * perp]))
    else:
        for i, j in itertools.combinations(range(k), 2):
            cands.append(((centers[i] + centers[j]) / 2)[None])
    if audit_points is not None:
        cands.append(np.atleast_2d(audit_points))
    pts = np.concatenate(cands)
    dist = np.linalg.norm(pts[:, None, :] - centers[None], axis=2)
    # relative slack so arrangement vertices count as lying on both circles
    return int(np.max(np.sum(dist <= radius * (1 + 1e-12), axis=1)))


def ball_mass_lower(oracle, center: np.ndarray, radius: float, side: float) -> float:
    """Mass of the lattice cells of the given side that lie fully inside the
    closed ball, clipped to the root box (a lower bound on the ball mass)."""
    d = len(center)
    cells = round(1 / side)
    lo_idx = np.clip(np.floor((center - radius + 0.5) / side).astype(int), 0, cells - 1)
    hi_idx = np.clip(np.floor((center + radius + 0.5) / side).astype(int), 0, cells - 1)
    axes = [np.arange(a, b + 1) for a, b in zip(lo_idx, hi_idx)]
    idx = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    lo = -0.5 + idx * side
    hi = lo + side
    far = np.maximum(np.abs(lo - center), np.abs(hi - center))
    inside = np.linalg.norm(far, axis=1) <= radius
    if not inside.any():
        return 0.0
    return float(np.sum(_call_oracle(oracle, lo[inside], hi[inside])))


def build_ball_cover(cov: Covering, level: int, delta: float | None = None,
                     audit_per_axis: int = 5, check_mass: bool = True) -> BallCover:
    """Greedy ``R_n/4``-separated class-2 centres with balls of radius ``R_n/2``."""
    delta = cov.delta if delta is None else delta
    if delta != cov.delta:
        raise GeometryError("delta differs from the covering's delta")
    if level < 1 or level >= len(cov.levels) or not cov.levels[level].class2:
        raise EmptyCoverError(f"level {level} has no class-2 cubes")
    cubes = sorted(cov.levels[level].class2_cubes(), key=lambda c: c.index)
    d = cubes[0].dim
    rn = exclusion_radius(d, delta, cov.epsilon, level)
    pts = np.array([c.center for c in cubes])
    centers = greedy_centers(pts, rn / 4)
    radius = rn / 2
    side = float(cubes[0].side)
    # audit: points of every cube's half-dilation must be covered
    ticks = np.linspace(-side, side, audit_per_axis)
    grid = np.stack(np.meshgrid(*([ticks] * d), indexing="ij"), axis=-1).reshape(-1, d)
    audit = (pts[:, None, :] + grid[None]).reshape(-1, d)
    for chunk in np.array_split(audit, max(1, len(audit) // 4096)):
        dist = np.linalg.norm(chunk[:, None, :] - centers[None], axis=2)
        if not np.all(np.any(dist <= radius, axis=1)):
            raise ConsistencyError(f"level {level}: ball cover misses part of the target set")
    overlap = max_overlap(centers, radius, audit if d > 2 else None)
    masses = np.zeros(len(centers))
    if cov.density is not None:
        for m, c in enumerate(centers):
            masses[m] = ball_mass_lower(cov.density, c, radius, side)
        if check_mass and np.any(masses < 1 + delta):
            bad = float(masses.min())
            raise ConsistencyError(f"level {level}: ball mass {bad} below 1 + delta")
    return BallCover(level, radius, centers, overlap, masses)


# --- random densities for property checks -----------------------------------------

def random_mixture(rng: np.random.Generator, d: int, max_bumps: int = 4,
                   max_mass: float = 6.0):
    """Random truncated Gaussian mixture in the root box."""
    from .states import GaussianMixtureDensity

    k = int(rng.integers(1, max_bumps + 1))
    centers = rng.uniform(-0.4, 0.4, size=(k, d))
    widths = rng.uniform(0.02, 0.2, size=k)
    weights = rng.dirichlet(np.ones(k)) * rng.uniform(0.2, max_mass)
    return GaussianMixtureDensity(centers, widths, weights, 1.0)


def demo_density(name: str, d: int = 1):
    """Named densities used by the command line and the demos."""
    from .states import GaussianMixtureDensity, UniformDensity

    if name == "uniform3":
        return UniformDensity(3.0, d, 1.0)
    if name == "light":
        return UniformDensity(0.2, d, 1.0)
    if name == "twobumps":
        c = 0.35 * np.ones(d)
        return GaussianMixtureDensity(np.stack([-c, c]), 0.04, 1.0, 1.0)
    raise GeometryError(f"unknown demo density {name!r}")

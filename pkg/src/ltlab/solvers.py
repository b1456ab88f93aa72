"""Variational solvers for the GN and Hardy-GN quotients, local uncertainty
constant probes, the one-body spectral bound and the fermionic ratio."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .energy import (DomainError, hardy_cell_weights, hardy_constant,
                     kinetic_energy, local_seminorm, symbol, _radial_power_1d)
from .interaction import ConfigurationBatch, interaction_values, _estimate
from .states import (GridField, ManyBodyState, StateError, cell_centers, cell_weights,
                     gaussian_field, plateau_field, region_boxes, two_bump_field)

logger = logging.getLogger(__name__)

PRESETS = ("gaussian", "plateau", "two-bump")


class SolverError(RuntimeError):
    """A solver failed to produce a trustworthy result."""


@dataclass(frozen=True)
class QuotientProblem:
    d: int
    s: float
    box_side: float
    points_per_axis: int
    hardy: bool = False

    def __post_init__(self):
        if self.hardy and not self.s < self.d / 2:
            raise DomainError("the Hardy quotient needs s < d/2")
        if self.points_per_axis % 2:
            raise StateError("points_per_axis must be even")

    @property
    def exponent(self) -> float:
        return 1.0 + 2.0 * self.s / self.d

    def _hardy_potential(self) -> np.ndarray:
        dx = self.box_side / self.points_per_axis
        w = hardy_cell_weights(self.d, float(self.s), float(self.box_side), self.points_per_axis)
        return hardy_constant(self.d, self.s) * w / dx ** self.d

    def energy(self, u: GridField) -> float:
        e = kinetic_energy(u, self.s)
        if self.hardy:
            e -= u.cell_volume * float(np.sum(self._hardy_potential() * np.abs(u.values) ** 2))
        return e

    def denominator(self, u: GridField) -> float:
        return u.cell_volume * float(np.sum(np.abs(u.values) ** (2 * self.exponent)))

    def quotient(self, u: GridField) -> float:
        """Quotient of a field, normalized first."""
        u = u.normalized()
        return self.energy(u) / self.denominator(u)

    def preset(self, name: str, width: float = 1.0) -> GridField:
        args = (self.d, self.box_side, self.points_per_axis)
        if name == "gaussian":
            return gaussian_field(*args, width=width)
        if name == "plateau":
            return plateau_field(*args, width=width)
        if name == "two-bump":
            return two_bump_field(*args, width=width, separation=2.0 * width)
        raise SolverError(f"unknown preset {name!r}")


@dataclass
class SolveResult:
    value: float
    minimizer: GridField
    trace: list = field(default_factory=list)
    converged: bool = False
    preset: str | None = None

    def write_trace(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "value", "step_size"])
            for step, value, size in self.trace:
                writer.writerow([step, repr(value), repr(size)])


def _apply_multiplier(values: np.ndarray, mult: np.ndarray) -> np.ndarray:
    return np.fft.ifftn(np.fft.fftn(values) * mult)


def minimize_quotient(problem: QuotientProblem, init="gaussian", steps: int = 5000,
                      tolerance: float = 1e-11, window: int = 20,
                      real: bool = True) -> SolveResult:
    """Sobolev-preconditioned projected gradient flow on the unit sphere.

    Each step renormalizes the iterate and backtracks until the quotient
    decreases (Armijo condition).  Stops once the relative change over the
    last ``window`` accepted steps drops below ``tolerance``.
    """
    preset = init if isinstance(init, str) else None
    u = problem.preset(init) if isinstance(init, str) else init
    if (u.dim, u.points_per_axis) != (problem.d, problem.points_per_axis) or \
            u.box_side != problem.box_side:
        raise StateError("initial field does not live on the problem grid")
    if not u.is_normalized():
        raise StateError("initial field must be normalized")
    vals = u.values.real.copy() if real else u.values.copy()
    vol = u.cell_volume
    sym = symbol(u, problem.s)
    precond = 1.0 / (1.0 + sym)
    hardy_v = problem._hardy_potential() if problem.hardy else None
    p = problem.exponent

    def parts(v):
        kin = _apply_multiplier(v, sym)
        kin = kin.real if real else kin
        av = kin - hardy_v * v if hardy_v is not None else kin
        e = vol * float(np.real(np.vdot(v, av)))
        den = vol * float(np.sum(np.abs(v) ** (2 * p)))
        return e, den, av

    def grad(v, e, den, av):
        q = e / den
        g = (2 * av - q * 2 * p * np.abs(v) ** (2 * p - 2) * v) / den
        return g - vol * np.real(np.vdot(v, g)) * v

    e, den, av = parts(vals)
    value = e / den
    tau = 1.0
    trace = [(0, value, 0.0)]
    history = [value]
    increases = 0
    converged = False
    for step in range(1, steps + 1):
        g = grad(vals, e, den, av)
        dirn = _apply_multiplier(g, precond)
        dirn = dirn.real if real else dirn
        dirn = dirn - vol * np.real(np.vdot(vals, dirn)) * vals
        slope = vol * float(np.real(np.vdot(g, dirn)))
        if slope <= 0 or not math.isfinite(slope):
            converged = True
            break
        accepted = False
        for _ in range(40):
            trial = vals - tau * dirn
            trial = trial / math.sqrt(vol * float(np.sum(np.abs(trial) ** 2)))
            te, tden, tav = parts(trial)
            tval = te / tden
            if math.isfinite(tval) and tval <= value - 1e-4 * tau * slope:
                accepted = True
                break
            tau *= 0.5
        if not accepted:
            converged = True
            break
        increases = increases + 1 if tval > value else 0
        if increases >= 50:
            raise SolverError("quotient increased for 50 consecutive steps")
        vals, e, den, av, value = trial, te, tden, tav, tval
        trace.append((step, value, tau))
        history.append(value)
        tau = min(tau * 1.5, 1e3)
        if len(history) > window:
            old = history[-window - 1]
            if abs(old - value) <= tolerance * abs(value):
                converged = True
                break
    minimizer = u.with_values(vals)
    return SolveResult(value, minimizer, trace, converged, preset)


def solve_gn(problem: QuotientProblem, presets=PRESETS, **kwargs) -> SolveResult:
    """Best of several restarts."""
    best = None
    for name in presets:
        res = minimize_quotient(problem, name, **kwargs)
        logger.info("preset %s -> %.12g (%d steps)", name, res.value, len(res.trace) - 1)
        if best is None or res.value < best.value:
            best = res
    return best


def gn_constant_d1_s1() -> float:
    """Closed-form value ``pi^2 / 4`` of the one-dimensional GN quotient at s = 1."""
    return math.pi ** 2 / 4


def sech_quotient(a: float = 2.0) -> float:
    """Quotient of ``sech^(1/2)(a x)`` from its closed-form integrals:
    ``int v^2 = pi/a``, ``int v^6 = pi/(2a)``, ``int v'^2 = a pi / 8``."""
    l2 = math.pi / a
    l6 = math.pi / (2 * a)
    kin = a * math.pi / 8
    # normalize: v -> v / sqrt(l2); quotient is kin/l2 over l6/l2^3
    return (kin / l2) / (l6 / l2 ** 3)


# --- local uncertainty constants ----------------------------------------------

SEARCH_GRID = np.logspace(-2, 4, 6 * 25 + 1)


@dataclass(frozen=True)
class UncertaintyEstimate:
    C_uncertainty: float
    C_error: float
    seminorm: float
    main_term: float
    error_term: float
    degenerate: bool = False


def _region_volume(region, box_side: float, d: int) -> float:
    lo, hi = region_boxes(region, box_side, d)
    return float(np.sum(np.prod(np.clip(hi - lo, 0, None), axis=1)))


def _as_region(region):
    # cubes carry their own extent in unit coordinates
    if hasattr(region, "lower") and hasattr(region, "upper"):
        return (np.atleast_2d(region.lower), np.atleast_2d(region.upper)), True
    return region, hasattr(region, "boxes")


def estimate_local_uncertainty_constant(u: GridField, region, s: float,
                                        grid: np.ndarray = SEARCH_GRID) -> UncertaintyEstimate:
    """Smallest lattice pair ``(C1, C2)`` with
    ``T >= (1/C1) int rho^p / (int rho)^(2s/d) - (C2 / |Q|^(2s/d)) int rho``.

    ``region`` may be a Cube or enlarged region (unit coordinates) or a
    ``(lo, hi)`` box list in the field's coordinates.  ``C1`` is the smallest
    grid value such that ``(C1, C1)`` is admissible; ``C2`` is then the
    smallest admissible partner of that ``C1``.
    """
    d = u.dim
    boxes, unit = _as_region(region)
    if unit:
        lo, hi = region_boxes(boxes, 1.0, d) if not hasattr(boxes, "boxes") else boxes.boxes()
        lo, hi = np.asarray(lo) * u.box_side, np.asarray(hi) * u.box_side
        boxes = (lo, hi)
    w = cell_weights(boxes, d, u.box_side, u.points_per_axis)
    rho = np.abs(u.values) ** 2
    mass = u.cell_volume * float(np.sum(w * rho))
    vol = _region_volume(boxes, u.box_side, d)
    if mass <= 0:
        return UncertaintyEstimate(math.inf, math.inf, 0.0, 0.0, 0.0, degenerate=True)
    p = 1 + 2 * s / d
    main = u.cell_volume * float(np.sum(w * rho ** p)) / mass ** (2 * s / d)
    err = mass / vol ** (2 * s / d)
    t = local_seminorm(u, boxes, s)
    ok = lambda c1, c2: t >= main / c1 - c2 * err
    diag = [c for c in grid if ok(c, c)]
    if not diag:
        return UncertaintyEstimate(math.inf, math.inf, t, main, err)
    cstar = diag[0]
    c1 = next(c for c in grid if ok(c, cstar))
    c2 = next(c for c in grid if ok(c1, c))
    return UncertaintyEstimate(float(c1), float(c2), t, main, err)


def batch_uncertainty_constants(fields, region, s: float) -> UncertaintyEstimate:
    """Componentwise maxima over a family of test fields (degenerate ones skipped)."""
    results = [estimate_local_uncertainty_constant(f, region, s) for f in fields]
    live = [r for r in results if not r.degenerate]
    if not live:
        return UncertaintyEstimate(math.inf, math.inf, 0.0, 0.0, 0.0, degenerate=True)
    return UncertaintyEstimate(max(r.C_uncertainty for r in live),
                               max(r.C_error for r in live),
                               max(r.seminorm for r in live),
                               max(r.main_term for r in live),
                               max(r.error_term for r in live))


# --- one-body spectral bound -----------------------------------------------------

@dataclass(frozen=True, eq=False)
class SpectralBoundInstance:
    d: int
    s: float
    anchors: np.ndarray
    beta: float
    box_side: float
    points_per_axis: int
    R: np.ndarray = field(init=False)

    def __post_init__(self):
        anchors = np.atleast_2d(np.asarray(self.anchors, dtype=float))
        if anchors.shape[1] != self.d:
            raise StateError("anchors must be d-dimensional")
        object.__setattr__(self, "anchors", anchors)
        c = hardy_constant(self.d, self.s)
        if not 0 < self.beta < c:
            raise DomainError(f"beta must lie in (0, {c})")
        if len(anchors) == 1:
            r = np.array([math.inf])
        else:
            dist = np.linalg.norm(anchors[:, None] - anchors[None], axis=2)
            np.fill_diagonal(dist, np.inf)
            if np.any(dist == 0):
                raise StateError("anchors must be distinct")
            r = dist.min(axis=1) / 2
        object.__setattr__(self, "R", r)

    def rhs(self) -> float:
        finite = self.R[np.isfinite(self.R)]
        return float(self.beta ** (1 + self.d / (2 * self.s)) * np.sum((2 * finite) ** (-2 * self.s)))


def torus_operator(d: int, s: float, box_side: float, points_per_axis: int) -> np.ndarray:
    """Dense matrix of the torus multiplier ``|k|^(2s)`` on the cell grid."""
    m = points_per_axis
    u = GridField(d, box_side, m, np.zeros((m,) * d))
    sym = symbol(u, s).ravel()
    n = m ** d
    eye = np.eye(n).reshape((n,) + (m,) * d)
    axes = tuple(range(1, d + 1))
    cols = np.fft.ifftn(np.fft.fftn(eye, axes=axes) * sym.reshape((1,) + (m,) * d), axes=axes)
    mat = np.real(cols.reshape(n, n)).T
    return (mat + mat.T) / 2


def anchor_potential(inst: SpectralBoundInstance) -> np.ndarray:
    """``min_j |x - X_j|^(-2s)`` (minimal-image distance) capped at ``(dx/2)^(-2s)``."""
    d, m, L = inst.d, inst.points_per_axis, inst.box_side
    xs = cell_centers(d, L, m)
    mesh = np.stack(np.meshgrid(*([xs] * d), indexing="ij"), axis=-1).reshape(-1, d)
    diff = mesh[:, None, :] - inst.anchors[None]
    diff = (diff + L / 2) % L - L / 2
    dist = np.linalg.norm(diff, axis=2).min(axis=1)
    cap = (L / m / 2) ** (-2 * inst.s)
    with np.errstate(divide="ignore"):
        return np.minimum(np.where(dist > 0, dist ** (-2 * inst.s), np.inf), cap)


def _galerkin_1d(inst: SpectralBoundInstance):
    """Exterior-Dirichlet Galerkin matrices for piecewise-constant cells in 1D.

    The quadratic form of the whole-line operator restricted to functions
    vanishing outside the box is assembled with exact cell-pair kernel
    integrals and exact cell integrals of the potential, so every computed
    eigenvalue is an upper bound for its continuum counterpart.
    """
    from .energy import seminorm_weight

    s, m, L = inst.s, inst.points_per_axis, inst.box_side
    h = L / m
    a = 1 + 2 * s
    G = lambda z: np.abs(z) ** (2 - a) / ((1 - a) * (2 - a))
    j = np.arange(m, dtype=float)
    pair = G((j + 1) * h) + G((j - 1) * h) - 2 * G(j * h)
    pair[0] = 0.0
    idx = np.abs(np.arange(m)[:, None] - np.arange(m)[None, :])
    off = pair[idx]
    edges = -L / 2 + h * np.arange(m + 1)
    left, right = edges[:-1], edges[1:]
    far = lambda t: t ** (2 - a) / ((a - 1) * (2 - a))
    kill = far(right[-1] - left) - far(right[-1] - right) + far(right - edges[0]) - far(left - edges[0])
    c = seminorm_weight(1, s)
    A = c * (2 * np.diag(off.sum(axis=1) + kill) - 2 * off)
    # exact cell integrals of max_j |x - X_j|^(-2s)
    anchors = np.sort(inst.anchors[:, 0])
    cuts = np.concatenate([[-np.inf], (anchors[1:] + anchors[:-1]) / 2, [np.inf]])
    D = np.zeros(m)
    for k, x0 in enumerate(anchors):
        lo = np.clip(left, cuts[k], cuts[k + 1])
        hi = np.clip(right, cuts[k], cuts[k + 1])
        D += _radial_power_1d(lo - x0, hi - x0, s)
    return A / h, D / h


def spectral_bound_check(inst: SpectralBoundInstance, method: str = "torus") -> dict:
    """Sum of negative eigenvalues of ``(-Delta)^s - beta V`` on a grid.

    ``method="torus"`` diagonalizes the periodic multiplier with the capped
    potential.  Its constant mode always carries energy ``-beta <V>``, which
    is reported as ``zero_mode_energy``.  ``method="galerkin"`` (d = 1) uses
    the exterior-Dirichlet cell discretization instead.
    """
    if method == "torus":
        K = torus_operator(inst.d, inst.s, inst.box_side, inst.points_per_axis)
        V = anchor_potential(inst)
        H = K - inst.beta * np.diag(V)
        zero_mode = -inst.beta * float(V.mean())
    elif method == "galerkin":
        if inst.d != 1:
            raise SolverError("the Galerkin discretization is implemented for d = 1 only")
        A, D = _galerkin_1d(inst)
        H = A - inst.beta * np.diag(D)
        zero_mode = float("nan")
    else:
        raise SolverError(f"unknown method {method!r}")
    try:
        ev = np.linalg.eigvalsh(H)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"eigen-solver failed: {exc}") from exc
    neg = float(math.fsum(ev[ev < 0]))
    rhs = inst.rhs()
    ratio = -neg / rhs if rhs > 0 else (0.0 if neg == 0 else math.inf)
    return {"neg_sum": neg, "rhs": rhs, "ratio": ratio, "negative_count": int(np.sum(ev < 0)),
            "lowest": float(ev[0]), "zero_mode_energy": zero_mode, "method": method}


# --- fermionic ratio -----------------------------------------------------------------

RATIO_CAP = 1e12


def fermionic_ratio(state: ManyBodyState, s: float, samples: int = 20_000,
                    seed: int = 0) -> dict:
    """Kinetic energy of a Slater determinant over its MC interaction energy."""
    if state.kind != "slater":
        raise StateError("the fermionic ratio needs a Slater determinant")
    if not 0 < s < state.dim / 2:
        raise DomainError("fermionic ratio needs 0 < s < d/2")
    kinetic = math.fsum(kinetic_energy(phi, s) for phi in state.orbitals)
    batch = ConfigurationBatch.draw(state, samples, seed)
    est = _estimate(interaction_values(batch.configs, s))
    if est.mean <= 0 or kinetic / est.mean > RATIO_CAP:
        ratio, capped = math.inf, True
    else:
        ratio, capped = kinetic / est.mean, False
    lower = kinetic / (est.mean + 3 * est.std_error)
    upper = kinetic / max(est.mean - 3 * est.std_error, 1e-300)
    return {"kinetic": kinetic, "interaction_mean": est.mean,
            "interaction_std_error": est.std_error, "ratio": ratio, "ratio_lower_3sigma": lower,
            "ratio_upper_3sigma": upper, "exceeds_cap": capped}


def random_slater(rng: np.random.Generator, n: int, box_side: float = 16.0,
                  points_per_axis: int = 256, width_range=(0.5, 2.0)) -> ManyBodyState:
    """Orthonormalized random Gaussian-times-polynomial orbitals in 1D."""
    from .states import orthonormalize

    x = cell_centers(1, box_side, points_per_axis)
    width = rng.uniform(*width_range)
    center = rng.uniform(-1.0, 1.0)
    fields = []
    for j in range(n):
        coef = rng.normal(size=n + 2)
        poly = np.polynomial.polynomial.polyval((x - center) / width, coef)
        vals = poly * np.exp(-((x - center) / width) ** 2 / 2)
        fields.append(GridField(1, box_side, points_per_axis, vals))
    return ManyBodyState.slater(orthonormalize(fields))

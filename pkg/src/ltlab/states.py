"""One-body grid fields, structured N-body states and their one-body densities.

Fields live on a periodic box ``[-L/2, L/2]^d`` sampled at cell centres,
``x_j = -L/2 + (j + 1/2) * dx``.  Every lattice quantity is interpreted as
constant on its cell, so box integrals with fractional cell weighting are
exact for the piecewise-constant surrogate.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

logger = logging.getLogger(__name__)

NORM_TOL = 1e-10
GRAM_TOL = 1e-8
DEFAULT_SLATER_CAP = 8


class StateError(ValueError):
    """Invalid field, state or density input."""


class CapabilityError(RuntimeError):
    """Requested operation is not available for this representation."""


@dataclass(frozen=True, eq=False)
class GridField:
    """A complex field sampled on a uniform periodic d-dimensional grid."""

    dim: int
    box_side: float
    points_per_axis: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=complex)
        if self.dim < 1:
            raise StateError("dim must be >= 1")
        if self.box_side <= 0:
            raise StateError("box_side must be positive")
        if values.shape != (self.points_per_axis,) * self.dim:
            raise StateError(
                f"values shape {values.shape} does not match "
                f"{(self.points_per_axis,) * self.dim}"
            )
        if not np.all(np.isfinite(values)):
            raise StateError("field values must be finite")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, func, dim: int, box_side: float, points_per_axis: int,
                      normalize: bool = True) -> "GridField":
        """Sample ``func(*coords)`` at the cell centres."""
        grid = cell_centers(dim, box_side, points_per_axis)
        mesh = np.meshgrid(*([grid] * dim), indexing="ij")
        out = cls(dim, float(box_side), points_per_axis, func(*mesh))
        return out.normalized() if normalize else out

    @property
    def dx(self) -> float:
        return self.box_side / self.points_per_axis

    @property
    def cell_volume(self) -> float:
        return self.dx ** self.dim

    def coords(self) -> np.ndarray:
        return cell_centers(self.dim, self.box_side, self.points_per_axis)

    def mesh(self) -> list[np.ndarray]:
        grid = self.coords()
        return np.meshgrid(*([grid] * self.dim), indexing="ij")

    def norm2(self) -> float:
        return float(self.cell_volume * np.sum(np.abs(self.values) ** 2))

    def is_normalized(self, tol: float = NORM_TOL) -> bool:
        return abs(self.norm2() - 1.0) <= tol

    def normalized(self) -> "GridField":
        n2 = self.norm2()
        if n2 <= 0:
            raise StateError("cannot normalize a zero field")
        return self.with_values(self.values / np.sqrt(n2))

    def with_values(self, values) -> "GridField":
        return GridField(self.dim, self.box_side, self.points_per_axis, values)

    def rescaled(self, factor: float) -> "GridField":
        """Dilate the field: same lattice values on a box ``factor`` times larger,
        renormalized so the L2 norm is preserved."""
        return GridField(self.dim, self.box_side * factor, self.points_per_axis,
                         self.values * factor ** (-self.dim / 2))

    def inner(self, other: "GridField") -> complex:
        check_same_grid(self, other)
        return complex(self.cell_volume * np.vdot(self.values, other.values))

    def same_grid(self, other: "GridField") -> bool:
        return (self.dim == other.dim and self.points_per_axis == other.points_per_axis
                and self.box_side == other.box_side)


def cell_centers(dim: int, box_side: float, points_per_axis: int) -> np.ndarray:
    dx = box_side / points_per_axis
    return -box_side / 2 + (np.arange(points_per_axis) + 0.5) * dx


def check_same_grid(a: GridField, b: GridField):
    if not a.same_grid(b):
        raise StateError("fields live on different grids")


def gaussian_field(dim: int, box_side: float, points_per_axis: int, width: float = 1.0,
                   center: Sequence[float] | None = None) -> GridField:
    """Normalized Gaussian ``exp(-|x-c|^2 / (2 width^2))``."""
    c = np.zeros(dim) if center is None else np.asarray(center, dtype=float)

    def f(*xs):
        r2 = sum((x - ci) ** 2 for x, ci in zip(xs, c))
        return np.exp(-r2 / (2 * width ** 2))

    return GridField.from_function(f, dim, box_side, points_per_axis)


def bump_field(dim: int, box_side: float, points_per_axis: int, width: float = 1.0,
               center: Sequence[float] | None = None) -> GridField:
    """Normalized smooth compactly supported bump ``exp(1 - 1/(1 - r^2/width^2))``."""
    c = np.zeros(dim) if center is None else np.asarray(center, dtype=float)

    def f(*xs):
        t = sum((x - ci) ** 2 for x, ci in zip(xs, c)) / width ** 2
        out = np.zeros_like(t)
        inside = t < 1
        out[inside] = np.exp(1 - 1 / (1 - t[inside]))
        return out

    return GridField.from_function(f, dim, box_side, points_per_axis)


def plateau_field(dim: int, box_side: float, points_per_axis: int,
                  width: float = 1.0) -> GridField:
    """Flat-topped profile ``1 / (1 + (r/width)^8)``."""

    def f(*xs):
        r2 = sum(x ** 2 for x in xs) / width ** 2
        return 1.0 / (1.0 + r2 ** 4)

    return GridField.from_function(f, dim, box_side, points_per_axis)


def two_bump_field(dim: int, box_side: float, points_per_axis: int,
                   width: float = 1.0, separation: float = 3.0) -> GridField:
    """Sum of two Gaussians split along the first axis."""

    def f(*xs):
        rest = sum(x ** 2 for x in xs[1:])
        a = np.exp(-((xs[0] - separation / 2) ** 2 + rest) / (2 * width ** 2))
        b = np.exp(-((xs[0] + separation / 2) ** 2 + rest) / (2 * width ** 2))
        return a + b

    return GridField.from_function(f, dim, box_side, points_per_axis)


def translated(u: GridField, shift: Sequence[float]) -> GridField:
    """Periodic translation by an arbitrary vector (Fourier shift; an exact
    roll when the shift is a multiple of dx)."""
    shift = np.asarray(shift, dtype=float)
    steps = shift / u.dx
    if np.allclose(steps, np.round(steps), rtol=0, atol=1e-12):
        return u.with_values(np.roll(u.values, tuple(int(k) for k in np.round(steps)),
                                     axis=tuple(range(u.dim))))
    spec = np.fft.fftn(u.values)
    phase = np.ones_like(spec)
    for axis in range(u.dim):
        k = 2 * np.pi * np.fft.fftfreq(u.points_per_axis, d=u.dx)
        shape = [1] * u.dim
        shape[axis] = -1
        phase = phase * np.exp(-1j * k.reshape(shape) * shift[axis])
    return u.with_values(np.fft.ifftn(spec * phase))


# --- many-body states -------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ManyBodyState:
    """Product (``u_1 x ... x u_N``) or Slater determinant of grid orbitals."""

    kind: str
    orbitals: tuple

    def __post_init__(self):
        if self.kind not in ("product", "slater"):
            raise StateError(f"unknown state kind {self.kind!r}")
        orbitals = tuple(self.orbitals)
        if not orbitals:
            raise StateError("a state needs at least one orbital")
        for phi in orbitals[1:]:
            check_same_grid(orbitals[0], phi)
        object.__setattr__(self, "orbitals", orbitals)
        if self.kind == "product":
            for j, phi in enumerate(orbitals):
                if not phi.is_normalized():
                    raise StateError(f"product orbital {j} is not normalized")
        else:
            gram = gram_matrix(orbitals)
            if np.max(np.abs(gram - np.eye(len(orbitals)))) > GRAM_TOL:
                raise StateError("slater orbitals are not orthonormal")

    @classmethod
    def product(cls, orbitals) -> "ManyBodyState":
        return cls("product", tuple(orbitals))

    @classmethod
    def slater(cls, orbitals) -> "ManyBodyState":
        return cls("slater", tuple(orbitals))

    @property
    def n_particles(self) -> int:
        return len(self.orbitals)

    @property
    def dim(self) -> int:
        return self.orbitals[0].dim

    @property
    def box_side(self) -> float:
        return self.orbitals[0].box_side

    @property
    def points_per_axis(self) -> int:
        return self.orbitals[0].points_per_axis

    def rescaled(self, factor: float) -> "ManyBodyState":
        return ManyBodyState(self.kind, tuple(phi.rescaled(factor) for phi in self.orbitals))


def gram_matrix(orbitals: Sequence[GridField]) -> np.ndarray:
    mat = np.stack([phi.values.ravel() for phi in orbitals], axis=1)
    return orbitals[0].cell_volume * (mat.conj().T @ mat)


def orthonormalize(fields: Sequence[GridField]) -> list[GridField]:
    """QR orthonormalization in the lattice inner product."""
    mat = np.stack([f.values.ravel() for f in fields], axis=1)
    q, r = np.linalg.qr(mat * np.sqrt(fields[0].cell_volume))
    q = q * np.sign(np.real(np.diag(r)) + (np.real(np.diag(r)) == 0))
    q = q / np.sqrt(fields[0].cell_volume)
    shape = fields[0].values.shape
    return [fields[0].with_values(q[:, j].reshape(shape)) for j in range(q.shape[1])]


# --- densities --------------------------------------------------------------

class DensityProfile:
    """Box-integral oracle for a non-negative density.

    Subclasses implement :meth:`box_integral` for boxes given as arrays of
    lower/upper corners with shape ``(..., d)``.  ``evaluate_cells`` returns
    a lattice of cell values when the density is pointwise evaluable.
    """

    dim: int
    total_mass: float
    box_side: float = 1.0

    def box_integral(self, lo, hi) -> np.ndarray:  # pragma: no cover - interface
        raise NotImplementedError

    def __call__(self, lo, hi):
        return self.box_integral(lo, hi)

    def support_box(self) -> tuple[np.ndarray, np.ndarray]:
        half = self.box_side / 2
        return -half * np.ones(self.dim), half * np.ones(self.dim)

    def power_integral(self, exponent: float, boxes=None):
        raise CapabilityError(f"{type(self).__name__} has no pointwise evaluation")

    def to_unit(self) -> "DensityProfile":
        """The same density rescaled into the root box ``[-1/2, 1/2]^d``."""
        if self.box_side == 1.0:
            return self
        raise CapabilityError(f"{type(self).__name__} cannot be rescaled")


def _as_boxes(lo, hi, dim):
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if lo.shape != hi.shape or lo.shape[-1:] != (dim,):
        raise StateError(f"boxes must have trailing dimension {dim}")
    return lo, hi


class GridDensity(DensityProfile):
    """Piecewise-constant density on the cells of a periodic grid.

    Box integrals use a cumulative table and multilinear interpolation of
    the integrated density, which is exact for the cellwise-constant model.
    """

    def __init__(self, cells: np.ndarray, box_side: float, source=None):
        cells = np.array(cells, dtype=float)
        if np.any(cells < 0) or not np.all(np.isfinite(cells)):
            raise StateError("density cells must be finite and non-negative")
        cells.flags.writeable = False
        self.cells = cells
        self.dim = cells.ndim
        self.points_per_axis = cells.shape[0]
        self.box_side = float(box_side)
        self.dx = self.box_side / self.points_per_axis
        self.source = source
        self.total_mass = float(np.sum(cells) * self.dx ** self.dim)
        self._tables: dict = {}

    def _table(self, exponent: float):
        if exponent not in self._tables:
            vals = self.cells if exponent == 1.0 else self.cells ** exponent
            tab = vals * self.dx ** self.dim
            for axis in range(self.dim):
                tab = np.cumsum(tab, axis=axis)
            tab = np.pad(tab, [(1, 0)] * self.dim)
            self._tables[exponent] = tab
        return self._tables[exponent]

    def _cumulative(self, table, points):
        # multilinear interpolation of the cumulative table at fractional indices
        m = self.points_per_axis
        t = (points + self.box_side / 2) / self.dx
        t = np.clip(t, 0.0, float(m))
        i0 = np.minimum(np.floor(t).astype(int), m - 1)
        frac = t - i0
        out = np.zeros(points.shape[:-1])
        for corner in range(2 ** self.dim):
            bits = [(corner >> a) & 1 for a in range(self.dim)]
            weight = np.ones(points.shape[:-1])
            idx = []
            for a, b in enumerate(bits):
                weight = weight * (frac[..., a] if b else 1 - frac[..., a])
                idx.append(i0[..., a] + b)
            out = out + weight * table[tuple(idx)]
        return out

    def _box(self, table, lo, hi):
        lo, hi = _as_boxes(lo, hi, self.dim)
        half = self.box_side / 2
        lo = np.clip(lo, -half, half)
        hi = np.clip(hi, -half, half)
        hi = np.maximum(hi, lo)
        total = np.zeros(lo.shape[:-1])
        for corner in range(2 ** self.dim):
            bits = np.array([(corner >> a) & 1 for a in range(self.dim)], dtype=bool)
            pts = np.where(bits, hi, lo)
            sign = (-1) ** (self.dim - int(bits.sum()))
            total = total + sign * self._cumulative(table, pts)
        return np.maximum(total, 0.0)

    def box_integral(self, lo, hi):
        return self._box(self._table(1.0), lo, hi)

    def power_integral(self, exponent: float, boxes=None):
        if boxes is None:
            return float(np.sum(self.cells ** exponent) * self.dx ** self.dim)
        lo, hi = boxes
        return self._box(self._table(float(exponent)), lo, hi)

    def evaluate_cells(self) -> np.ndarray:
        return self.cells

    def to_unit(self) -> "GridDensity":
        if self.box_side == 1.0:
            return self
        return GridDensity(self.cells * self.box_side ** self.dim, 1.0, source=self.source)


class UniformDensity(DensityProfile):
    """Constant density of given total mass on ``[-L/2, L/2]^d``."""

    def __init__(self, total_mass: float, dim: int, box_side: float = 1.0):
        if total_mass < 0:
            raise StateError("total mass must be non-negative")
        self.total_mass = float(total_mass)
        self.dim = dim
        self.box_side = float(box_side)
        self.level = self.total_mass / self.box_side ** dim

    def box_integral(self, lo, hi):
        lo, hi = _as_boxes(lo, hi, self.dim)
        half = self.box_side / 2
        ext = np.clip(np.minimum(hi, half) - np.maximum(lo, -half), 0.0, None)
        return self.level * np.prod(ext, axis=-1)

    def power_integral(self, exponent: float, boxes=None):
        if boxes is None:
            return self.level ** exponent * self.box_side ** self.dim
        lo, hi = _as_boxes(*boxes, self.dim)
        half = self.box_side / 2
        ext = np.clip(np.minimum(hi, half) - np.maximum(lo, -half), 0.0, None)
        return self.level ** exponent * np.prod(ext, axis=-1)

    def to_unit(self):
        return UniformDensity(self.total_mass, self.dim, 1.0)


class GaussianMixtureDensity(DensityProfile):
    """Sum of isotropic Gaussian bumps, truncated to the root box.

    ``weights`` are the untruncated bump masses; the declared density is the
    mixture restricted to ``[-L/2, L/2]^d`` so ``total_mass`` is slightly
    smaller when bumps touch the boundary.
    """

    def __init__(self, centers, widths, weights, box_side: float = 1.0):
        from scipy.special import erf

        self._erf = erf
        self.centers = np.atleast_2d(np.asarray(centers, dtype=float))
        self.dim = self.centers.shape[1]
        k = len(self.centers)
        self.widths = np.broadcast_to(np.asarray(widths, dtype=float), (k,)).copy()
        self.weights = np.broadcast_to(np.asarray(weights, dtype=float), (k,)).copy()
        if np.any(self.widths <= 0) or np.any(self.weights < 0):
            raise StateError("widths must be positive and weights non-negative")
        self.box_side = float(box_side)
        lo, hi = self.support_box()
        self.total_mass = float(self.box_integral(lo, hi))

    def box_integral(self, lo, hi):
        lo, hi = _as_boxes(lo, hi, self.dim)
        half = self.box_side / 2
        lo = np.clip(lo, -half, half)[..., None, :]
        hi = np.clip(hi, -half, half)[..., None, :]
        hi = np.maximum(hi, lo)
        scale = np.sqrt(2.0) * self.widths[:, None]
        a = (lo - self.centers) / scale
        b = (hi - self.centers) / scale
        per_axis = 0.5 * (self._erf(b) - self._erf(a))
        return np.maximum(np.sum(self.weights * np.prod(per_axis, axis=-1), axis=-1), 0.0)

    def evaluate(self, points):
        points = np.asarray(points, dtype=float)
        r2 = np.sum((points[..., None, :] - self.centers) ** 2, axis=-1)
        norm = (2 * np.pi * self.widths ** 2) ** (-self.dim / 2)
        vals = np.sum(self.weights * norm * np.exp(-r2 / (2 * self.widths ** 2)), axis=-1)
        inside = np.all(np.abs(points) <= self.box_side / 2, axis=-1)
        return np.where(inside, vals, 0.0)

    def power_integral(self, exponent: float, boxes=None, points_per_axis: int = 512):
        grid = cell_centers(self.dim, self.box_side, points_per_axis)
        mesh = np.stack(np.meshgrid(*([grid] * self.dim), indexing="ij"), axis=-1)
        cells = self.evaluate(mesh)
        return GridDensity(cells, self.box_side).power_integral(exponent, boxes)

    def to_unit(self):
        if self.box_side == 1.0:
            return self
        f = 1.0 / self.box_side
        return GaussianMixtureDensity(self.centers * f, self.widths * f, self.weights, 1.0)


class EmpiricalDensity(DensityProfile):
    """Density estimate from sampled configurations (Monte Carlo only)."""

    def __init__(self, configs: np.ndarray, box_side: float = 1.0):
        configs = np.asarray(configs, dtype=float)
        self.configs = configs
        self.count, self.n_particles, self.dim = configs.shape
        self.box_side = float(box_side)
        self.total_mass = float(self.n_particles)

    def box_integral(self, lo, hi):
        lo, hi = _as_boxes(lo, hi, self.dim)
        pts = self.configs.reshape(-1, self.dim)
        flat_lo = lo.reshape(-1, self.dim)
        flat_hi = hi.reshape(-1, self.dim)
        out = np.empty(len(flat_lo))
        for k, (a, b) in enumerate(zip(flat_lo, flat_hi)):
            inside = np.all((pts >= a) & (pts < b), axis=1)
            out[k] = inside.sum() / self.count
        return out.reshape(lo.shape[:-1])

    def power_integral_estimate(self, exponent: float, points_per_axis: int = 64,
                                batches: int = 10):
        """Histogram estimate with a batch-means standard error."""
        edges = np.linspace(-self.box_side / 2, self.box_side / 2, points_per_axis + 1)
        vol = (self.box_side / points_per_axis) ** self.dim
        values = []
        for chunk in np.array_split(self.configs, batches):
            hist, _ = np.histogramdd(chunk.reshape(-1, self.dim), bins=[edges] * self.dim)
            rho = hist / (len(chunk) * vol)
            values.append(np.sum(rho ** exponent) * vol)
        hist, _ = np.histogramdd(self.configs.reshape(-1, self.dim), bins=[edges] * self.dim)
        rho = hist / (self.count * vol)
        mean = float(np.sum(rho ** exponent) * vol)
        return mean, float(np.std(values, ddof=1) / np.sqrt(batches))


def density_of(state: ManyBodyState) -> GridDensity:
    """One-body density ``rho(x) = sum_j |phi_j(x)|^2``.

    Exact for product states, and for Slater determinants thanks to the
    orthonormality checked at construction.
    """
    if not isinstance(state, ManyBodyState):
        raise StateError("density_of expects a ManyBodyState")
    cells = np.zeros(state.orbitals[0].values.shape)
    for phi in state.orbitals:
        cells = cells + np.abs(phi.values) ** 2
    return GridDensity(cells, state.box_side, source=state)


def field_density(u: GridField) -> GridDensity:
    return GridDensity(np.abs(u.values) ** 2, u.box_side, source=u)


def density_power_integral(rho, s: float, region=None, mc: bool = False):
    """Integral of ``rho^(1 + 2s/d)`` over ``region`` (default: the whole box).

    ``region`` is a ``(lo, hi)`` pair of corner arrays or an object with a
    ``boxes()`` method in unit coordinates (mapped by the density box side).
    Returns a float, or ``(estimate, std_error)`` for Monte Carlo densities.
    """
    if s <= 0:
        raise StateError("s must be positive")
    if isinstance(rho, GridField):
        rho = field_density(rho)
    exponent = 1.0 + 2.0 * s / rho.dim
    if isinstance(rho, EmpiricalDensity):
        if not mc:
            raise CapabilityError("density has no pointwise evaluation and MC is disabled")
        if region is not None:
            raise CapabilityError("region-restricted MC power integrals are not supported")
        return rho.power_integral_estimate(exponent)
    if region is None:
        return float(rho.power_integral(exponent))
    lo, hi = region_boxes(region, rho.box_side, rho.dim)
    return float(np.sum(rho.power_integral(exponent, (lo, hi))))


def region_boxes(region, box_side: float, dim: int):
    """Normalize a region to disjoint ``(lo, hi)`` corner arrays in physical units."""
    if hasattr(region, "boxes"):
        lo, hi = region.boxes()
        return np.asarray(lo) * box_side, np.asarray(hi) * box_side
    lo, hi = region
    lo = np.atleast_2d(np.asarray(lo, dtype=float))
    hi = np.atleast_2d(np.asarray(hi, dtype=float))
    if lo.shape[-1] != dim:
        raise StateError(f"region boxes must be {dim}-dimensional")
    return lo, hi


def cell_weights(region, dim: int, box_side: float, points_per_axis: int) -> np.ndarray:
    """Fraction of each grid cell covered by a union of disjoint boxes."""
    lo, hi = region_boxes(region, box_side, dim)
    half = box_side / 2
    tol = 1e-12 * box_side
    if np.any(lo < -half - tol) or np.any(hi > half + tol):
        raise StateError("region extends outside the grid box")
    dx = box_side / points_per_axis
    edges = -half + dx * np.arange(points_per_axis + 1)
    weights = np.zeros((points_per_axis,) * dim)
    for a, b in zip(lo, hi):
        factors = []
        slices = []
        for axis in range(dim):
            ov = np.clip(np.minimum(b[axis], edges[1:]) - np.maximum(a[axis], edges[:-1]),
                         0.0, None) / dx
            nz = np.nonzero(ov)[0]
            if len(nz) == 0:
                break
            sl = slice(nz[0], nz[-1] + 1)
            slices.append(sl)
            factors.append(ov[sl])
        else:
            block = factors[0]
            for f in factors[1:]:
                block = np.multiply.outer(block, f)
            weights[tuple(slices)] += block
    return np.minimum(weights, 1.0)


# --- sampling ---------------------------------------------------------------

def _cell_positions(rng, flat_idx, field_shape, box_side, dx):
    idx = np.stack(np.unravel_index(flat_idx, field_shape), axis=-1)
    jitter = rng.random(idx.shape)
    return -box_side / 2 + (idx + jitter) * dx


def _sample_product(state: ManyBodyState, count: int, rng) -> np.ndarray:
    shape = state.orbitals[0].values.shape
    dx = state.orbitals[0].dx
    out = np.empty((count, state.n_particles, state.dim))
    for j, phi in enumerate(state.orbitals):
        p = np.abs(phi.values.ravel()) ** 2
        cdf = np.cumsum(p)
        cdf /= cdf[-1]
        flat = np.searchsorted(cdf, rng.random(count), side="right")
        flat = np.minimum(flat, len(cdf) - 1)
        out[:, j, :] = _cell_positions(rng, flat, shape, state.box_side, dx)
    return out


def _sample_slater(state: ManyBodyState, count: int, rng) -> np.ndarray:
    """Projection-DPP sampling on the lattice cells, batched over samples.

    For cellwise-constant orbitals the determinant is constant on product
    cells, so drawing cells from the discrete DPP and jittering uniformly
    inside each cell samples ``|Psi|^2`` exactly.
    """
    orbs = orthonormalize(state.orbitals)
    shape = orbs[0].values.shape
    dx = orbs[0].dx
    n = state.n_particles
    basis = np.stack([phi.values.ravel() for phi in orbs], axis=1) * np.sqrt(orbs[0].cell_volume)
    v = np.broadcast_to(basis, (count,) + basis.shape).copy()
    rows = np.arange(count)
    cells = np.empty((count, n), dtype=int)
    for step in range(n):
        r = n - step
        p = np.sum(np.abs(v) ** 2, axis=2)
        cdf = np.cumsum(p, axis=1)
        cdf /= cdf[:, -1:]
        u = rng.random(count)
        pick = np.minimum((cdf < u[:, None]).sum(axis=1), cdf.shape[1] - 1)
        cells[:, step] = pick
        if r == 1:
            break
        row = v[rows, pick, :]
        w = row.conj() / np.linalg.norm(row, axis=1, keepdims=True)
        # Householder reflection sending w to a multiple of e_1; the remaining
        # columns span the complement of w.
        alpha = -np.exp(1j * np.angle(w[:, 0]))
        hv = w.copy()
        hv[:, 0] -= alpha
        hnorm = np.sum(np.abs(hv) ** 2, axis=1, keepdims=True)
        eye = np.eye(r)
        refl = eye[None] - 2 * hv[:, :, None] * hv.conj()[:, None, :] / hnorm[:, :, None]
        v = np.einsum("snr,srk->snk", v, refl[:, :, 1:])
    out = np.empty((count, n, state.dim))
    for j in range(n):
        out[:, j, :] = _cell_positions(rng, cells[:, j], shape, state.box_side, dx)
    order = rng.permuted(np.tile(np.arange(n), (count, 1)), axis=1)
    return np.take_along_axis(out, order[:, :, None], axis=1)


def sample_configurations(state: ManyBodyState, count: int, seed: int,
                          slater_cap: int = DEFAULT_SLATER_CAP) -> np.ndarray:
    """Draw ``count`` N-point configurations distributed as ``|Psi|^2``.

    Returns an array of shape ``(count, N, d)`` in physical coordinates.
    Deterministic for a fixed seed; configurations with coincident points
    are rejected and redrawn.
    """
    if state.kind == "slater" and state.n_particles > slater_cap:
        raise CapabilityError(
            f"determinantal sampling is capped at N={slater_cap} (got {state.n_particles})")
    rng = np.random.default_rng(seed)
    sampler = _sample_product if state.kind == "product" else _sample_slater
    configs = sampler(state, count, rng)
    rejected = 0
    while state.n_particles > 1:
        bad = _coincident_rows(configs)
        if not np.any(bad):
            break
        rejected += int(bad.sum())
        configs[bad] = sampler(state, int(bad.sum()), rng)
    if rejected:
        logger.info("resampled %d configurations with coincident points", rejected)
    return configs


def _coincident_rows(configs: np.ndarray) -> np.ndarray:
    diff = configs[:, :, None, :] - configs[:, None, :, :]
    same = np.all(diff == 0, axis=-1)
    n = configs.shape[1]
    same[:, np.arange(n), np.arange(n)] = False
    return same.any(axis=(1, 2))


# --- file formats -----------------------------------------------------------

def save_orbital(path, u: GridField):
    """Write raw little-endian complex128 values plus a JSON header sidecar."""
    path = Path(path)
    header = {"dim": u.dim, "box_side": u.box_side, "points_per_axis": u.points_per_axis,
              "dtype": "complex128", "order": "C"}
    path.with_suffix(".json").write_text(json.dumps(header, indent=2) + "\n")
    np.ascontiguousarray(u.values, dtype="<c16").tofile(path)


def load_orbital(path) -> GridField:
    path = Path(path)
    header = json.loads(path.with_suffix(".json").read_text())
    m, d = int(header["points_per_axis"]), int(header["dim"])
    values = np.fromfile(path, dtype="<c16")
    if values.size != m ** d:
        raise StateError(f"{path}: expected {m ** d} values, found {values.size}")
    return GridField(d, float(header["box_side"]), m, values.reshape((m,) * d))


def export_density_slice(path, rho: GridDensity, axis: int = 0, index=None):
    """CSV of the density along one grid axis through the given cell index."""
    m = rho.points_per_axis
    if index is None:
        index = [m // 2] * rho.dim
    index = list(index)
    xs = cell_centers(rho.dim, rho.box_side, m)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "rho"])
        for j in range(m):
            index[axis] = j
            writer.writerow([f"{xs[j]:.12g}", f"{rho.cells[tuple(index)]:.12g}"])

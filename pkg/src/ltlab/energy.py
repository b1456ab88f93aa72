"""Fractional kinetic energies, Hardy potential energies and closed-form constants."""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gamma, zeta

from .states import (DensityProfile, GridDensity, GridField, StateError, cell_centers,
                     cell_weights, field_density)


class DomainError(ValueError):
    """Parameters outside the domain where a formula is defined."""


@dataclass(frozen=True)
class FractionalOrder:
    """Split ``s = m + sigma`` with integer ``m`` and ``sigma`` in ``[0, 1)``."""

    s: float
    m: int
    sigma: float

    @classmethod
    def of(cls, s: float) -> "FractionalOrder":
        if not s > 0:
            raise DomainError("s must be positive")
        m = int(math.floor(s))
        sigma = s - m
        if sigma == 0:
            sigma = 0.0  # guard against -0.0
        return cls(float(s), m, sigma)


@dataclass(frozen=True)
class ParamTable:
    d: int
    s: FractionalOrder
    t0: float
    t1: float
    eta1: float
    eta2: float | None
    k1: float
    k2: float | None
    hardy_c: float | None
    weight_c: float | None

    def as_row(self) -> dict:
        return {"d": self.d, "s": self.s.s, "m": self.s.m, "sigma": self.s.sigma,
                "t0": self.t0, "t1": self.t1, "eta1": self.eta1, "eta2": self.eta2,
                "k1": self.k1, "k2": self.k2, "hardy_c": self.hardy_c,
                "weight_c": self.weight_c}


def hardy_constant(d: int, s: float) -> float:
    """Sharp constant of the fractional Hardy inequality,
    ``2^(2s) (Gamma((d+2s)/4) / Gamma((d-2s)/4))^2``."""
    if not 0 < s < d / 2:
        raise DomainError(f"hardy constant needs 0 < s < d/2 (d={d}, s={s})")
    return float(2.0 ** (2 * s) * (gamma((d + 2 * s) / 4) / gamma((d - 2 * s) / 4)) ** 2)


def seminorm_weight(d: int, sigma: float) -> float:
    """Normalization ``c_{d,sigma}`` of the Gagliardo double integral.

    ``|Gamma(-sigma)|`` is evaluated through the reflection formula
    ``pi / (sin(pi sigma) Gamma(1 + sigma))``.
    """
    if not 0 < sigma < 1:
        raise DomainError("sigma must lie in (0, 1)")
    abs_gamma = math.pi / (math.sin(math.pi * sigma) * math.gamma(1 + sigma))
    return 2.0 ** (2 * sigma - 1) * math.gamma(d / 2 + sigma) / (math.pi ** (d / 2) * abs_gamma)


def param_table(d: int, s: float) -> ParamTable:
    if d < 1:
        raise DomainError("d must be >= 1")
    order = FractionalOrder.of(s)
    sig = order.sigma
    if sig == 0:
        t0 = t1 = s - 1.0
    else:
        t0 = s - min(sig, 1 - sig) / 4
        t1 = s - min(sig, 1 - sig) / 8
    eta1 = 2 * sig * s / (d * (s - t0)) + t0 / (s - t0)
    k1 = min(1.0, 2 * s / d) / (1 + 2 * s + eta1)
    eta2 = k2 = hardy_c = None
    if s < d / 2:
        second = 0.0 if sig == 0 else 2 * sig * t1 / (d * (t1 - t0))
        eta2 = (s + t1) / (s - t1) + second
        k2 = (2 * s / d) / (1 + 2 * s + eta2)
        hardy_c = hardy_constant(d, s)
    weight_c = seminorm_weight(d, sig) if sig > 0 else None
    return ParamTable(d, order, t0, t1, eta1, eta2, k1, k2, hardy_c, weight_c)


def dump_param_csv(path, keys):
    """Write one ParamTable row per ``(d, s)`` key."""
    rows = [param_table(d, s).as_row() for d, s in keys]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        for row in rows:
            writer.writerow({k: ("" if v is None else repr(v)) for k, v in row.items()})


# --- Fourier calculus on the torus -------------------------------------------

def wavenumbers(u: GridField) -> list[np.ndarray]:
    """Broadcastable angular wavenumber arrays, one per axis."""
    k = 2 * np.pi * np.fft.fftfreq(u.points_per_axis, d=u.dx)
    out = []
    for axis in range(u.dim):
        shape = [1] * u.dim
        shape[axis] = -1
        out.append(k.reshape(shape))
    return out


def symbol(u: GridField, s: float) -> np.ndarray:
    ks = wavenumbers(u)
    k2 = sum(k ** 2 for k in ks)
    with np.errstate(divide="ignore"):
        out = np.where(k2 > 0, k2 ** s, 0.0)
    return out


def kinetic_energy(u: GridField, s: float) -> float:
    """``<u, (-Delta)^s u>`` on the torus via the multiplier ``|k|^(2s)``."""
    coeff = np.fft.fftn(u.values) * u.cell_volume
    return float(np.sum(symbol(u, s) * np.abs(coeff) ** 2) / u.box_side ** u.dim)


def fractional_laplacian(u: GridField, s: float) -> GridField:
    return u.with_values(np.fft.ifftn(symbol(u, s) * np.fft.fftn(u.values)))


def spectral_derivative(u: GridField, alpha) -> np.ndarray:
    """``d^alpha u`` by Fourier differentiation (Nyquist mode dropped for odd orders)."""
    spec = np.fft.fftn(u.values)
    m = u.points_per_axis
    for axis, order in enumerate(alpha):
        if order == 0:
            continue
        k = 2 * np.pi * np.fft.fftfreq(m, d=u.dx)
        if order % 2 == 1:
            k = k.copy()
            k[m // 2] = 0.0
        shape = [1] * u.dim
        shape[axis] = -1
        spec = spec * ((1j * k) ** order).reshape(shape)
    return np.fft.ifftn(spec)


def multi_indices(d: int, m: int):
    """All ``alpha`` with ``|alpha| = m`` and their multinomial weights ``m!/alpha!``."""
    for alpha in itertools.product(range(m + 1), repeat=d):
        if sum(alpha) == m:
            w = math.factorial(m)
            for a in alpha:
                w //= math.factorial(a)
            yield alpha, w


# --- localized seminorm ------------------------------------------------------

@lru_cache(maxsize=None)
def _pyramid_nodes(d: int, order: int = 24):
    """Gauss-Legendre nodes on ``[0,1]^(d-1)`` for the pyramid decomposition
    ``z = t (1, a)`` of the unit cube."""
    x, w = np.polynomial.legendre.leggauss(order)
    x = 0.5 * (x + 1)
    w = 0.5 * w
    if d == 1:
        return np.zeros((1, 0)), np.ones(1)
    pts = np.stack(np.meshgrid(*([x] * (d - 1)), indexing="ij"), axis=-1).reshape(-1, d - 1)
    wts = np.prod(np.stack(np.meshgrid(*([w] * (d - 1)), indexing="ij"), axis=-1),
                  axis=-1).ravel()
    return pts, wts


@lru_cache(maxsize=None)
def self_cell_integral(d: int, sigma: float) -> float:
    """``int_{[0,1]^d} int_{[0,1]^d} |x - y|^(2 - d - 2 sigma) dx dy``.

    The difference ``z = x - y`` has density ``prod(1 - |z_i|)``; each orthant
    splits into ``d`` pyramids where one coordinate dominates, and the radial
    integral of the polynomial weight is done in closed form.
    """
    expo = 2 - d - 2 * sigma
    a, w = _pyramid_nodes(d)
    c = np.concatenate([np.ones((len(a), 1)), a], axis=1)
    # prod_i (1 - t c_i) as polynomial coefficients in t
    poly = np.ones((len(a), 1))
    for i in range(d):
        nxt = np.zeros((len(a), poly.shape[1] + 1))
        nxt[:, :-1] += poly
        nxt[:, 1:] -= poly * c[:, i:i + 1]
        poly = nxt
    ks = np.arange(poly.shape[1])
    # t^(expo + d - 1) from |z|^expo times the Jacobian t^(d-1)
    radial = np.sum(poly / (expo + d + ks), axis=1)
    angular = np.sum(c ** 2, axis=1) ** (expo / 2)
    return float(2 ** d * d * np.sum(w * angular * radial))


def _outside_cube_integral(d: int, a: float, h: float) -> float:
    """``int_{|x|_inf > h} |x|^(-a) dx`` for ``a > d`` by the pyramid split."""
    nodes, w = _pyramid_nodes(d)
    angular = np.sum(w * (1 + np.sum(nodes ** 2, axis=1)) ** (-a / 2))
    return float(2 ** d * d * h ** (d - a) / (a - d) * angular)


def _periodic_kernel(m: int, dx: float, L: float, d: int, sigma: float) -> np.ndarray:
    """Torus kernel ``sum_n |z + nL|^(-d-2sigma)`` on lattice offsets, zero at 0."""
    a = d + 2 * sigma
    if d == 1:
        r = (np.arange(m) * dx) / L
        out = np.zeros(m)
        out[1:] = L ** (-a) * (zeta(a, r[1:]) + zeta(a, 1 - r[1:]))
        return out
    j = np.fft.fftfreq(m, d=1.0 / m) * dx  # signed minimal offsets
    mesh = np.meshgrid(*([j] * d), indexing="ij")
    out = np.zeros((m,) * d)
    near = 3
    for n in itertools.product(range(-near, near + 1), repeat=d):
        r2 = sum((x + ni * L) ** 2 for x, ni in zip(mesh, n))
        with np.errstate(divide="ignore"):
            out += np.where(r2 > 0, r2 ** (-a / 2), 0.0)
    # far images are nearly offset-independent; add their lattice sum once
    far = 30
    grid = np.arange(-far, far + 1)
    nmesh = np.meshgrid(*([grid] * d), indexing="ij")
    nr = np.sqrt(sum(g.astype(float) ** 2 for g in nmesh))
    sup = np.max(np.abs(np.stack(nmesh)), axis=0)
    tail = np.sum(np.where(sup > near, nr, np.inf) ** (-a)) + _outside_cube_integral(d, a, far + 0.5)
    out += tail * L ** (-a)
    out[(0,) * d] = 0.0
    return out


def _euclidean_kernel(m: int, dx: float, d: int, sigma: float) -> np.ndarray:
    """Kernel on a ``2m`` padded lattice in FFT order (offsets in ``(-m, m)``)."""
    a = d + 2 * sigma
    j = np.fft.fftfreq(2 * m, d=1.0 / (2 * m)) * dx
    mesh = np.meshgrid(*([j] * d), indexing="ij")
    r2 = sum(x ** 2 for x in mesh)
    with np.errstate(divide="ignore"):
        return np.where(r2 > 0, r2 ** (-a / 2), 0.0)


def _convolve(field: np.ndarray, kernel_hat: np.ndarray, pad: bool) -> np.ndarray:
    if not pad:
        return np.fft.ifftn(np.fft.fftn(field) * kernel_hat)
    m = field.shape[0]
    big = np.zeros(kernel_hat.shape, dtype=complex)
    big[tuple(slice(0, m) for _ in field.shape)] = field
    out = np.fft.ifftn(np.fft.fftn(big) * kernel_hat)
    return out[tuple(slice(0, m) for _ in field.shape)]


def _pair_sum(w: np.ndarray, D: np.ndarray, kernel_hat: np.ndarray, pad: bool) -> float:
    """``sum_{c != c'} w_c w_c' |D_c - D_c'|^2 K(c - c')`` for symmetric ``K``."""
    wk = _convolve(w.astype(complex), kernel_hat, pad).real
    wdk = _convolve(w * D, kernel_hat, pad)
    first = 2 * np.sum(w * np.abs(D) ** 2 * wk)
    second = 2 * np.real(np.sum(w * np.conj(D) * wdk))
    return float(first - second)


def _is_whole(region) -> bool:
    return region is None or (isinstance(region, str) and region == "all")


def local_seminorm(u: GridField, region, s: float, self_cell: str = "neighbor") -> float:
    """Fractional seminorm of ``u`` localized to ``region``.

    ``region`` is ``None``/``"all"`` for the whole torus, an object with a
    ``boxes()`` method in unit coordinates, or a ``(lo, hi)`` pair of box
    corner arrays in the field's coordinates.  Off-diagonal cell pairs use
    the midpoint rule.  The excluded diagonal cells are filled in either by
    the adjacent-cell midpoint value (``self_cell="neighbor"``, averaged over
    the 2d lattice neighbours) or by the exact self-interaction of the local
    linearization of ``u`` (``self_cell="exact"``).
    """
    if self_cell not in ("neighbor", "exact"):
        raise ValueError("self_cell must be 'neighbor' or 'exact'")
    order = FractionalOrder.of(s)
    d, m_pts = u.dim, u.points_per_axis
    whole = _is_whole(region)
    if whole:
        w = np.ones((m_pts,) * d)
    else:
        w = cell_weights(region, d, u.box_side, m_pts)
    vol = u.cell_volume
    total = 0.0
    if order.sigma == 0:
        for alpha, mult in multi_indices(d, order.m):
            D = spectral_derivative(u, alpha)
            total += mult * vol * float(np.sum(w * np.abs(D) ** 2))
        return total
    sigma = order.sigma
    if whole:
        kernel = _periodic_kernel(m_pts, u.dx, u.box_side, d, sigma)
    else:
        kernel = _euclidean_kernel(m_pts, u.dx, d, sigma)
    kernel_hat = np.fft.fftn(kernel)
    k_adj = float(kernel[(1,) + (0,) * (d - 1)])
    exact_factor = self_cell_integral(d, sigma) * u.dx ** (d + 2 - 2 * sigma) / d
    for alpha, mult in multi_indices(d, order.m):
        D = spectral_derivative(u, alpha)
        pairs = _pair_sum(w, D, kernel_hat, pad=not whole) * vol ** 2
        local = np.zeros(D.shape)
        if self_cell == "exact":
            for axis in range(d):
                step = [0] * d
                step[axis] = 1
                local += np.abs(spectral_derivative(u.with_values(D), step)) ** 2
            diag = exact_factor * float(np.sum(w ** 2 * local))
        else:
            for axis in range(d):
                for shift in (1, -1):
                    local += np.abs(D - np.roll(D, shift, axis=axis)) ** 2
            diag = k_adj * vol ** 2 / (2 * d) * float(np.sum(w ** 2 * local))
        total += mult * (pairs + diag)
    return seminorm_weight(d, sigma) * total


# --- Hardy energy --------------------------------------------------------------

def _radial_power_1d(a, b, s):
    p = 1 - 2 * s
    f = lambda x: np.sign(x) * np.abs(x) ** p / p
    return f(b) - f(a)


@lru_cache(maxsize=None)
def _corner_cell_integral(d: int, s: float) -> float:
    """``int_{[0,1]^d} |x|^(-2s) dx`` through the pyramid decomposition."""
    a, w = _pyramid_nodes(d)
    ang = (1 + np.sum(a ** 2, axis=1)) ** (-s)
    return float(d * np.sum(w * ang) / (d - 2 * s))


@lru_cache(maxsize=16)
def hardy_cell_weights(d: int, s: float, box_side: float, points_per_axis: int) -> np.ndarray:
    """Exact (1D) or high-order quadrature cell integrals of ``|x|^(-2s)``."""
    m, dx = points_per_axis, box_side / points_per_axis
    if m % 2:
        raise StateError("points_per_axis must be even so the origin is a cell vertex")
    edges = -box_side / 2 + dx * np.arange(m + 1)
    if d == 1:
        out = _radial_power_1d(edges[:-1], edges[1:], s)
        out.flags.writeable = False
        return out
    half = m // 2
    x, wq = np.polynomial.legendre.leggauss(8)
    x = 0.5 * (x + 1)
    wq = 0.5 * wq

    def tensor_rule(lo, h):
        # lo: (..., d) lower corners of boxes of side h
        total = np.zeros(lo.shape[:-1])
        for nodes in itertools.product(range(len(x)), repeat=d):
            r2 = sum((lo[..., i] + h * x[n]) ** 2 for i, n in enumerate(nodes))
            total += np.prod(wq[list(nodes)]) * r2 ** (-s)
        return h ** d * total

    # positive-orthant cells [j dx, (j+1) dx]; far cells in one vectorized pass
    idx = np.stack(np.meshgrid(*([np.arange(half)] * d), indexing="ij"), axis=-1)
    quad = tensor_rule(idx * dx, dx)
    sub = 8
    for near in itertools.product(range(min(3, half)), repeat=d):
        if max(near) == 0:
            quad[near] = dx ** (d - 2 * s) * _corner_cell_integral(d, s)
            continue
        parts = np.stack(np.meshgrid(*([np.arange(sub)] * d), indexing="ij"), axis=-1)
        lo = (np.array(near) + parts / sub) * dx
        quad[near] = float(np.sum(tensor_rule(lo, dx / sub)))
    # mirror into the full lattice
    out = quad
    for axis in range(d):
        out = np.concatenate([np.flip(out, axis=axis), out], axis=axis)
    out.flags.writeable = False
    return out


def hardy_energy(rho, region, d: int, s: float, points_per_axis: int | None = None,
                 box_side: float | None = None) -> float:
    """``C_{d,s} int_region rho(x) |x|^(-2s) dx`` with cellwise constant ``rho``.

    ``rho`` may be a GridField (uses ``|u|^2``), a GridDensity, or any
    box-integral density oracle, which is then averaged onto a grid of
    ``points_per_axis`` cells.
    """
    c = hardy_constant(d, s)
    if isinstance(rho, GridField):
        rho = field_density(rho)
    if not isinstance(rho, GridDensity):
        if not isinstance(rho, DensityProfile) or points_per_axis is None:
            raise StateError("hardy_energy needs a grid density or an oracle plus points_per_axis")
        side = rho.box_side if box_side is None else box_side
        xs = cell_centers(d, side, points_per_axis)
        dx = side / points_per_axis
        mesh = np.stack(np.meshgrid(*([xs] * d), indexing="ij"), axis=-1)
        cells = rho.box_integral(mesh - dx / 2, mesh + dx / 2) / dx ** d
        rho = GridDensity(cells, side)
    if rho.dim != d:
        raise StateError("density dimension does not match d")
    W = hardy_cell_weights(d, float(s), rho.box_side, rho.points_per_axis)
    w = 1.0 if _is_whole(region) else cell_weights(region, d, rho.box_side, rho.points_per_axis)
    return c * float(np.sum(w * rho.cells * W))

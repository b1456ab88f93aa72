import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate
from scipy.special import gamma

from ltlab.energy import (DomainError, FractionalOrder, hardy_cell_weights, hardy_constant,
                          hardy_energy, kinetic_energy, local_seminorm, param_table,
                          self_cell_integral, seminorm_weight, spectral_derivative)
from ltlab.states import GridDensity, gaussian_field


def test_fractional_order_split():
    f = FractionalOrder.of(2.25)
    assert (f.m, f.sigma) == (2, 0.25)
    assert FractionalOrder.of(1.0).sigma == 0.0
    with pytest.raises(DomainError):
        FractionalOrder.of(0)


@pytest.mark.parametrize("d", range(3, 9))
def test_hardy_constant_classical_case(d):
    # s = 1 reduces to the classical (d - 2)^2 / 4
    assert hardy_constant(d, 1) == pytest.approx((d - 2) ** 2 / 4, rel=1e-13)


@given(d=st.integers(1, 6), s=st.floats(0.05, 2.95))
def test_hardy_constant_matches_mpmath(d, s):
    if not s < d / 2:
        with pytest.raises(DomainError):
            hardy_constant(d, s)
        return
    ref = mpmath.mpf(2) ** (2 * s) * (mpmath.gamma((d + 2 * s) / 4)
                                      / mpmath.gamma((d - 2 * s) / 4)) ** 2
    assert hardy_constant(d, s) == pytest.approx(float(ref), rel=1e-12)


def test_seminorm_weight_against_fourier_identity():
    # 1D plane wave: c * int |1 - e^{ih}|^2 |h|^(-1 - 2 sigma) dh must equal |k|^(2 sigma) = 1.
    # The tail of 2 / h^(1 + 2 sigma) beyond h = 1 is integrated exactly.
    mpmath.mp.dps = 30
    for sigma in (0.2, 0.3, 0.7):
        head = mpmath.quad(lambda h: 2 * (1 - mpmath.cos(h)) * h ** (-1 - 2 * sigma), [0, 1])
        osc = mpmath.quadosc(lambda h: 2 * mpmath.cos(h) * h ** (-1 - 2 * sigma),
                             [1, mpmath.inf], omega=1)
        half = head + 1 / mpmath.mpf(sigma) - osc
        assert seminorm_weight(1, sigma) * 2 * float(half) == pytest.approx(1.0, rel=1e-9)
    mpmath.mp.dps = 15


def test_param_table_general_formula():
    t = param_table(2, 0.5)
    sigma = 0.5
    t0 = 0.5 - min(sigma, 1 - sigma) / 4
    t1 = 0.5 - min(sigma, 1 - sigma) / 8
    eta1 = 2 * sigma * 0.5 / (2 * (0.5 - t0)) + t0 / (0.5 - t0)
    assert t.t0 == pytest.approx(t0) and t.t1 == pytest.approx(t1)
    assert t.eta1 == pytest.approx(eta1)
    assert t.k1 == pytest.approx(min(1, 0.5) / (1 + 1 + eta1))
    assert t.eta2 is not None and t.hardy_c == pytest.approx(hardy_constant(2, 0.5))
    edge = param_table(1, 0.5)  # s = d/2 has no Hardy row
    assert edge.eta2 is None and edge.k2 is None and edge.hardy_c is None


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75, 1.0, 1.5])
def test_kinetic_energy_gaussian_torus_sum(s):
    # independent route: analytic Fourier coefficients of the periodized Gaussian
    w, L, M = 0.9, 30.0, 512
    u = gaussian_field(1, L, M, width=w)
    k = 2 * np.pi * np.arange(-M // 2, M // 2) / L
    c2 = np.exp(-(k * w) ** 2)
    expected = np.sum(np.abs(k) ** (2 * s) * c2) / np.sum(c2)
    assert kinetic_energy(u, s) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("s", [0.25, 0.5, 1.5])
def test_kinetic_energy_gaussian_continuum(s):
    w = 0.9
    expected = gamma(s + 0.5) / (gamma(0.5) * w ** (2 * s))
    errs = []
    for L in (50.0, 200.0):
        u = gaussian_field(1, L, int(16 * L), width=w)
        errs.append(abs(kinetic_energy(u, s) - expected) / expected)
    # the torus lattice sum converges to the line integral as the box grows
    assert errs[1] < errs[0] or errs[1] < 1e-12
    assert errs[1] < 2e-3


def test_kinetic_energy_2d_gaussian_s1():
    u = gaussian_field(2, 20.0, 128, width=1.2)
    assert kinetic_energy(u, 1.0) == pytest.approx(2 * 0.5 / 1.2 ** 2, rel=1e-9)


def test_spectral_derivative_matches_analytic():
    u = gaussian_field(1, 20.0, 256, width=1.0)
    x = u.coords()
    du = spectral_derivative(u, (1,))
    assert np.max(np.abs(du - (-x * u.values))) < 1e-10


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
@pytest.mark.parametrize("sigma", [0.2, 0.5, 0.8])
def test_self_cell_integral_against_quadrature(sigma):
    one = 2 / ((2 - 2 * sigma) * (3 - 2 * sigma))
    assert self_cell_integral(1, sigma) == pytest.approx(one, rel=1e-12)
    f = lambda a, b: 4 * (1 - a) * (1 - b) * (a * a + b * b) ** (-sigma)
    ref, _ = integrate.dblquad(f, 0, 1, 0, 1, epsabs=1e-12, epsrel=1e-10)
    assert self_cell_integral(2, sigma) == pytest.approx(ref, rel=1e-7)


@pytest.mark.parametrize("s", [0.1, 0.3, 0.5])
def test_whole_box_seminorm_matches_kinetic_1d(s):
    u = gaussian_field(1, 16.0, 256, width=1.0)
    assert local_seminorm(u, None, s) == pytest.approx(kinetic_energy(u, s), rel=2e-3)


@pytest.mark.parametrize("s", [0.1, 0.3, 0.5])
def test_whole_box_seminorm_2d_converges(s):
    gaps = []
    for M in (32, 64, 128):
        u = gaussian_field(2, 16.0, M, width=1.0)
        gaps.append(abs(local_seminorm(u, None, s) / kinetic_energy(u, s) - 1))
    assert gaps[0] > gaps[1] > gaps[2] and gaps[2] < 2e-2


def test_exact_rule_is_more_accurate_above_half():
    u = gaussian_field(1, 16.0, 256, width=1.0)
    k = kinetic_energy(u, 0.8)
    gap = lambda rule: abs(local_seminorm(u, None, 0.8, self_cell=rule) / k - 1)
    assert gap("exact") < gap("neighbor")


def test_integer_order_seminorm_is_local():
    u = gaussian_field(1, 16.0, 256, width=1.0)
    assert local_seminorm(u, "all", 1.0) == pytest.approx(kinetic_energy(u, 1.0), rel=1e-12)
    half = local_seminorm(u, (np.array([[0.0]]), np.array([[8.0]])), 1.0)
    assert half == pytest.approx(0.5 * kinetic_energy(u, 1.0), rel=1e-9)


@given(a=st.floats(-7.0, 0.0), b=st.floats(0.0, 7.0), shrink=st.floats(0.0, 0.9))
def test_local_seminorm_monotone_in_region(a, b, shrink):
    u = gaussian_field(1, 16.0, 64, width=1.0)
    outer = (np.array([[a]]), np.array([[b]]))
    inner = (np.array([[a * shrink]]), np.array([[b * shrink]]))
    assert local_seminorm(u, inner, 0.4) <= local_seminorm(u, outer, 0.4) + 1e-14


def test_local_seminorm_dilation():
    s = 0.35
    u = gaussian_field(1, 16.0, 128, width=1.0)
    region = (np.array([[-2.0]]), np.array([[3.0]]))
    a = local_seminorm(u, region, s)
    v = u.rescaled(2.0)
    b = local_seminorm(v, (region[0] * 2, region[1] * 2), s)
    assert b == pytest.approx(a * 2.0 ** (-2 * s), rel=1e-10)


def test_self_cell_rules_both_converge():
    u = gaussian_field(1, 16.0, 256, width=1.0)
    k = kinetic_energy(u, 0.5)
    for rule in ("neighbor", "exact"):
        assert local_seminorm(u, None, 0.5, self_cell=rule) == pytest.approx(k, rel=1e-3)
    with pytest.raises(ValueError):
        local_seminorm(u, None, 0.5, self_cell="bogus")


def test_hardy_energy_1d_indicator_closed_form():
    s = 0.25
    L, M = 8.0, 64
    cells = np.zeros(M)
    x = (np.arange(M) + 0.5) * L / M - L / 2
    cells[(x > 1) & (x < 2)] = 1.0
    rho = GridDensity(cells, L)
    expected = hardy_constant(1, s) * (2 ** (1 - 2 * s) - 1) / (1 - 2 * s)
    assert hardy_energy(rho, None, 1, s) == pytest.approx(expected, rel=1e-12)


def test_hardy_weights_near_origin_3d():
    s, L, M = 0.5, 4.0, 8
    W = hardy_cell_weights(3, s, L, M)
    dx = L / M
    # the eight corner cells share the origin; compare with a fine midpoint rule
    n = 60
    g = (np.arange(n) + 0.5) / n * dx
    X, Y, Z = np.meshgrid(g, g, g, indexing="ij")
    ref = np.mean((X ** 2 + Y ** 2 + Z ** 2) ** (-s)) * dx ** 3
    assert W[M // 2, M // 2, M // 2] == pytest.approx(ref, rel=5e-3)
    assert np.allclose(W, W[::-1, :, :]) and np.allclose(W, W.transpose(1, 0, 2))


def test_hardy_inequality_holds_on_grid():
    u = gaussian_field(3, 10.0, 32, width=1.0)
    rho = GridDensity(np.abs(u.values) ** 2, u.box_side)
    assert kinetic_energy(u, 1.0) - hardy_energy(rho, None, 3, 1.0) > 0

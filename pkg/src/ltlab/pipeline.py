"""Trial-state upper bounds, the assembled lower-bound ledger and lambda scans."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import brentq

from .energy import DomainError, kinetic_energy, param_table
from .geometry import Covering, GeometryError, build_covering, enlarge
from .interaction import interaction_values
from .states import (GridField, ManyBodyState, bump_field, density_of, sample_configurations,
                     translated)


class WrapContactError(GeometryError):
    """Translated copies would touch through the periodic boundary."""


@dataclass(frozen=True)
class BoundConstants:
    """Configured stand-ins for the unnamed constants of the lower-bound chain."""

    C: float = 1.0
    c_gn: float = math.pi ** 2 / 4
    hardy: bool = False


# --- trial states ---------------------------------------------------------------

def support_radius(u: GridField, axis: int = 0, rel_tol: float = 1e-14) -> float:
    """Half-width along ``axis`` of the cells carrying non-negligible ``|u|^2``."""
    dens = np.abs(u.values) ** 2
    live = dens > rel_tol * dens.max()
    coords = u.mesh()[axis]
    return float(np.max(np.abs(coords[live])) + u.dx / 2)


def one_body_quotient(u: GridField, s: float) -> float:
    u = u.normalized()
    p = 1 + 2 * s / u.dim
    return kinetic_energy(u, s) / (u.cell_volume * float(np.sum(np.abs(u.values) ** (2 * p))))


def trial_parts(u: GridField, n: int, ell: float, s: float, samples: int = 20_000,
                seed: int = 0) -> dict:
    """Kinetic, interaction and density terms of the product of ``n`` copies of
    ``u`` translated by ``ell * (j - (n + 1)/2)`` along the first axis."""
    u = u.normalized()
    p = 1 + 2 * s / u.dim
    kin = n * kinetic_energy(u, s)
    single = u.cell_volume * float(np.sum(np.abs(u.values) ** (2 * p)))
    if n == 1 or math.isinf(ell):
        return {"kinetic": kin, "interaction": 0.0, "interaction_std_error": 0.0,
                "denominator": n * single, "overlap": False}
    r = support_radius(u)
    if ell * (n - 1) + 2 * r >= u.box_side:
        raise WrapContactError(
            f"copies at spacing {ell} with support radius {r:.3g} do not fit a box of side "
            f"{u.box_side}")
    offsets = ell * (np.arange(1, n + 1) - (n + 1) / 2)
    rho = np.zeros(u.values.shape)
    for off in offsets:
        shift = np.zeros(u.dim)
        shift[0] = off
        rho += np.abs(translated(u, shift).values) ** 2
    den = u.cell_volume * float(np.sum(rho ** p))
    overlap = ell < 2 * r
    if overlap and 2 * s >= u.dim:
        # coincidence singularity is not integrable for overlapping copies
        return {"kinetic": kin, "interaction": math.inf, "interaction_std_error": 0.0,
                "denominator": den, "overlap": True}
    state = ManyBodyState.product([u] * n)
    configs = sample_configurations(state, samples, seed)
    configs[:, :, 0] += offsets[None, :]
    vals = interaction_values(configs, s)
    return {"kinetic": kin, "interaction": float(vals.mean()),
            "interaction_std_error": float(vals.std(ddof=1) / math.sqrt(len(vals))),
            "denominator": den, "overlap": overlap}


def run_trial_upper(u: GridField, n: int, ell: float, lam: float, s: float,
                    samples: int = 20_000, seed: int = 0) -> float:
    """Quotient ``(kinetic + lam * interaction) / int rho^(1 + 2s/d)`` of the
    translated product trial state."""
    parts = trial_parts(u, n, ell, s, samples, seed)
    num = parts["kinetic"] + (lam * parts["interaction"] if lam else 0.0)
    return num / parts["denominator"]


# --- lower-bound chain -------------------------------------------------------------

def _eta_k(d: int, s: float, hardy: bool):
    tab = param_table(d, s)
    if hardy:
        if tab.eta2 is None:
            raise DomainError("Hardy mode needs s < d/2")
        return tab.eta2, tab.k2
    return tab.eta1, tab.k1


def delta_used(lam: float, d: int, s: float, C: float, hardy: bool = False) -> float:
    """``min{1/2, (1/C)^(d/2s), (C/lam)^(1/(1+2s+eta))}``."""
    eta, _ = _eta_k(d, s, hardy)
    return min(0.5, (1 / C) ** (d / (2 * s)), (C / lam) ** (1 / (1 + 2 * s + eta)))


def chain_conditions(lam: float, delta: float, d: int, s: float, C: float,
                     hardy: bool = False) -> bool:
    eta, _ = _eta_k(d, s, hardy)
    a = C * delta ** (2 * s / d)
    # relative slack: on the lambda-branch the second condition is an identity
    return bool(a < 1) and bool(lam * delta ** (1 + 2 * s) >= max(a, C * delta ** (-eta)) * (1 - 1e-12))


def structural_coefficient(lam: float, d: int, s: float, consts: BoundConstants) -> float:
    """``(1 - C delta^(2s/d)) (1 - delta) (1 + delta)^(-2s/d) C_GN`` when the
    chain conditions hold at the chosen delta, else 0."""
    delta = delta_used(lam, d, s, consts.C, consts.hardy)
    if not chain_conditions(lam, delta, d, s, consts.C, consts.hardy):
        return 0.0
    g = 2 * s / d
    return (1 - consts.C * delta ** g) * (1 - delta) * (1 + delta) ** (-g) * consts.c_gn


def reference_lambda(d: int, s: float, consts: BoundConstants) -> float:
    """Smallest lambda with structural coefficient at least ``C_GN / 2``."""
    eta, _ = _eta_k(d, s, consts.hardy)
    start = consts.C / min(0.5, (1 / consts.C) ** (d / (2 * s))) ** (1 + 2 * s + eta)
    f = lambda lg: structural_coefficient(10 ** lg, d, s, consts) - consts.c_gn / 2
    lo = math.log10(start) + 1e-9
    hi = lo + 1
    while f(hi) < 0:
        hi += 1
        if hi > lo + 60:
            raise DomainError("structural coefficient never reaches C_GN/2")
    if f(lo) >= 0:
        return 10 ** lo
    return 10 ** brentq(f, lo, hi, xtol=1e-12)


def assembled_coefficient(lam: float, d: int, s: float, consts: BoundConstants) -> float:
    """Lower-bound coefficient for every lambda, using the linear small-lambda
    reduction below the reference lambda."""
    lref = reference_lambda(d, s, consts)
    if lam >= lref:
        return structural_coefficient(lam, d, s, consts)
    return lam / lref * structural_coefficient(lref, d, s, consts)


def predicted_curve(lam, d: int, s: float, consts: BoundConstants):
    _, k = _eta_k(d, s, consts.hardy)
    return consts.c_gn - consts.C * np.asarray(lam, dtype=float) ** (-k)


def check_proper_q(cov: Covering) -> bool:
    """Every class-0/1 cube is centred at the origin or at sup-distance at
    least half its side from it."""
    for rec in cov.levels[1:]:
        cubes = list(rec.class0) + [c for k in rec.class1 for c in k.members]
        for c in cubes:
            side = float(c.side)
            if np.allclose(c.center, 0.0, atol=1e-15):
                continue
            gap = np.maximum(np.maximum(c.lower, -c.upper), 0.0)
            if np.linalg.norm(gap) < side / 2 * (1 - 1e-12):
                return False
    return True


@dataclass
class BoundLedger:
    lam: float
    delta_used: float
    constants: BoundConstants
    per_level: list
    assembled_lower: float
    state_coefficient: float
    gn_reference: float
    prediction: float
    conditions_hold: bool
    errors_absorbed: bool
    proper_q: bool | None = None
    totals: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["constants"] = asdict(self.constants)
        return out


def assemble_lower_bound(state: ManyBodyState, covering: Covering | None, lam: float,
                         s: float, consts: BoundConstants = BoundConstants(),
                         max_depth: int = 20) -> BoundLedger:
    """Evaluate every term of the lower-bound chain for one state.

    Terms are in the state's physical units (cube side ``L eps^n``).  When
    ``covering`` is None it is built from the state's density with the
    chosen delta (and eps = 1/3 in Hardy mode).
    """
    d = state.dim
    delta = delta_used(lam, d, s, consts.C, consts.hardy)
    rho = density_of(state)
    if covering is None:
        eps = "1/3" if consts.hardy else "1/2"
        covering = build_covering(rho, delta, eps, max_depth)
    if not covering.terminated:
        raise GeometryError("the lower-bound chain needs a terminated covering")
    if abs(covering.delta - delta) > 1e-12 * delta:
        raise GeometryError(f"covering delta {covering.delta} differs from the chosen {delta}")
    if consts.hardy and covering.epsilon != Fraction(1, 3):
        raise GeometryError("Hardy mode requires eps = 1/3")
    eta, _ = _eta_k(d, s, consts.hardy)
    L = state.box_side
    p = 1 + 2 * s / d
    g = 2 * s / d
    C = consts.C
    factor1 = (1 - C * delta ** g) * (1 - delta) * (1 + delta) ** (-g)
    # the exclusion credits need heavy parents; the root is class 2 by
    # convention even when its mass is below 1 + delta
    credit_on = covering.total_mass >= 1 + covering.delta
    levels = []
    for rec in covering.levels[1:]:
        side = L * float(covering.epsilon) ** rec.n
        if rec.class0:
            lo = np.array([c.lower for c in rec.class0]) * L
            hi = np.array([c.upper for c in rec.class0]) * L
            m0 = float(np.sum(rho.box_integral(lo, hi)))
            p0 = float(np.sum(rho.power_integral(p, (lo, hi))))
        else:
            m0 = p0 = 0.0
        p1 = e1 = m1 = 0.0
        for k in rec.class1:
            lo = np.array([c.lower for c in k.members]) * L
            hi = np.array([c.upper for c in k.members]) * L
            p1 += float(np.sum(rho.power_integral(p, (lo, hi))))
            m1 += float(np.sum(rho.box_integral(lo, hi)))
            elo, ehi = enlarge(k, covering.tau).boxes()
            e1 += float(np.sum(rho.box_integral(elo * L, ehi * L)))
        err0_mass = m0 + (m1 if consts.hardy else 0.0)
        levels.append({
            "n": rec.n,
            "class0_uncertainty_gain": consts.c_gn * p0,
            "class1_uncertainty_gain": factor1 * consts.c_gn * p1,
            "class0_error": C * delta ** g * side ** (-2 * s) * err0_mass,
            "class1_error": (1 - C * delta ** g) * C * side ** (-2 * s) * delta ** (-eta) * e1,
            "interaction_credit": (lam * delta ** (1 + 2 * s) / C * side ** (-2 * s) * (m0 + e1)
                                   if credit_on else 0.0),
        })
    tot = {k: math.fsum(lv[k] for lv in levels) for k in levels[0]} if levels else {}
    tot.pop("n", None)
    total_density = float(rho.power_integral(p))
    chain = (tot.get("class0_uncertainty_gain", 0.0) + tot.get("class1_uncertainty_gain", 0.0)
             - tot.get("class0_error", 0.0) - tot.get("class1_error", 0.0)
             + tot.get("interaction_credit", 0.0))
    absorbed = all(lv["interaction_credit"] >= lv["class0_error"] + lv["class1_error"]
                   for lv in levels)
    conds = chain_conditions(lam, delta, d, s, C, consts.hardy)
    return BoundLedger(
        lam=lam, delta_used=delta, constants=consts, per_level=levels,
        assembled_lower=structural_coefficient(lam, d, s, consts),
        state_coefficient=chain / total_density if total_density > 0 else 0.0,
        gn_reference=consts.c_gn, prediction=float(predicted_curve(lam, d, s, consts)),
        conditions_hold=conds, errors_absorbed=bool(absorbed),
        proper_q=check_proper_q(covering) if consts.hardy else None,
        totals={**tot, "density_power_integral": total_density})


# --- lambda scan ---------------------------------------------------------------------

@dataclass
class QuotientScan:
    lambdas: list
    trial_upper: list
    trial_finite: list
    assembled_lower: list
    gn_gap_prediction: list
    delta_used: list
    lambda_branch: list
    gn_reference: float
    reference_lambda: float
    d: int
    s: float
    constants: BoundConstants

    def rows(self):
        for i, lam in enumerate(self.lambdas):
            yield {"lambda": lam, "trial_upper": self.trial_upper[i],
                   "trial_finite_ell": self.trial_finite[i],
                   "assembled_lower": self.assembled_lower[i],
                   "gn_gap_prediction": self.gn_gap_prediction[i],
                   "delta_used": self.delta_used[i], "lambda_branch": self.lambda_branch[i],
                   "gn_reference": self.gn_reference}

    def ordering_ok(self) -> bool:
        return all(u >= l for u, l in zip(self.trial_upper, self.assembled_lower))

    def gap_non_increasing(self, tol: float = 1e-12) -> bool:
        gaps = [abs(u - self.gn_reference) for u in self.trial_upper]
        return all(b <= a + tol for a, b in zip(gaps, gaps[1:]))


def scan_lambda(lambdas, d: int = 1, s: float = 1.0, n: int = 3,
                profiles=None, ells=(4.0, 8.0, 16.0), width: float = 1.0,
                box_side: float = 64.0, points_per_axis: int = 1024,
                samples: int = 20_000, seed: int = 0,
                consts: BoundConstants = BoundConstants(), gn_value: float | None = None) -> QuotientScan:
    """Upper/lower brackets of the optimal constant across a lambda grid.

    ``profiles`` are normalized one-body fields (default: a compact bump);
    trial quotients are minimized over profiles, spacings ``ell * width`` and
    the infinite-separation limit.  Sample streams are shared across lambda.
    """
    if profiles is None:
        profiles = [bump_field(d, box_side, points_per_axis, width=width)]
    gn_ref = consts.c_gn if gn_value is None else gn_value
    parts = []
    for u in profiles:
        q1 = one_body_quotient(u, s)
        finite = []
        for ell in ells:
            try:
                finite.append(trial_parts(u, n, ell * width, s, samples, seed))
            except WrapContactError:
                continue
        parts.append((q1, finite))
    lref = reference_lambda(d, s, consts)
    ups, fin, lows, preds, deltas, branch = [], [], [], [], [], []
    for lam in lambdas:
        best_finite = math.inf
        best = math.inf
        for q1, finite in parts:
            best = min(best, q1)
            for pr in finite:
                q = (pr["kinetic"] + lam * pr["interaction"]) / pr["denominator"]
                best_finite = min(best_finite, q)
        ups.append(float(min(best, best_finite)))
        fin.append(float(best_finite))
        lows.append(float(assembled_coefficient(lam, d, s, consts)))
        preds.append(float(predicted_curve(lam, d, s, consts)))
        dl = delta_used(lam, d, s, consts.C, consts.hardy)
        deltas.append(dl)
        eta, _ = _eta_k(d, s, consts.hardy)
        branch.append(bool(dl == (consts.C / lam) ** (1 / (1 + 2 * s + eta))))
        deltas[-1] = float(dl)
    return QuotientScan(list(map(float, lambdas)), ups, fin, lows, preds, deltas, branch,
                        gn_ref, lref, d, s, consts)

"""End-to-end acceptance checks, one test per criterion."""

import math
import re
import shutil
import subprocess
import sys
import time

import numpy as np
import pytest

from ltlab.energy import hardy_constant, kinetic_energy, local_seminorm, param_table
from ltlab.geometry import (build_covering, check_covering, cluster_size_bound,
                            covering_to_json, random_mixture)
from ltlab.interaction import layered_lower_bound, sample_inequalities
from ltlab.pipeline import BoundConstants, one_body_quotient, run_trial_upper, scan_lambda
from ltlab.report import build_report, write_csv
from ltlab.solvers import (QuotientProblem, SpectralBoundInstance, fermionic_ratio,
                           random_slater, sech_quotient, solve_gn, spectral_bound_check)
from ltlab.states import (ManyBodyState, bump_field, density_of, gaussian_field,
                          orthonormalize, sample_configurations)


def _ltlab(*args):
    exe = shutil.which("ltlab")
    cmd = [exe] if exe else [sys.executable, "-m", "ltlab.cli"]
    return subprocess.run(cmd + list(args), capture_output=True, text=True)


def test_criterion_01_gn_constant_via_cli(tmp_path, criterion):
    oracle = sech_quotient(2.0)
    assert oracle == pytest.approx(math.pi ** 2 / 4, rel=1e-15)
    t0 = time.perf_counter()
    proc = _ltlab("--run-dir", str(tmp_path), "gn", "solve", "-d", "1", "-s", "1",
                  "-L", "24", "-M", "512")
    elapsed = time.perf_counter() - t0
    assert proc.returncode == 0, proc.stderr
    value = float(re.search(r"^value (\S+)", proc.stdout, re.M).group(1))
    assert (tmp_path / "gn_trace.csv").exists()
    ok = abs(value - oracle) < 1e-3 and elapsed < 30
    criterion(1, ok, f"value={value:.6f} oracle={oracle:.6f} gap={value - oracle:.2e} "
                     f"time={elapsed:.1f}s")


def test_criterion_02_hardy_constants(criterion):
    a = hardy_constant(3, 1)
    b = hardy_constant(3, 0.5)
    ok = abs(a - 0.25) <= 1e-12 and abs(b - 2 / math.pi) <= 1e-12
    criterion(2, ok, f"C(3,1)-1/4={a - 0.25:.1e} C(3,1/2)-2/pi={b - 2 / math.pi:.1e}")


def test_criterion_03_parameter_table_s1(criterion):
    ok = True
    for d in range(1, 7):
        t = param_table(d, 1)
        ok &= t.t0 == 0 and t.t1 == 0 and t.eta1 == 0
        ok &= t.k1 == min(1 / 3, 2 / (3 * d))
        if d >= 3:
            ok &= t.eta2 == 1 and t.k2 == 1 / (2 * d)
        else:
            ok &= t.eta2 is None and t.k2 is None
    criterion(3, ok, "d=1..6: eta1=0, k1=min(1/3,2/(3d)); d>=3: eta2=1, k2=1/(2d)")


def test_criterion_04_covering_suite(criterion):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    failures = []
    for i in range(200):
        d = 1 + i % 2
        eps = "1/2" if (i // 2) % 2 == 0 else "1/3"
        delta = float(rng.uniform(0.1, 0.9))
        rho = random_mixture(rng, d)
        cov = build_covering(rho, delta, eps)
        problems = check_covering(cov)
        bound = cluster_size_bound(delta)
        for rec in cov.levels[1:]:
            if any(len(k.members) > bound for k in rec.class1):
                problems.append("cluster size")
        if covering_to_json(build_covering(rho, delta, eps)) != covering_to_json(cov):
            problems.append("rebuild differs")
        if problems:
            failures.append((i, problems))
    elapsed = time.perf_counter() - t0
    criterion(4, not failures and elapsed < 120,
              f"200 coverings, failures={len(failures)}, time={elapsed:.1f}s")


def _exclusion_states(rng):
    """Twenty states with heavy enough densities to produce class-2 levels."""
    states = []
    for i in range(20):
        s = (0.25, 0.5, 1.0)[i % 3]
        if i % 4 == 3:
            L, M = 8.0, 128
            n = int(rng.integers(2, 5))
            c = rng.uniform(-0.3, 0.3)
            fields = [gaussian_field(1, L, M, width=0.4, center=[c + 0.1 * j]) for j in range(n)]
            x = fields[0].coords()
            fields = [f.with_values(f.values * (x - c) ** j) for j, f in enumerate(fields)]
            states.append((ManyBodyState.slater(orthonormalize(fields)), s))
            continue
        if i % 5 == 4:
            L, M = 8.0, 48
            n = int(rng.integers(3, 7))
            fields = [gaussian_field(2, L, M, width=float(rng.uniform(0.2, 0.5)),
                                     center=rng.uniform(-0.6, 0.6, size=2)) for _ in range(n)]
            states.append((ManyBodyState.product(fields), s))
            continue
        L, M = 8.0, 256
        n = int(rng.integers(3, 9))
        centers = rng.uniform(-1.0, 1.0, size=n)
        fields = [gaussian_field(1, L, M, width=float(rng.uniform(0.1, 0.5)), center=[c])
                  for c in centers]
        states.append((ManyBodyState.product(fields), s))
    return states


def test_criterion_05_exclusion_per_sample(criterion):
    rng = np.random.default_rng(5)
    totals = {"samples": 0, "layer_violations": 0, "count_violations": 0}
    nonempty = 0
    for k, (state, s) in enumerate(_exclusion_states(rng)):
        cov = build_covering(density_of(state), 0.25, "1/2")
        ledger = layered_lower_bound(cov, None, s)
        nonempty += bool(ledger.per_level)
        configs = sample_configurations(state, 500, seed=k) / state.box_side
        res = sample_inequalities(configs, ledger)
        for key in totals:
            totals[key] += res[key]
    ok = (totals["samples"] == 10_000 and totals["layer_violations"] == 0
          and totals["count_violations"] == 0 and nonempty >= 15)
    criterion(5, ok, f"{totals['samples']} samples over 20 states ({nonempty} with class-2 "
                     f"levels), violations layer={totals['layer_violations']} "
                     f"count={totals['count_violations']}")


def test_criterion_06_trial_state_asymptotics(criterion):
    width = 1.0
    u = bump_field(1, 64.0, 1024, width=width)
    q1 = one_body_quotient(u, 1.0)
    vals = [run_trial_upper(u, 3, f * width, 1.0, 1.0, samples=20_000, seed=0)
            for f in (4, 8, 16)]
    monotone = vals[0] > vals[1] > vals[2]
    rel = abs(vals[2] - q1) / q1
    criterion(6, monotone and rel < 0.02,
              f"Q(4w,8w,16w)=({vals[0]:.5f}, {vals[1]:.5f}, {vals[2]:.5f}) one-body={q1:.5f} "
              f"rel gap={rel:.2e}")


def test_criterion_07_scan_consistency(tmp_path, criterion):
    L, M = 64.0, 1024
    gn = solve_gn(QuotientProblem(1, 1.0, L, M), presets=("gaussian",))
    profiles = [bump_field(1, L, M, width=1.0), gn.minimizer]
    lams = np.logspace(0, 4, 9)
    consts = BoundConstants()
    scan = scan_lambda(lams, 1, 1.0, 3, profiles, box_side=L, points_per_axis=M,
                       samples=5000, seed=0, consts=consts)
    write_csv(tmp_path / "scan.csv", scan.rows())
    outs = build_report(tmp_path)
    svg = (tmp_path / "scan.svg").read_text()
    plotted = "C_GN - C lambda^-k" in svg and "bracket-and-shape" in svg
    gaps = [u - scan.gn_reference for u in scan.trial_upper]
    ok = scan.ordering_ok() and scan.gap_non_increasing(1e-12) and plotted and len(outs) >= 2
    criterion(7, ok, f"{len(lams)} rows, upper>=lower={scan.ordering_ok()}, "
                     f"gap range=[{min(gaps):.2e}, {max(gaps):.2e}] non-increasing="
                     f"{scan.gap_non_increasing(1e-12)}, prediction plotted={plotted}")


def test_criterion_08_spectral_check(criterion):
    d, s = 1, 0.25
    c = hardy_constant(d, s)
    fractions = (0.02, 0.05, 0.1)
    table = {}
    for R in (1.0, 2.0, 4.0):
        table[R] = [spectral_bound_check(SpectralBoundInstance(
            d, s, np.array([[-R], [R]]), f * c, 32.0, 512)) for f in fractions]
    monotone = all(all(b["neg_sum"] <= a["neg_sum"] for a, b in zip(rows, rows[1:]))
                   for rows in table.values())
    spreads = []
    for j in range(len(fractions)):
        ratios = [table[R][j]["ratio"] for R in table]
        spreads.append(max(ratios) / min(ratios))
    ok = monotone and max(spreads) <= 4
    criterion(8, ok, f"neg_sum monotone={monotone}, ratio spread across R per beta="
                     f"{', '.join(f'{x:.2f}' for x in spreads)} (torus grid, L=32, M=512)")


def test_criterion_09_discretization_convergence(criterion):
    gaps = []
    for M in (64, 128, 256):
        u = gaussian_field(1, 16.0, M, width=1.0)
        a = local_seminorm(u, None, 0.5)
        b = kinetic_energy(u, 0.5)
        gaps.append(abs(a - b) / b)
    ok = gaps[0] > gaps[1] > gaps[2] and gaps[2] < 0.02
    criterion(9, ok, "relative gaps " + ", ".join(f"{g:.2e}" for g in gaps))


def test_criterion_10_fermionic_ratio(criterion):
    rng = np.random.default_rng(10)
    lowers, ratios, dil = [], [], []
    for i in range(50):
        state = random_slater(rng, 2 + i % 2, 16.0, 128)
        r = fermionic_ratio(state, 0.25, 5000, seed=i)
        r2 = fermionic_ratio(state.rescaled(2.0), 0.25, 5000, seed=i)
        lowers.append(r["ratio_lower_3sigma"])
        ratios.append(r["ratio"])
        sigma = r["ratio"] - r["ratio_lower_3sigma"]
        dil.append(abs(r2["ratio"] - r["ratio"]) <= sigma)
    ok = min(lowers) > 0 and all(dil)
    criterion(10, ok, f"50 Slater states: min ratio={min(ratios):.4f}, min 3-sigma lower="
                      f"{min(lowers):.4f}, dilation within MC error for {sum(dil)}/50")

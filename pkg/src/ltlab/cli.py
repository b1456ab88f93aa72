"""Command line entry point ``ltlab``.

Every command writes its outputs and a ``manifest.json`` (config hash,
library version, argv) into a run directory.  Exit status is 0 for PASS,
2 for FAIL and 1 for errors.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .energy import hardy_constant
from .geometry import (build_covering, check_covering, covering_from_dict, covering_to_json,
                       demo_density)
from .interaction import interaction_energy, verify_exclusion
from .pipeline import BoundConstants, assemble_lower_bound, scan_lambda
from .report import build_report, write_csv
from .solvers import (QuotientProblem, SpectralBoundInstance, fermionic_ratio,
                      gn_constant_d1_s1, random_slater, solve_gn, spectral_bound_check)
from .states import (ManyBodyState, bump_field, density_of, gaussian_field, save_orbital,
                     translated)

logger = logging.getLogger("ltlab")

PASS, ERROR, FAIL = 0, 1, 2

DEFAULT_CONFIG = """\
[grid]
box_side = 24
points_per_axis = 512

[constants]
C = 1.0
c_gn = 2.4674011002723395

[sampling]
samples = 20000
seed = 0
"""


def load_config(path=None) -> tuple[configparser.ConfigParser, str]:
    """Defaults overlaid with ``path``; returns the parser and the sha256 of
    the effective configuration."""
    cfg = configparser.ConfigParser()
    cfg.read_string(DEFAULT_CONFIG)
    if path is not None:
        with open(path) as fh:
            cfg.read_file(fh)
    buf = io.StringIO()
    cfg.write(buf)
    return cfg, hashlib.sha256(buf.getvalue().encode()).hexdigest()


def _consts(cfg, hardy: bool = False) -> BoundConstants:
    return BoundConstants(cfg.getfloat("constants", "C"), cfg.getfloat("constants", "c_gn"),
                          hardy)


def _floats(text: str) -> list[float]:
    return [float(eval_fraction(t)) for t in text.split(",") if t.strip()]


def eval_fraction(text: str) -> float:
    text = text.strip()
    if "/" in text:
        a, b = text.split("/")
        return float(a) / float(b)
    return float(text)


def _run_dir(args) -> Path:
    d = Path(args.run_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write_manifest(run_dir: Path, args, sha: str, verdict: str, outputs):
    manifest = {"version": __version__, "command": args.command_path, "argv": args.argv,
                "config_sha256": sha, "verdict": verdict,
                "outputs": sorted(str(Path(p).name) for p in outputs)}
    (run_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _verdict(ok: bool) -> tuple[str, int]:
    return ("PASS", PASS) if ok else ("FAIL", FAIL)


# --- commands -----------------------------------------------------------------------

def cmd_covering_build(args, cfg):
    rho = demo_density(args.demo, args.dim)
    cov = build_covering(rho, args.delta, args.eps, args.max_depth)
    text = covering_to_json(cov)
    out = _run_dir(args) / "covering.json"
    out.write_text(text)
    print(text, end="")
    problems = check_covering(cov)
    for p in problems:
        print(p, file=sys.stderr)
    return not problems, [out]


def _load_covering(path):
    return covering_from_dict(json.loads(Path(path).read_text()))


def cmd_covering_inspect(args, cfg):
    cov = _load_covering(args.file)
    print(f"epsilon={cov.epsilon} delta={cov.delta} depth={cov.depth} "
          f"terminated={cov.terminated}")
    for rec in cov.levels:
        print(f"level {rec.n}: class0={len(rec.class0)} class1={len(rec.class1)} "
              f"class2={len(rec.class2)}")
    problems = check_covering(cov)
    for p in problems:
        print(p, file=sys.stderr)
    return not problems, []


def cmd_covering_export(args, cfg):
    cov = _load_covering(args.file)
    rows = []
    for rec in cov.levels:
        for c in rec.class0:
            rows.append({"level": rec.n, "class": 0, "cluster": -1,
                         "index": " ".join(map(str, c.index)), "mass": c.mass})
        for j, k in enumerate(rec.clusters):
            for c in k.members:
                rows.append({"level": rec.n, "class": k.klass, "cluster": j,
                             "index": " ".join(map(str, c.index)), "mass": c.mass})
    out = write_csv(_run_dir(args) / "covering_cubes.csv", rows)
    print(out)
    return True, [out]


def cmd_gn_solve(args, cfg):
    L = args.box if args.box is not None else cfg.getfloat("grid", "box_side")
    M = args.points if args.points is not None else cfg.getint("grid", "points_per_axis")
    prob = QuotientProblem(args.dim, args.s, L, M, hardy=args.hardy)
    res = solve_gn(prob, presets=args.presets.split(","), steps=args.steps)
    run = _run_dir(args)
    trace = run / "gn_trace.csv"
    res.write_trace(trace)
    save_orbital(run / "gn_minimizer.bin", res.minimizer)
    print(f"value {res.value:.10f}")
    print(f"preset {res.preset}")
    print(f"trace {trace}")
    ok = res.converged
    if args.dim == 1 and args.s == 1 and not args.hardy:
        ref = gn_constant_d1_s1()
        print(f"reference {ref:.10f} gap {res.value - ref:.3e}")
        ok = abs(res.value - ref) < 1e-3
    return ok, [trace, run / "gn_minimizer.bin", run / "gn_minimizer.json"]


def _bump_chain(n: int, spacing: float, width: float, L: float, M: int) -> ManyBodyState:
    u = bump_field(1, L, M, width=width)
    offsets = spacing * (np.arange(1, n + 1) - (n + 1) / 2)
    return ManyBodyState.product([translated(u, [o]) for o in offsets])


def cmd_interaction_estimate(args, cfg):
    state = _bump_chain(args.n, args.spacing, args.width, args.box, args.points)
    samples = args.samples or cfg.getint("sampling", "samples")
    seed = cfg.getint("sampling", "seed") if args.seed is None else args.seed
    est = interaction_energy(state, args.s, samples, seed)
    print(f"interaction {est.mean:.8g} +- {est.std_error:.3g} ({est.samples} samples)")
    out = _run_dir(args) / "interaction.json"
    out.write_text(json.dumps({"mean": est.mean, "std_error": est.std_error,
                               "samples": est.samples, "seed": seed}, indent=2) + "\n")
    return True, [out]


def _cluster_state(n: int, L: float, M: int, width: float, spacing: float) -> ManyBodyState:
    offsets = spacing * (np.arange(n) - (n - 1) / 2)
    return ManyBodyState.product([gaussian_field(1, L, M, width=width, center=[o])
                                  for o in offsets])


def cmd_exclusion_verify(args, cfg):
    state = _cluster_state(args.n, args.box, args.points, args.width, args.spacing)
    cov = build_covering(density_of(state), args.delta, args.eps, args.max_depth)
    samples = args.samples or cfg.getint("sampling", "samples")
    seed = cfg.getint("sampling", "seed") if args.seed is None else args.seed
    res = verify_exclusion(state, cov, args.s, args.delta, samples, seed)
    out = _run_dir(args) / "exclusion.json"
    out.write_text(json.dumps(res, indent=2) + "\n")
    print(f"interaction {res['interaction_mean']:.6g} +- {res['interaction_std_error']:.2g}")
    print(f"lower bound {res['lower_bound']:.6g} (simplified {res['simplified_lower_bound']:.6g})")
    print(f"violations layer={res['layer_violations']} count={res['count_violations']}")
    if res["degenerate"]:
        print("degenerate: no class-2 levels")
    return res["verdict"] == "PASS", [out]


def cmd_scan_lambda(args, cfg):
    consts = _consts(cfg)
    lams = (_floats(args.lambdas) if args.lambdas
            else list(np.logspace(args.lmin, args.lmax, args.count)))
    profiles = [bump_field(1, args.box, args.points, width=args.width)]
    gn_value = consts.c_gn
    if args.dim == 1 and args.s == 1:
        prob = QuotientProblem(1, 1.0, args.box, args.points)
        res = solve_gn(prob, presets=("gaussian",))
        profiles.append(res.minimizer)
    samples = args.samples or cfg.getint("sampling", "samples")
    seed = cfg.getint("sampling", "seed") if args.seed is None else args.seed
    scan = scan_lambda(lams, args.dim, args.s, args.n, profiles, width=args.width,
                       box_side=args.box, points_per_axis=args.points, samples=samples,
                       seed=seed, consts=consts, gn_value=gn_value)
    run = _run_dir(args)
    out = write_csv(run / "scan.csv", scan.rows())
    state = _cluster_state(3, args.box, args.points, 1.0, 4.0)
    ledger = assemble_lower_bound(state, None, lams[-1], args.s, consts)
    lpath = run / "bound_ledger.json"
    lpath.write_text(json.dumps(ledger.to_dict(), indent=2) + "\n")
    for r in scan.rows():
        print(f"lambda {r['lambda']:<12.6g} upper {r['trial_upper']:.6f} "
              f"lower {r['assembled_lower']:.6f} predicted {r['gn_gap_prediction']:.6f}")
    print(f"reference lambda for the small-lambda reduction: {scan.reference_lambda:.6g}")
    print("bracket-and-shape check (configured constants; absolute values are not claimed)")
    return scan.ordering_ok() and scan.gap_non_increasing(1e-9), [out, lpath]


def cmd_appendix_spectral(args, cfg):
    c = hardy_constant(args.dim, args.s)
    rows = []
    for R in _floats(args.radii):
        anchors = np.array([[-R], [R]]) if args.anchors == 2 else np.array([[0.0]])
        for f in _floats(args.betas):
            inst = SpectralBoundInstance(args.dim, args.s, anchors, f * c, args.box, args.points)
            res = spectral_bound_check(inst, args.method)
            rows.append({"R": R, "beta_fraction": f, "beta": f * c, **res})
            print(f"R {R:g} beta {f:g}C neg_sum {res['neg_sum']:.6g} ratio {res['ratio']:.6g}")
    ok = True
    for R in {r["R"] for r in rows}:
        neg = [r["neg_sum"] for r in rows if r["R"] == R]
        ok &= all(b <= a + 1e-12 for a, b in zip(neg, neg[1:]))
    out = write_csv(_run_dir(args) / "spectral.csv", rows)
    return ok, [out]


def cmd_appendix_fermionic(args, cfg):
    rng = np.random.default_rng(cfg.getint("sampling", "seed") if args.seed is None
                                else args.seed)
    ns = [int(x) for x in args.particles.split(",")]
    rows = []
    for i in range(args.count):
        state = random_slater(rng, ns[i % len(ns)], args.box, args.points)
        res = fermionic_ratio(state, args.s, args.samples, seed=i)
        rows.append({"state": i, "n": state.n_particles, **res})
    finite = [r["ratio_lower_3sigma"] for r in rows]
    low = min(finite)
    print(f"states {len(rows)} min ratio {min(r['ratio'] for r in rows):.6g} "
          f"min 3-sigma lower {low:.6g}")
    out = write_csv(_run_dir(args) / "fermionic.csv", rows)
    return low > 0, [out]


def cmd_report(args, cfg):
    outs = build_report(args.run_dir)
    for p in outs:
        print(p)
    return True, outs


# --- parser -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ltlab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"ltlab {__version__}")
    p.add_argument("--config", help="INI file overriding [grid], [constants], [sampling]")
    p.add_argument("--run-dir", default="runs/latest", help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="group", required=True)

    cov = sub.add_parser("covering", help="mass-threshold coverings").add_subparsers(
        dest="action", required=True)
    b = cov.add_parser("build", help="build a covering of a demo density and print JSON")
    b.add_argument("--demo", default="uniform3", choices=["uniform3", "light", "twobumps"])
    b.add_argument("-d", "--dim", type=int, default=1)
    b.add_argument("--delta", type=float, default=0.5)
    b.add_argument("--eps", default="1/2", choices=["1/2", "1/3"])
    b.add_argument("--max-depth", type=int, default=20)
    b.set_defaults(func=cmd_covering_build)
    for name, func, helptext in (("inspect", cmd_covering_inspect, "summarize a covering JSON"),
                                 ("export", cmd_covering_export, "write cubes as CSV")):
        q = cov.add_parser(name, help=helptext)
        q.add_argument("file")
        q.set_defaults(func=func)

    gn = sub.add_parser("gn", help="GN quotient minimization").add_subparsers(
        dest="action", required=True)
    g = gn.add_parser("solve", help="minimize the GN (or Hardy-GN) quotient")
    g.add_argument("-d", "--dim", type=int, default=1)
    g.add_argument("-s", type=eval_fraction, default=1.0)
    g.add_argument("-L", "--box", type=float, help="box side (default from config)")
    g.add_argument("-M", "--points", type=int, help="points per axis (default from config)")
    g.add_argument("--hardy", action="store_true", help="subtract the Hardy term")
    g.add_argument("--presets", default="gaussian,plateau,two-bump")
    g.add_argument("--steps", type=int, default=5000)
    g.set_defaults(func=cmd_gn_solve)

    it = sub.add_parser("interaction", help="nearest-neighbor energies").add_subparsers(
        dest="action", required=True)
    e = it.add_parser("estimate", help="MC interaction energy of a chain of bumps")
    e.add_argument("-n", type=int, default=3)
    e.add_argument("-s", type=eval_fraction, default=1.0)
    e.add_argument("--spacing", type=float, default=4.0)
    e.add_argument("--width", type=float, default=1.0)
    e.add_argument("-L", "--box", type=float, default=32.0)
    e.add_argument("-M", "--points", type=int, default=512)
    e.add_argument("--samples", type=int)
    e.add_argument("--seed", type=int)
    e.set_defaults(func=cmd_interaction_estimate)

    ex = sub.add_parser("exclusion", help="layered exclusion bound").add_subparsers(
        dest="action", required=True)
    v = ex.add_parser("verify", help="compare MC interaction with the exclusion ledger")
    v.add_argument("-n", type=int, default=6)
    v.add_argument("-s", type=eval_fraction, default=0.25)
    v.add_argument("--delta", type=float, default=0.25)
    v.add_argument("--eps", default="1/2", choices=["1/2", "1/3"])
    v.add_argument("--max-depth", type=int, default=20)
    v.add_argument("--width", type=float, default=0.3)
    v.add_argument("--spacing", type=float, default=0.5)
    v.add_argument("-L", "--box", type=float, default=8.0)
    v.add_argument("-M", "--points", type=int, default=256)
    v.add_argument("--samples", type=int)
    v.add_argument("--seed", type=int)
    v.set_defaults(func=cmd_exclusion_verify)

    sc = sub.add_parser("scan", help="lambda scans").add_subparsers(dest="action", required=True)
    l = sc.add_parser("lambda", help="upper/lower brackets across a lambda grid")
    l.add_argument("--lambdas", help="comma list (overrides --lmin/--lmax/--count)")
    l.add_argument("--lmin", type=float, default=0.0, help="log10 of the smallest lambda")
    l.add_argument("--lmax", type=float, default=4.0, help="log10 of the largest lambda")
    l.add_argument("--count", type=int, default=9)
    l.add_argument("-d", "--dim", type=int, default=1)
    l.add_argument("-s", type=eval_fraction, default=1.0)
    l.add_argument("-n", type=int, default=3)
    l.add_argument("--width", type=float, default=1.0)
    l.add_argument("-L", "--box", type=float, default=64.0)
    l.add_argument("-M", "--points", type=int, default=1024)
    l.add_argument("--samples", type=int)
    l.add_argument("--seed", type=int)
    l.set_defaults(func=cmd_scan_lambda)

    ap = sub.add_parser("appendix", help="one-body spectral and fermionic checks"
                        ).add_subparsers(dest="action", required=True)
    sp = ap.add_parser("spectral", help="negative eigenvalue sums with anchor potentials")
    sp.add_argument("-d", "--dim", type=int, default=1)
    sp.add_argument("-s", type=eval_fraction, default=0.25)
    sp.add_argument("--anchors", type=int, default=2, choices=[1, 2])
    sp.add_argument("--radii", default="1,2,4", help="anchor half-distances R")
    sp.add_argument("--betas", default="0.02,0.05,0.1", help="fractions of the Hardy constant")
    sp.add_argument("--method", default="torus", choices=["torus", "galerkin"])
    sp.add_argument("-L", "--box", type=float, default=32.0)
    sp.add_argument("-M", "--points", type=int, default=512)
    sp.set_defaults(func=cmd_appendix_spectral)
    fe = ap.add_parser("fermionic", help="kinetic/interaction ratio of random Slater states")
    fe.add_argument("--count", type=int, default=50)
    fe.add_argument("--particles", default="2,3")
    fe.add_argument("-s", type=eval_fraction, default=0.25)
    fe.add_argument("--samples", type=int, default=5000)
    fe.add_argument("-L", "--box", type=float, default=16.0)
    fe.add_argument("-M", "--points", type=int, default=128)
    fe.add_argument("--seed", type=int)
    fe.set_defaults(func=cmd_appendix_fermionic)

    r = sub.add_parser("report", help="render CSV/SVG/markdown for a run directory")
    r.set_defaults(func=cmd_report, action=None)
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    args.argv = argv
    args.command_path = " ".join(x for x in (args.group, args.action) if x)
    try:
        cfg, sha = load_config(args.config)
        ok, outputs = args.func(args, cfg)
    except Exception as exc:
        logger.debug("command failed", exc_info=True)
        print(f"ltlab: error: {exc}", file=sys.stderr)
        return ERROR
    verdict, code = _verdict(ok)
    if args.func is not cmd_report:
        _write_manifest(Path(args.run_dir), args, sha, verdict, outputs)
    print(verdict)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

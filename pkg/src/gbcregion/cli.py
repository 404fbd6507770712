"""Command-line front end.

Subcommands ``region``, ``sweep-hybrid``, ``verify`` and ``simulate``
write CSV curves (header ``d1,d2,scheme,param``) and JSON reports into
``--out``. Every flag can also be given in a ``--config`` file of
``key = value`` lines; flags on the command line win.

Exit codes: 0 success, 1 verification failure, 2 usage or validation error.
"""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import analytic as an
from .curves import DistortionPoint, RegionCurve, SourceTag, atomic_write, dump_json
from .model import InvalidInstance, make_instance
from .schemes import (InfeasibleParams, UncodedParams, hybrid_from_uncoded, hybrid_sweep,
                      make_hybrid_params, max_beta, optimal_hybrid_params,
                      separation_baseline, uncoded_alpha_for_d1, uncoded_distortions)
from .simulate import DistributionFamily, worst_case_check
from .verify import random_instance, summarize, verify_instance

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

# default instance, one with a hybrid window
INSTANCE_DEFAULTS = {"P": 1.0, "sigma2": 1.0, "rho": 0.4, "N1": 0.3, "N2": 1.0}


class UsageError(Exception):
    pass


def _instance_flags(p):
    g = p.add_argument_group("instance")
    for name, default in INSTANCE_DEFAULTS.items():
        g.add_argument(f"--{name}", type=float, default=default, metavar="X")


def _common_flags(p, grid=False):
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: available cores)")
    p.add_argument("--config", type=Path, default=None,
                   help="key = value file mirroring the flags")
    if grid:
        p.add_argument("--grid", type=int, default=400, help="points per curve")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gbcregion", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("region", help="optimal frontier and comparison curves")
    subs = {"region": p}
    _instance_flags(p)
    _common_flags(p, grid=True)

    p = subs["sweep-hybrid"] = sub.add_parser(
        "sweep-hybrid", help="hybrid scheme over beta_t at fixed alpha_t")
    _instance_flags(p)
    _common_flags(p)
    p.add_argument("--alphas", type=str, default=None,
                   help="comma-separated alpha_t values")
    p.add_argument("--n-alpha", type=int, default=10,
                   help="evenly spaced alpha_t values when --alphas is absent")
    p.add_argument("--n-beta", type=int, default=200)

    p = subs["verify"] = sub.add_parser("verify", help="run the invariant suite")
    _instance_flags(p)
    _common_flags(p)
    p.add_argument("--profile", choices=["fast", "full"], default="fast")
    p.add_argument("--randomized", action="store_true",
                   help="check seeded random instances instead of the given one")
    p.add_argument("--count", type=int, default=200, help="instances when --randomized")
    p.add_argument("--corrupt-frontier", action="store_true", help=argparse.SUPPRESS)

    p = subs["simulate"] = sub.add_parser("simulate", help="Monte Carlo check of a scheme")
    _instance_flags(p)
    _common_flags(p)
    p.add_argument("--scheme", choices=["hybrid", "uncoded"], default="hybrid")
    p.add_argument("--d1", type=float, default=None,
                   help="target D1 (optimal hybrid, or uncoded direction hitting it)")
    p.add_argument("--alpha", type=float, default=None, help="uncoded direction")
    p.add_argument("--alpha-t", type=float, default=None)
    p.add_argument("--beta-t", type=float, default=None)
    p.add_argument("--family", choices=[f.value for f in DistributionFamily],
                   default="gaussian")
    p.add_argument("--n", type=int, default=1_000_000)
    p.add_argument("--k-nn", type=int, default=5)
    parser.subcommands = subs
    return parser


def read_config(path: Path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        out[key.lstrip("-").replace("-", "_")] = val
    return out


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config is None:
        return args
    sub = parser.subcommands[args.command]
    actions = {a.dest: a for a in sub._actions}
    cfg = read_config(args.config)
    defaults = {}
    for key, val in cfg.items():
        act = actions.get(key)
        if act is None or key in ("config", "help"):
            raise UsageError(f"unknown config key {key!r} for {args.command}")
        if act.nargs == 0:
            defaults[key] = val.lower() in ("1", "true", "yes", "on")
        else:
            conv = act.type or str
            try:
                defaults[key] = conv(val)
            except (TypeError, ValueError):
                raise UsageError(f"bad value for {key!r}: {val!r}") from None
            if act.choices is not None and defaults[key] not in act.choices:
                raise UsageError(f"{key} must be one of {list(act.choices)}")
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def _instance(args):
    return make_instance(args.P, args.sigma2, args.rho, args.N1, args.N2)


def d1_grid(inst, n: int, rep) -> np.ndarray:
    """Uniform grid on [D1min, D1max] with the branch points inserted."""
    grid = list(np.linspace(rep.d1_min, rep.d1_max, n))
    extra = [inst.sigma2 * (1 - inst.rho ** 2)]
    if rep.has_window:
        extra += [rep.d1_minus, rep.d1_plus]
    grid += [x for x in extra if rep.d1_min <= x <= rep.d1_max]
    return np.unique(np.array(grid))


def region_curves(inst, n_grid: int) -> dict[str, RegionCurve]:
    rep = an.classify_regime(inst)
    grid = d1_grid(inst, n_grid, rep)
    meta = {"instance": inst.as_dict(), "grid": n_grid}

    def on_grid(tag, values, params=None):
        params = [None] * len(grid) if params is None else params
        pts = [DistortionPoint(float(x), float(y), tag, p)
               for x, y, p in zip(grid, values, params)]
        return RegionCurve(pts, {**meta, "scheme": tag.value})

    curves = {
        "frontier": on_grid(SourceTag.FRONTIER, an.d2_star(inst, grid, rep)),
        "uncoded": on_grid(SourceTag.UNCODED, an.d2_uncoded_frontier(inst, grid),
                           [uncoded_alpha_for_d1(inst, float(x)) for x in grid]),
        "hybrid_outer": on_grid(SourceTag.HYBRID_OUTER, an.d2_hybrid_frontier(inst, grid)),
    }
    alphas = np.linspace(0.0, 1.0, n_grid)
    d12, d2 = an.genie_region(inst, alphas)
    curves["genie_outer"] = RegionCurve(
        [DistortionPoint(float(x), float(y), SourceTag.GENIE_OUTER, float(a))
         for x, y, a in zip(d12, d2, alphas)], {**meta, "scheme": "genie_outer"})
    sep = []
    for lam in np.linspace(0.0, 1.0, n_grid):
        s = separation_baseline(inst, float(lam))
        sep.append(DistortionPoint(s.d1, s.d2, SourceTag.SEPARATION, float(lam)))
    curves["separation"] = RegionCurve(sep, {**meta, "scheme": "separation"})
    curves["trivial"] = RegionCurve(
        [DistortionPoint(rep.d1_max, an.d2_floor(inst), SourceTag.TRIVIAL_ANALOG)],
        {**meta, "scheme": "trivial_analog"})
    return curves


def _write_curves(out: Path, curves: dict, manifest: dict) -> None:
    files = []
    for name, curve in curves.items():
        fname = f"{name}.csv"
        atomic_write(out / fname, curve.to_csv())
        files.append({"file": fname, "scheme": name, "points": len(curve),
                      **{k: v for k, v in curve.meta.items() if k not in ("instance", "grid", "scheme")}})
    manifest["files"] = files
    atomic_write(out / "manifest.json", dump_json(manifest))


def _manifest(args, inst, **extra):
    return {"instance": inst.as_dict(),
            "regime_report": an.classify_regime(inst).as_dict(),
            "version": __version__, "seed": args.seed, **extra}


def cmd_region(args) -> int:
    if args.grid < 2:
        raise UsageError("--grid must be >= 2")
    inst = _instance(args)
    curves = region_curves(inst, args.grid)
    _write_curves(args.out, curves, _manifest(args, inst, grid=args.grid, command="region"))
    rep = an.classify_regime(inst)
    print(f"regime {rep.regime.value}; wrote {len(curves)} curves to {args.out}")
    return EXIT_OK


def cmd_sweep_hybrid(args) -> int:
    inst = _instance(args)
    if args.n_beta < 2:
        raise UsageError("--n-beta must be >= 2")
    if args.alphas:
        try:
            alphas = [float(a) for a in args.alphas.split(",") if a.strip()]
        except ValueError:
            raise UsageError(f"bad --alphas list {args.alphas!r}") from None
    else:
        top = math.sqrt(inst.P / inst.sigma2)
        alphas = list(np.linspace(0.0, top, args.n_alpha + 1)[:-1])
    curves, skipped = {}, []
    for i, a in enumerate(alphas):
        try:
            curve = hybrid_sweep(inst, a, args.n_beta)
        except InfeasibleParams as exc:
            print(f"skipping alpha_t={a!r}: {exc}", file=sys.stderr)
            skipped.append({"alpha_t": a, "reason": str(exc)})
            continue
        curve.meta["d2"] = curve.points[0].d2
        curve.meta["beta_max"] = max_beta(inst, a)
        curves[f"sweep_{i:03d}"] = curve
    if not curves:
        print("no feasible alpha_t; nothing written", file=sys.stderr)
        return EXIT_USAGE
    _write_curves(args.out, curves, _manifest(args, inst, n_beta=args.n_beta,
                                             command="sweep-hybrid", skipped=skipped))
    print(f"wrote {len(curves)} sweeps to {args.out} ({len(skipped)} skipped)")
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.randomized:
        rng = np.random.default_rng(args.seed)
        instances = [random_instance(rng) for _ in range(args.count)]
    else:
        instances = [_instance(args)]
    per = [verify_instance(inst, args.profile, seed=args.seed + i,
                           corrupt=args.corrupt_frontier)
           for i, inst in enumerate(instances)]
    checks = summarize(per)
    ok = all(c.passed for c in checks)
    report = {"version": __version__, "seed": args.seed, "profile": args.profile,
              "randomized": args.randomized, "instances": [i.as_dict() for i in instances],
              "checks": [c.as_dict() for c in checks], "passed": ok}
    if not args.randomized:
        report["instance"] = instances[0].as_dict()
        report["regime_report"] = an.classify_regime(instances[0]).as_dict()
    atomic_write(args.out / "verify_report.json", dump_json(report))
    for c in checks:
        print(f"[{'PASS' if c.passed else 'FAIL'}] {c.name}: margin {c.margin:.3g} "
              f"(tol {c.tolerance:g}) {c.detail}".rstrip())
    return EXIT_OK if ok else EXIT_FAIL


def _simulation_params(args, inst):
    if args.scheme == "uncoded":
        if args.alpha is not None:
            alpha = args.alpha
        elif args.d1 is not None:
            alpha = uncoded_alpha_for_d1(inst, args.d1)
        else:
            alpha = 0.5
        up = UncodedParams(alpha)
        return hybrid_from_uncoded(inst, up), {"scheme": "uncoded", "alpha": alpha}
    if args.alpha_t is not None or args.beta_t is not None:
        if args.alpha_t is None or args.beta_t is None:
            raise UsageError("--alpha-t and --beta-t go together")
        hp = make_hybrid_params(inst, args.alpha_t, args.beta_t)
        return hp, {"scheme": "hybrid", "alpha_t": args.alpha_t, "beta_t": args.beta_t}
    d1 = args.d1
    if d1 is None:
        rep = an.classify_regime(inst)
        if not rep.has_window:
            raise UsageError("no hybrid window: give --alpha-t/--beta-t or use --scheme uncoded")
        d1 = 0.5 * (rep.d1_minus + rep.d1_plus)
    return optimal_hybrid_params(inst, d1), {"scheme": "hybrid_optimal", "d1": d1}


def cmd_simulate(args) -> int:
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    inst = _instance(args)
    hp, spec = _simulation_params(args, inst)
    rep = worst_case_check(inst, hp, args.family, args.n, args.k_nn, args.seed,
                           threads=args.threads)
    report = {"instance": inst.as_dict(), "regime_report": an.classify_regime(inst).as_dict(),
              "scheme": spec, "params": hp.as_dict(), "version": __version__,
              "seed": args.seed, **rep.as_dict()}
    if spec["scheme"] == "uncoded":
        u = uncoded_distortions(inst, UncodedParams(spec["alpha"]))
        report["uncoded_closed_form"] = {"d1": u.d1, "d2": u.d2}
    atomic_write(args.out / "simulate_report.json", dump_json(report))
    z = rep.z_scores
    print(f"{args.family}: d1 {rep.empirical['d1']:.6g} vs {rep.analytic['d1']:.6g} "
          f"(z={z['d1']:+.2f}); d2 {rep.empirical['d2']:.6g} vs {rep.analytic['d2']:.6g} "
          f"(z={z['d2']:+.2f})")
    if rep.entropy is not None:
        print(f"entropy gap rx2 {rep.entropy['gap_rx2']:+.4f} nats (slack {rep.slack})")
    return EXIT_OK if rep.passed else EXIT_FAIL


COMMANDS = {"region": cmd_region, "sweep-hybrid": cmd_sweep_hybrid,
            "verify": cmd_verify, "simulate": cmd_simulate}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        return COMMANDS[args.command](args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except (UsageError, InvalidInstance, an.DomainError, InfeasibleParams, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

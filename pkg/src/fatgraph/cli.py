"""Command line entry point: ``fatgraph <subcommand> ...``.

Exit codes: 0 pass, 1 tolerance failure, 2 input error.
"""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from .graph import GraphError, lasso, validate
from .io import GraphFileError, load_graph, save_graph, write_csv
from .rootfind import NonConvergent, RootFindError
from .secular import lasso_closed_form
from .study import ConfigError, ExperimentConfig, run_closeness_study, run_resonance_study
from .waveguide import FactorizationFailed, NotConverged, WaveguideError

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


def parse_complex(text: str) -> complex:
    t = text.strip().replace(" ", "").replace("i", "j").replace("I", "j")
    try:
        return complex(t)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a complex number: {text!r}") from exc


def _list(conv):
    def parse(text: str):
        try:
            return [conv(x) for x in text.split(",") if x.strip()]
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise argparse.ArgumentTypeError(f"bad list {text!r}: {exc}") from exc
    return parse


def _region(text: str):
    vals = _list(float)(text)
    if len(vals) != 4:
        raise argparse.ArgumentTypeError("kregion needs re0,re1,im0,im1")
    return tuple(vals)


def _globals(p: argparse.ArgumentParser, suppress: bool):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--out-dir", default=d("."), help="directory for all outputs")
    p.add_argument("--seed", type=int, default=d(0), help="seed for shift and contour nudges")
    p.add_argument("--tol-k", type=float, default=d(1e-10), help="root tolerance in k")
    p.add_argument("--threads", type=int, default=d(1), help="worker threads for contour cells")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fatgraph", description=__doc__.splitlines()[0])
    _globals(p, False)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("resonances", help="graph resonances in k-rectangles")
    _globals(r, True)
    r.add_argument("graph")
    r.add_argument("--theta", type=parse_complex, default=0.8j)
    r.add_argument("--kregion", type=_region, action="append", required=True)
    r.add_argument("--gauge", choices=("keep", "away"), default="keep")
    r.add_argument("--out", default="res.csv")

    w = sub.add_parser("waveguide", help="waveguide eigenvalues near shifts")
    _globals(w, True)
    w.add_argument("--graph", required=True)
    w.add_argument("--theta", type=parse_complex, default=0.8j)
    w.add_argument("--eps", type=_list(float), required=True)
    w.add_argument("--h", type=_list(float), default=[0.05])
    w.add_argument("--shift", type=_list(parse_complex), required=True)
    w.add_argument("--count", type=int, default=6)
    w.add_argument("--L-ext", type=float, default=4.0)
    w.add_argument("--margin", type=float, default=0.05)
    w.add_argument("--no-drift", action="store_true", help="skip the companion-theta filter")
    w.add_argument("--out", default="wg.csv")

    c = sub.add_parser("closeness", help="closeness defects and resolvent differences")
    _globals(c, True)
    c.add_argument("--graph", required=True)
    c.add_argument("--theta", type=parse_complex, default=0.8j)
    c.add_argument("--eps", type=_list(float), required=True)
    c.add_argument("--h", type=_list(float), default=[0.05])
    c.add_argument("--z", type=_list(parse_complex), default=[-1.0])
    c.add_argument("--L-ext", type=float, default=3.0)
    c.add_argument("--slope-min", type=float, default=0.4)
    c.add_argument("--out", default="delta.csv")

    d = sub.add_parser("lasso-demo", help="lasso resonances and their waveguide approximants")
    _globals(d, True)
    d.add_argument("--ell", type=float, default=1.0)
    d.add_argument("--theta", type=parse_complex, default=0.8j)
    d.add_argument("--eps", type=_list(float), default=[0.2, 0.1, 0.05])
    d.add_argument("--h", type=_list(float), default=[0.05])

    v = sub.add_parser("validate", help="check a graph file")
    _globals(v, True)
    v.add_argument("graph")
    return p


def _out(args, name: str) -> Path:
    p = Path(name)
    return p if p.is_absolute() else Path(args.out_dir) / p


def cmd_resonances(args) -> int:
    from .study import graph_resonances, _load
    cfg = ExperimentConfig(graph=args.graph, thetas=[args.theta], kregion=args.kregion,
                           gauge=args.gauge, out_dir=args.out_dir, seed=args.seed,
                           tol_k=args.tol_k, threads=args.threads).validate()
    decomp, fields = _load(cfg, None, None)
    res = graph_resonances(decomp, fields, cfg, args.theta)
    rows = [(r.k.real, r.k.imag, r.lam.real, r.lam.imag, r.residual, r.multiplicity, r.kind)
            for r in res]
    path = write_csv(_out(args, args.out),
                     ["re_k", "im_k", "re_lambda", "im_lambda", "residual", "multiplicity", "kind"],
                     rows, cfg.to_dict(), cfg.seed)
    for r in res:
        print(f"k = {r.k.real:+.12f} {r.k.imag:+.12f}i   lambda = {r.lam.real:+.12f} "
              f"{r.lam.imag:+.12f}i   {r.kind}{'' if r.revealed else ' (not revealed)'}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_waveguide(args) -> int:
    from .study import _Ops, _load, waveguide_candidates
    cfg = ExperimentConfig(graph=args.graph, thetas=[args.theta], eps=args.eps, h=args.h,
                           shifts=args.shift, count=args.count, L_ext=args.L_ext,
                           margin=args.margin, drift_filter=not args.no_drift,
                           out_dir=args.out_dir, seed=args.seed, tol_k=args.tol_k,
                           threads=args.threads).validate()
    decomp, fields = _load(cfg, None, None)
    ops = _Ops(decomp, fields)
    rows = []
    for eps in cfg.eps:
        for h in cfg.h:
            op = ops.get(eps, h, cfg.L_ext, args.theta)
            seen = set()
            for s in cfg.shifts:
                for c in waveguide_candidates(op, s, cfg):
                    key = (round(c.lam.real, 10), round(c.lam.imag, 10))
                    if key not in seen:
                        seen.add(key)
                        rows.append((eps, h, c.lam.real, c.lam.imag, c.residual, c.tail_mass, c.kept))
    path = write_csv(_out(args, args.out),
                     ["eps", "h", "re_lambda", "im_lambda", "residual", "tail_mass", "kept"],
                     rows, cfg.to_dict(), cfg.seed)
    for r in rows:
        print(f"eps={r[0]:<6g} h={r[1]:<6g} lambda = {r[2]:+.6f} {r[3]:+.6f}i  "
              f"tail={r[5]:.3f} {'kept' if r[6] else 'dropped'}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_closeness(args) -> int:
    cfg = ExperimentConfig(graph=args.graph, thetas=[args.theta], eps=args.eps, h=args.h,
                           z=args.z, L_ext=args.L_ext, slope_min=args.slope_min,
                           out_dir=args.out_dir, seed=args.seed, tol_k=args.tol_k,
                           threads=args.threads).validate()
    s = run_closeness_study(cfg, out_name=args.out)
    for row in s.deltas:
        print("eps={eps:<6g} h={h:<6g} adj={delta_adj:.3e} inv1={delta_inv1:.3e} "
              "inv2={delta_inv2:.4f} form={delta_form:.4f} res={res_diff:.4f}".format(**row))
    for k, v in s.slopes.items():
        print(f"slope {k}: {v if isinstance(v, str) else f'{v:.3f}'}")
    print("PASS" if s.passed else "FAIL")
    return EXIT_OK if s.passed else EXIT_FAIL


def cmd_lasso_demo(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    g = lasso(args.ell, min(0.5, args.ell))
    gpath = save_graph(out / "lasso.json", g)
    kmax = 2 * (2 * math.pi / args.ell) + 1.0
    regions = [(-0.5, kmax, -1.5 / args.ell, -0.3 / args.ell),
               (0.3 / args.ell, kmax, -0.3 / args.ell, 0.5)]
    cfg = ExperimentConfig(graph=str(gpath), thetas=[args.theta], eps=args.eps, h=args.h,
                           kregion=regions, out_dir=str(out), seed=args.seed, tol_k=args.tol_k,
                           threads=args.threads).validate()
    s = run_resonance_study(cfg)
    closed = lasso_closed_form(args.ell, 0.0, range(0, 3))
    expect = closed.resonances + closed.embedded
    ok = len(s.targets) == len(expect)
    for t in s.targets:
        ref = min(expect, key=lambda z: abs(z - t.lam0))
        rel = abs(t.lam0 - ref) / max(1.0, abs(ref))
        ok = ok and rel <= 1e-8
        print(f"{t.kind:<20} lambda0 = {t.lam0.real:+.10f} {t.lam0.imag:+.10f}i  "
              f"closed-form rel. error {rel:.1e}{'' if t.revealed else '  (not revealed)'}")
        for e, lam, err in zip(t.eps, t.lam, t.errors):
            txt = "no isolated candidate" if lam is None else \
                f"{lam.real:+.6f} {lam.imag:+.6f}i  |error| = {err:.4f}"
            print(f"    eps = {e:<5g} {txt}")
        if t.slope is not None:
            print(f"    log-log slope {t.slope:.3f}")
    print("graph values match the closed form" if ok else "closed-form mismatch")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_validate(args) -> int:
    g, _ = load_graph(args.graph)
    rep = validate(g)
    print(rep)
    return EXIT_OK if rep.ok else EXIT_FAIL


COMMANDS = {"resonances": cmd_resonances, "waveguide": cmd_waveguide, "closeness": cmd_closeness,
            "lasso-demo": cmd_lasso_demo, "validate": cmd_validate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (GraphFileError, GraphError, ConfigError, WaveguideError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NonConvergent, RootFindError, NotConverged, FactorizationFailed) as exc:
        print(f"tolerance failure: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())

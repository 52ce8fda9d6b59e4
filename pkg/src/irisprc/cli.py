"""Command-line front end.

Every subcommand prints CSV (first line a ``#`` header with the parameters)
or JSON to stdout, or to ``--out``.  Exit status is 0 on success, 2 for
invalid parameters and 3 when a command needs a limit cycle that does not
exist.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from fractions import Fraction

import numpy as np

from . import core, prc, sim, smooth
from .core import DomainError, IrisError, IrisParams, NoCycleError

EXIT_DOMAIN = 2
EXIT_NO_CYCLE = 3


def real(text: str) -> float:
    """Float, also accepting fractions such as ``7/30``."""
    try:
        return float(Fraction(text)) if "/" in text else float(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from exc


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return "NaN" if math.isnan(v) else repr(float(v))
    return str(v)


def _header(params: dict) -> str:
    return "# " + " ".join(f"{k}={_fmt(v)}" for k, v in params.items()) + "\n"


def to_csv(params: dict, columns: list[str], rows) -> str:
    buf = io.StringIO()
    buf.write(_header(params))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return None if math.isnan(obj) else float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def to_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def _iris(args) -> IrisParams:
    return IrisParams(args.lam, args.a)


def _smooth(args) -> smooth.SmoothParams:
    return smooth.SmoothParams(args.alpha, args.mu)


def cmd_bifurcation(args) -> str:
    lams = np.linspace(args.lambda_min, args.lambda_max, args.resolution)
    offs = np.linspace(args.a_min, args.a_max, args.resolution)
    grid = []
    for lam in lams:
        for a in offs:
            grid.append(("grid", lam, a, str(core.classify_regime(IrisParams(lam, a)))))
    fold = [("fold", lam, core.fold_offset(lam), str(core.Regime.FOLD_POINT)) for lam in lams if lam > 1]
    meta = dict(cmd="bifurcation", lambda_min=args.lambda_min, lambda_max=args.lambda_max,
                a_min=args.a_min, a_max=args.a_max, resolution=args.resolution)
    if args.format == "json":
        return to_json({**meta, "grid": [r[1:] for r in grid], "fold": [r[1:3] for r in fold]})
    return to_csv(meta, ["series", "lambda", "a", "regime"], grid + fold)


def cmd_cycle(args) -> str:
    p = _iris(args)
    meta = dict(cmd="cycle", **{"lambda": p.lam}, a=p.a)
    if args.format == "csv":
        # return map of the entry position, defined whatever the regime
        us = (np.arange(args.samples) + 0.5) / args.samples
        meta["regime"] = str(core.classify_regime(p))
        return to_csv(meta, ["u", "h"], [(u, core.map_h(u, p)) for u in us])
    cyc = core.stable_cycle(p)
    ap = core.closest_slowest(cyc.u_dag, p)
    return to_json({
        **meta,
        "regime": str(core.classify_regime(p)),
        "u_dag": cyc.u_dag,
        "u_ddag": cyc.u_ddag,
        "s_dag": cyc.s_dag,
        "period": cyc.period,
        "stability_derivative": cyc.contraction,
        "V": prc.v_integral(p, cyc),
        "M": prc.magnitude_m(p, cyc),
        "critical_phase": prc.critical_phase(p.lam),
        "phi_closest": ap.phi_closest,
        "phi_slowest": ap.phi_slowest,
    })


def _prc_direction(args, theta: float):
    """Global-frame direction for the numeric estimate at phase ``theta``."""
    if args.eta is not None:
        return tuple(args.eta)
    d = args.direction
    if d == "x":
        return (1.0, 0.0)
    if d == "y":
        return (0.0, 1.0)
    k, _ = prc.split_phase(theta)
    axes = sim.S_AXES if d == "s" else sim.U_AXES
    return tuple(axes[k])


def cmd_prc(args) -> str:
    p = _iris(args)
    cyc = core.stable_cycle(p)
    samples = prc.prc_curve(args.direction, args.samples, p, cyc)
    if args.eta is not None:
        eta = prc.PerturbDirection.normalized(*args.eta)
        analytic = [prc.iprc(eta, smp.theta, p, cyc) for smp in samples]
    else:
        analytic = list(prc.curve_values(samples, args.direction))
    thetas = [smp.theta for smp in samples]
    cols, series = ["theta"], [thetas]
    if args.mode in ("analytic", "both"):
        cols.append("Z_analytic")
        series.append(analytic)
    if args.mode in ("numeric", "both"):
        cols.append("Z_numeric")
        series.append([sim.numeric_iprc(_prc_direction(args, th), th, p, args.r, cyc) for th in thetas])
    meta = dict(cmd="prc", **{"lambda": p.lam}, a=p.a, direction=args.direction,
                eta=None if args.eta is None else list(args.eta),
                samples=args.samples, mode=args.mode, r=args.r)
    rows = list(zip(*series))
    if args.format == "json":
        return to_json({**meta, "columns": cols, "rows": rows})
    if args.eta is None:
        meta.pop("eta")
    return to_csv(meta, cols, rows)


def cmd_isochrons(args):
    p = _iris(args)
    field = sim.isochron_field(args.grid, p)
    if args.format == "binary":
        return field.to_bytes()
    if args.format == "json":
        return to_json({
            "cmd": "isochrons", "lambda": p.lam, "a": p.a,
            "nx": field.xs.size, "ny": field.ys.size, "bbox": list(field.bbox),
            "x": list(field.xs), "y": list(field.ys),
            "theta": [list(row) for row in field.theta],
        })
    return field.to_csv()


def cmd_trajectory(args) -> str:
    p = _iris(args)
    if args.start is not None:
        start = tuple(args.start)
        traj = sim.simulate(start, p, args.max_time, stop_on_converge=False,
                            max_crossings=args.max_crossings)
    else:
        cyc = core.stable_cycle(p)
        u0 = cyc.u_dag if args.u0 is None else args.u0
        if args.which == "unstable" and args.u0 is None:
            u0 = cyc.u_ddag
        max_time = args.max_time if math.isfinite(args.max_time) else args.periods * cyc.period
        traj = sim.simulate((1, (1.0, u0)), p, max_time, stop_on_converge=False,
                            max_crossings=args.max_crossings)
    rows = traj.sample(args.samples)
    meta = dict(cmd="trajectory", **{"lambda": p.lam}, a=p.a, status=traj.status)
    if args.format == "json":
        segs = [vars(seg) for seg in traj.segments]
        return to_json({**meta, "segments": segs, "samples": rows})
    return to_csv(meta, ["t", "x", "y", "square"], rows)


def cmd_smooth_cycle(args) -> str:
    p = _smooth(args)
    cyc = smooth.find_cycle(p)
    meta = dict(cmd="smooth-cycle", alpha=p.alpha, mu=p.mu)
    if args.format == "csv":
        meta["period"] = cyc.period
        y = cyc.orbit.wrapped
        return to_csv(meta, ["t", "y1", "y2"], zip(cyc.orbit.t, y[:, 0], y[:, 1]))
    return to_json({
        **meta,
        "period": cyc.period,
        "section_anchor": list(cyc.anchor),
        "saddle_value": p.saddle_value,
        "saddles": smooth.saddles(p),
    })


def cmd_smooth_prc(args) -> str:
    p = _smooth(args)
    thetas, z = smooth.smooth_prc(p, args.samples, args.r)
    meta = dict(cmd="smooth-prc", alpha=p.alpha, mu=p.mu, samples=args.samples, r=args.r)
    rows = [(th, zx, zy) for th, (zx, zy) in zip(thetas, z)]
    if args.format == "json":
        return to_json({**meta, "columns": ["theta", "Z_x", "Z_y"], "rows": rows})
    return to_csv(meta, ["theta", "Z_x", "Z_y"], rows)


def cmd_smooth_trajectory(args) -> str:
    p = _smooth(args)
    if args.start is not None:
        t_end = args.t_end if args.t_end is not None else 200.0
        path = smooth.integrate(args.start, t_end, p, args.h, args.stride)
    else:
        cyc = smooth.find_cycle(p, args.h)
        t_end = args.t_end if args.t_end is not None else args.periods * cyc.period
        path = smooth.timeplot(p, t_end, cyc, args.h, args.stride)
    y = path.wrapped
    rows = list(zip(path.t, y[:, 0], y[:, 1]))
    meta = dict(cmd="smooth-trajectory", alpha=p.alpha, mu=p.mu, h=args.h, t_end=t_end)
    if args.format == "json":
        return to_json({**meta, "columns": ["t", "y1", "y2"], "rows": rows})
    return to_csv(meta, ["t", "y1", "y2"], rows)


def _iris_flags(sp, a_default=0.2):
    sp.add_argument("--lambda", dest="lam", type=real, default=2.0, help="saddle ratio")
    sp.add_argument("--a", type=real, default=a_default, help="inter-square offset")


def _smooth_flags(sp, mu_default=0.1):
    sp.add_argument("--alpha", type=real, default=7 / 30)
    sp.add_argument("--mu", type=real, default=mu_default)


def _out_flags(sp, formats=("csv", "json"), default="csv"):
    sp.add_argument("--format", choices=formats, default=default)
    sp.add_argument("--out", help="output file (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="irisprc", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    sp = sub.add_parser("bifurcation", help="regime labels over a (lambda, a) grid plus the fold curve")
    sp.add_argument("--lambda-min", type=real, default=0.5)
    sp.add_argument("--lambda-max", type=real, default=4.0)
    sp.add_argument("--a-min", type=real, default=0.0)
    sp.add_argument("--a-max", type=real, default=0.5)
    sp.add_argument("--resolution", type=int, default=51)
    _out_flags(sp)
    sp.set_defaults(func=cmd_bifurcation)

    sp = sub.add_parser("cycle", help="limit-cycle summary (json) or entry return map (csv)")
    _iris_flags(sp)
    sp.add_argument("--samples", type=int, default=200)
    _out_flags(sp, default="json")
    sp.set_defaults(func=cmd_cycle)

    sp = sub.add_parser("prc", help="iris phase response curve")
    _iris_flags(sp)
    sp.add_argument("--direction", choices=["x", "y", "s", "u"], default="x")
    sp.add_argument("--eta", type=real, nargs=2, metavar=("ETA_S", "ETA_U"),
                    help="arbitrary direction in the square-1 frame, normalized in L1")
    sp.add_argument("--samples", type=int, default=256)
    sp.add_argument("--mode", choices=["analytic", "numeric", "both"], default="analytic")
    sp.add_argument("--r", type=real, default=1e-4, help="perturbation size for numeric mode")
    _out_flags(sp)
    sp.set_defaults(func=cmd_prc)

    sp = sub.add_parser("isochrons", help="asymptotic phase on a grid")
    _iris_flags(sp)
    sp.add_argument("--grid", type=int, default=400)
    _out_flags(sp, formats=("csv", "json", "binary"))
    sp.set_defaults(func=cmd_isochrons)

    sp = sub.add_parser("trajectory", help="event-exact iris time series")
    _iris_flags(sp)
    sp.add_argument("--start", type=real, nargs=2, metavar=("X", "Y"), help="global start point")
    sp.add_argument("--u0", type=real, help="entry position on square 1's entry edge")
    sp.add_argument("--which", choices=["stable", "unstable"], default="stable")
    sp.add_argument("--periods", type=real, default=2.0)
    sp.add_argument("--max-time", type=real, default=math.inf)
    sp.add_argument("--max-crossings", type=int, default=400)
    sp.add_argument("--samples", type=int, default=50, help="samples per square transit")
    _out_flags(sp)
    sp.set_defaults(func=cmd_trajectory)

    sp = sub.add_parser("smooth-cycle", help="smooth-system limit cycle")
    _smooth_flags(sp)
    _out_flags(sp, default="json")
    sp.set_defaults(func=cmd_smooth_cycle)

    sp = sub.add_parser("smooth-prc", help="finite-perturbation PRC of the smooth system")
    _smooth_flags(sp)
    sp.add_argument("--samples", type=int, default=64)
    sp.add_argument("--r", type=real, default=1e-4)
    _out_flags(sp)
    sp.set_defaults(func=cmd_smooth_prc)

    sp = sub.add_parser("smooth-trajectory", help="smooth-system time series")
    _smooth_flags(sp)
    sp.add_argument("--start", type=real, nargs=2, metavar=("Y1", "Y2"),
                    help="integrate from this point instead of the settled cycle")
    sp.add_argument("--t-end", type=real)
    sp.add_argument("--periods", type=real, default=3.0)
    sp.add_argument("--h", type=real, default=smooth.H_DEFAULT)
    sp.add_argument("--stride", type=int, default=10)
    _out_flags(sp)
    sp.set_defaults(func=cmd_smooth_trajectory)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        result = args.func(args)
    except NoCycleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_CYCLE
    except (DomainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except IrisError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if isinstance(result, bytes):
        if args.out:
            with open(args.out, "wb") as fh:
                fh.write(result)
        else:
            sys.stdout.buffer.write(result)
    elif args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(result)
    else:
        sys.stdout.write(result)
    return 0


if __name__ == "__main__":
    sys.exit(main())

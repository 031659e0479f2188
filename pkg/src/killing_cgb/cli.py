"""Command-line front end (``killing-cgb``).

Results are printed as JSON and written to ``$KILLING_CGB_OUTDIR`` (or
``--outdir``).  Exit codes: 0 success, 2 usage, 3 domain, 4 verification
failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import catalog as cat
from .probes import (
    ProbeConfig,
    ball_model,
    curvature_maximal_function,
    curvature_radius,
    energy_radius,
    local_variation,
)
from .quadrature import radial_profile
from .tensor_core import DomainError, GeometryError
from .theorems import eta_sequence, tagged, thm2_bound, verify_balance, verify_closure, verify_thm3

SCHEMA = 1
OUTDIR_ENV = "KILLING_CGB_OUTDIR"
EXIT_OK, EXIT_USAGE, EXIT_DOMAIN, EXIT_VERIFY = 0, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text: str):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="killing-cgb", description="Killing-field Gauss-Bonnet checks on catalog 4-manifolds")
    p.add_argument("--outdir", default=None, help=f"output directory (default ${OUTDIR_ENV} or ./killing-cgb-output)")
    p.add_argument("--seed", type=int, default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("catalog", help="catalog operations")
    c.add_argument("action", choices=["list"])

    c = sub.add_parser("closure", help="check d TP = P at random points")
    c.add_argument("--metric", required=True)
    c.add_argument("--points", type=int, default=100)
    c.add_argument("--h", type=float, default=None)
    c.add_argument("--tol", type=float, default=1e-8)

    c = sub.add_parser("balance", help="finite-radius Gauss-Bonnet balance")
    c.add_argument("--metric", required=True)
    c.add_argument("--radii", required=True, type=_floats)
    c.add_argument("--tol", type=float, default=1e-6)

    c = sub.add_parser("thm3", help="energy identity with asymptotic volume ratio")
    c.add_argument("--metric", required=True)
    c.add_argument("--tol", type=float, default=0.01)

    c = sub.add_parser("thm2", help="measured constant in the energy bound")
    c.add_argument("--metric", required=True)
    c.add_argument("--t", type=float, required=True)
    c.add_argument("--s", type=float, required=True)
    c.add_argument("--eta", type=float, default=1.0)

    c = sub.add_parser("probe", help="scale-local probes at a point")
    c.add_argument("kind", choices=["curvature-radius", "energy-radius", "variation", "maximal"])
    c.add_argument("--metric", required=True)
    c.add_argument("--point", required=True, type=_floats)
    c.add_argument("--s", type=float, required=True)
    c.add_argument("--eps0", type=float, default=1e-2)
    c.add_argument("--samples", type=int, default=4096)

    c = sub.add_parser("profile", help="tabulate radial profile as CSV")
    c.add_argument("--metric", required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--s-max", type=float, default=20.0)
    c.add_argument("--cells", type=int, default=200)

    c = sub.add_parser("eta", help="iteration weights and their sums")
    c.add_argument("--k", type=int, default=200)
    return p


def _entry(name: str):
    try:
        return cat.catalog_metric(name)
    except cat.UnknownMetricError as exc:
        raise UsageError(str(exc.args[0])) from exc
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _point(entry, coords):
    x = np.asarray(coords, dtype=float)
    if x.shape != (entry.metric.dimension,):
        raise UsageError(f"{entry.name} needs {entry.metric.dimension} coordinates, got {len(coords)}")
    entry.metric.check_domain(x)
    return x


def _run(args) -> tuple:
    """Return ``(payload, exit_code)``."""
    cmd = args.command
    if cmd == "catalog":
        return {"catalog": cat.catalog_listing()}, EXIT_OK

    if cmd == "eta":
        rep = eta_sequence(args.k)
        return {"eta": rep.as_dict()}, EXIT_OK

    entry = _entry(args.metric)
    head = {"metric": entry.name, "params": entry.params}

    if cmd == "closure":
        reports = verify_closure(entry, args.points, args.h, args.tol, args.seed)
        ok = all(r.passed for r in reports)
        return {**head, "points": args.points, "closure": [r.as_dict() for r in reports], "passed": ok}, \
            EXIT_OK if ok else EXIT_VERIFY

    if cmd == "balance":
        rep = verify_balance(entry, args.radii, args.tol)
        return {**head, "balance": rep.as_dict()}, EXIT_OK if rep.passed else EXIT_VERIFY

    if cmd == "thm3":
        rep = verify_thm3(entry, args.tol)
        return {**head, "thm3": rep.as_dict()}, EXIT_OK if rep.passed else EXIT_VERIFY

    if cmd == "thm2":
        rep = thm2_bound(entry, args.t, args.s, args.eta)
        return {**head, "thm2": rep.as_dict()}, EXIT_OK

    if cmd == "probe":
        x = _point(entry, args.point)
        cfg = ProbeConfig(n_angular=args.samples, s_cap=args.s, eps0=args.eps0, seed=args.seed)
        model = ball_model(entry, cfg)
        if args.kind == "curvature-radius":
            b = curvature_radius(entry, x, args.s, cfg, model)
            body = {"r_curv": tagged(b.value), "lower": tagged(b.lower), "upper": tagged(b.upper)}
        elif args.kind == "energy-radius":
            b = energy_radius(entry, x, args.s, cfg, model)
            body = {"rho": tagged(b.value), "lower": tagged(b.lower), "upper": tagged(b.upper),
                    "eps0": tagged(cfg.eps0, cat.TRIVIAL)}
        elif args.kind == "variation":
            v = local_variation(entry, x, args.s, cfg, model)
            prov = cat.PAPER if "local_variation" in entry.known and v.infinite else cat.COMPUTED
            body = {"m_x": tagged(v.ratio, prov), "infinite": v.infinite, "sup": tagged(v.sup),
                    "inf": tagged(v.inf), "ratio_upper": tagged(v.ratio_upper)}
        else:
            m = curvature_maximal_function(entry, x, args.s, cfg, model)
            body = {"maximal_energy": tagged(m)}
        return {**head, "probe": args.kind, "point": list(map(float, x)), "s": tagged(args.s, cat.TRIVIAL),
                "result": body}, EXIT_OK

    if cmd == "profile":
        prof = radial_profile(entry, args.s_max, args.cells)
        prof.to_csv(args.out)
        return {**head, "profile": {"csv": str(args.out), "rows": len(prof.r_grid),
                                    "columns": ["r", "geodesic_r", "shell_volume", "shell_energy"]}}, EXIT_OK

    raise UsageError(f"unknown command {cmd}")


def _emit(payload: dict, args, code: int) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True, allow_nan=False)
    print(text)
    outdir = Path(args.outdir or os.environ.get(OUTDIR_ENV) or "killing-cgb-output")
    outdir.mkdir(parents=True, exist_ok=True)
    name = args.command if not getattr(args, "metric", None) else f"{args.command}-{args.metric}"
    if args.command == "probe":
        name += f"-{args.kind}"
    safe = "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in name)
    (outdir / f"{safe}.json").write_text(text + "\n")


def main(argv=None) -> int:
    parser = build_parser()
    args = None
    try:
        args = parser.parse_args(argv)
        payload, code = _run(args)
        _emit({"schema": SCHEMA, "command": args.command, **payload, "exit_code": code}, args, code)
        return code
    except UsageError as exc:
        return _fail(args, EXIT_USAGE, "usage", str(exc))
    except (DomainError, GeometryError) as exc:
        return _fail(args, EXIT_DOMAIN, "domain", str(exc))
    except ValueError as exc:
        return _fail(args, EXIT_USAGE, "usage", str(exc))


def _fail(args, code, kind, message):
    err = {"schema": SCHEMA, "error": {"kind": kind, "message": message}, "exit_code": code}
    print(json.dumps(err, sort_keys=True), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())

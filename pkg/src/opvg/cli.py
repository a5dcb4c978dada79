"""Command-line entry point: ``opvg check|invariants|integrate``."""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import geometry as G
from .algebra import AElem
from .errors import OpvgError, SchemaError
from .integrate import (
    Quadrature,
    adjointness_residual,
    integrate_form,
    pettis_integral,
    stokes_residual,
)
from .scene import Scene, coefficient_vector, load_scene
from .suite import Row, run_suite

STOKES_TOL = 1e-8
ADJOINT_TOL = 1e-5


def _key(idx) -> str:
    return json.dumps([int(i) for i in idx])


def _tensor_json(arr: np.ndarray) -> dict:
    """Spell out every index of an (..., N) array as '[i,j,...]' -> AElem json."""
    return {_key(idx): AElem(arr[idx]).to_json() for idx in np.ndindex(*arr.shape[:-1])}


def make_report(command: str, scene: Scene, results: dict, rows: list[Row] | None = None,
                timings: dict | None = None) -> dict:
    rows = rows or []
    report = {
        "command": command,
        "scene_digest": scene.digest,
        "results": results,
        "identities": [r.to_json() for r in rows],
        "exit": 0 if all(r.passed for r in rows) else 1,
    }
    if timings is not None:
        report["timings"] = timings
    return report


def dumps(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def cmd_check(scene: Scene, samples: int = 16, seed: int = 42, timings: bool = False) -> dict:
    t0 = time.perf_counter()
    rows, results = run_suite(scene, samples=samples, seed=seed)
    t = {"total_s": time.perf_counter() - t0} if timings else None
    return make_report("check", scene, results, rows, t)


def parse_point(text: str, n: int) -> np.ndarray:
    try:
        p = np.array([float(t) for t in text.split(",")])
    except ValueError:
        raise SchemaError("--point", f"cannot parse {text!r}") from None
    if p.shape != (n,):
        raise SchemaError("--point", f"expected {n} coordinates, got {p.size}")
    return p


def cmd_invariants(scene: Scene, point, planes=()) -> dict:
    g = scene.metric
    p = np.asarray(point, dtype=float)
    gam = G.christoffel_at(g, p)
    cur = G.curvature_at(g, p)
    results = {
        "point": [float(c) for c in p],
        "nu": g.nu.to_json(),
        "christoffel": _tensor_json(gam.gamma),
        "riemann": _tensor_json(cur.R),
        "riemann_lowered": _tensor_json(cur.R_low),
        "ricci": _tensor_json(cur.Ric),
        "scalar": AElem(cur.S).to_json(),
        "sectional": [],
    }
    for a, b in planes:
        u = coefficient_vector(scene, a, p)
        v = coefficient_vector(scene, b, p)
        K = G.sectional(g, p, u, v)
        results["sectional"].append({"plane": [a, b], "K": K.to_json()})
    return make_report("invariants", scene, results)


def cmd_integrate(scene: Scene, form: str | None = None, function: str | None = None,
                  stokes: str | None = None, adjoint: tuple[str, str] | None = None,
                  quad: Quadrature = Quadrature()) -> dict:
    results: dict = {"quadrature": {"m": quad.m, "s": quad.s}}
    rows: list[Row] = []
    if form is not None:
        w = _named(scene.forms, form, "form")
        results["form"] = form
        results["value"] = integrate_form(w, scene.domain, quad, metric=scene.metric).to_json()
    elif function is not None:
        f = scene.functions[function] if function in scene.functions else _parse_expr(scene, function)
        results["function"] = function
        results["value"] = pettis_integral(f, scene.domain, quad, metric=scene.metric).to_json()
    elif stokes is not None:
        w = _named(scene.forms, stokes, "form")
        r = stokes_residual(w, scene.domain, quad, scene.metric.constants, scene.fibers)
        results.update({"form": stokes, "interior": r.interior.to_json(), "boundary": r.boundary.to_json()})
        rows.append(Row("stokes", float(np.max(r.residual.values.real)), STOKES_TOL))
    elif adjoint is not None:
        b = _named(scene.forms, adjoint[0], "form")
        a = _named(scene.forms, adjoint[1], "form")
        r = adjointness_residual(scene.metric, b, a, scene.domain, quad)
        results.update({"forms": list(adjoint), "d_side": r.d_side.to_json(),
                        "delta_side": r.delta_side.to_json()})
        rows.append(Row("adjointness", float(np.max(r.residual.values.real)), ADJOINT_TOL))
    else:
        raise SchemaError("integrate", "one of --form, --function, --stokes, --adjoint is required")
    return make_report("integrate", scene, results, rows)


def _named(table: dict, name: str, kind: str):
    if name not in table:
        raise SchemaError(f"/{kind}s/{name}", f"no {kind} named {name!r} in the scene")
    return table[name]


def _parse_expr(scene: Scene, src: str):
    from .errors import ExprError, ParseError

    try:
        return scene.parse(src)
    except ExprError as e:
        raise ParseError("--function", getattr(e, "offset", None), str(e)) from e


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="opvg", description="Geometry over C(X): identity checks, invariants, integrals.")
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="run the identity suite on a scene")
    c.add_argument("scene")
    c.add_argument("--samples", type=int, default=16)
    c.add_argument("--seed", type=int, default=42)
    c.add_argument("--timings", action="store_true", help="include wall-clock timings (non-deterministic)")
    c.add_argument("--output")

    i = sub.add_parser("invariants", help="curvature quantities at a point")
    i.add_argument("scene")
    i.add_argument("--point", required=True)
    i.add_argument("--plane", action="append", default=[], help="A,B: field names, coordinate names or indices")
    i.add_argument("--output")

    g = sub.add_parser("integrate", help="integrals, Stokes and adjointness residuals")
    g.add_argument("scene")
    what = g.add_mutually_exclusive_group(required=True)
    what.add_argument("--form")
    what.add_argument("--function")
    what.add_argument("--stokes")
    what.add_argument("--adjoint", help="B,A: check (dB, A) = (B, delta A)")
    g.add_argument("--quad", default="8,4", help="m,s: Gauss order and subdivisions per axis")
    g.add_argument("--output")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        scene = load_scene(args.scene)
        if args.command == "check":
            report = cmd_check(scene, args.samples, args.seed, args.timings)
        elif args.command == "invariants":
            p = parse_point(args.point, scene.dimension)
            planes = []
            for item in args.plane:
                parts = item.split(",")
                if len(parts) != 2:
                    raise SchemaError("--plane", f"expected A,B, got {item!r}")
                planes.append((parts[0].strip(), parts[1].strip()))
            report = cmd_invariants(scene, p, planes)
        else:
            try:
                quad = Quadrature.parse(args.quad)
            except ValueError as e:
                raise SchemaError("--quad", str(e)) from None
            adjoint = None
            if args.adjoint:
                parts = args.adjoint.split(",")
                if len(parts) != 2:
                    raise SchemaError("--adjoint", f"expected B,A, got {args.adjoint!r}")
                adjoint = (parts[0].strip(), parts[1].strip())
            report = cmd_integrate(scene, args.form, args.function, args.stokes, adjoint, quad)
    except OpvgError as e:
        print(f"opvg: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    text = dumps(report)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return report["exit"]


if __name__ == "__main__":
    sys.exit(main())

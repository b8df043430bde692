"""Command-line front end: ``gtnb <command> ...``.

Every command that writes a file also writes a run manifest next to it
(``<file>.manifest.json``, or ``manifest.json`` inside a figure directory).
``gtnb rerun MANIFEST`` re-executes it and reproduces the outputs byte for
byte. Exit codes: 0 ok, 2 usage, 3 numerical failure, 4 resource guard.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, figures, negbin, simulate, stein, twostage
from .core import GroupTestInstance
from .errors import DegenerateError, NumericalError, ResourceGuardError

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_RESOURCE = 0, 2, 3, 4
MANIFEST_SCHEMA = "gtnb.manifest/1"
OUTPUT_SCHEMA = "gtnb.output/1"
OUTPUT_DIR_ENV = "GTNB_OUTPUT_DIR"

GRID_K = (5, 10, 20)
GRID_T = (500, 1000)
GRID_P = (0.05, 0.1, 0.2)


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.10g" % x


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(v if isinstance(v, str) else fmt(v) for v in row) + "\n")
    return buf.getvalue()


def columns_csv(cols: dict) -> str:
    return csv_text(list(cols), zip(*cols.values()))


def json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# commands: each returns its output text (figure: file name -> text)
# ---------------------------------------------------------------------------


def _instance(a) -> GroupTestInstance:
    return GroupTestInstance(a.n, a.k, a.p, a.T)


def cmd_moments(a) -> str:
    inst = _instance(a)
    rows = negbin.comparison_table(inst, a.smax) if a.smax > 0 else []
    if a.format == "json":
        params = negbin.fit_moment_matched(inst)
        return json_text({
            "schema": OUTPUT_SCHEMA,
            "instance": {"n": inst.n, "k": inst.k, "p": inst.p, "T": inst.T},
            "negbin": {"r": params.r, "q": params.q},
            "rows": [{"s": r.s, "G": r.G, "Z": r.Z, "Y": r.Y, "X": r.X, "H": r.H} for r in rows],
        })
    return csv_text(["s", "G", "Z", "Y", "X", "H"], [(r.s, r.G, r.Z, r.Y, r.X, r.H) for r in rows])


def _render_bound(v: float) -> str:
    return "--" if v > 1.0 else fmt(v)


def cmd_stein(a) -> str:
    if a.grid:
        cells = {}
        for k in GRID_K:
            for T in GRID_T:
                for p in GRID_P:
                    cells[(k, T, p)] = stein.stein_bound(GroupTestInstance(a.n, k, p, T), tol=a.tol)
        if a.format == "json":
            return json_text({
                "schema": OUTPUT_SCHEMA,
                "n": a.n,
                "cells": [{"k": k, "T": T, "p": p, **rep.to_dict()} for (k, T, p), rep in cells.items()],
            })
        header = ["k"] + [f"T={T} p={fmt(p)}" for T in GRID_T for p in GRID_P]
        rows = [[k] + [_render_bound(cells[(k, T, p)].total) for T in GRID_T for p in GRID_P] for k in GRID_K]
        return csv_text(header, rows)
    for name in ("k", "p", "T"):
        if getattr(a, name) is None:
            raise UsageError(f"--{name} is required without --grid")
    rep = stein.stein_bound(_instance(a), tol=a.tol)
    if a.format == "json":
        return json_text({"schema": OUTPUT_SCHEMA, **rep.to_dict()})
    rows = [("total", rep.total, _render_bound(rep.total))]
    rows += [(f"term_{name}", v, fmt(v)) for name, v in rep.terms.items()]
    rows += [("integrand_breakpoints", rep.integrand_breakpoints, str(rep.integrand_breakpoints))]
    return csv_text(["quantity", "value", "display"], rows)


def cmd_plan(a) -> str:
    p = a.p if a.p is not None else 1.0 / a.k
    plan = twostage.plan_two_stage(GroupTestInstance(a.n, a.k, p, a.budget))
    if a.format == "json":
        return json_text({"schema": OUTPUT_SCHEMA, "n": a.n, "k": a.k, "p": p, "budget": a.budget, **plan.to_dict()})
    rows = [
        ("T1", plan.T1),
        ("T2", plan.T2),
        ("T1_approx", "" if plan.T1_approx is None else fmt(plan.T1_approx)),
        ("T1_exact", "" if plan.T1_exact is None else fmt(plan.T1_exact)),
        ("expected_stage2", plan.expected_stage2),
        ("expected_total", plan.expected_total),
        ("individual_testing_feasible", str(plan.individual_testing_feasible).lower()),
    ]
    for name, rep in plan.error_bounds.items():
        rows.append((f"{name}_bound", rep.total))
        rows.append((f"{name}_vacuous", str(rep.vacuous).lower()))
    return csv_text(["quantity", "value"], rows)


def cmd_simulate(a) -> str:
    cfg = simulate.SimulationConfig(_instance(a), a.trials, a.seed, simulate.Engine(a.engine))
    return simulate.simulate_G(cfg, workers=a.workers).to_csv()


def cmd_figure(a) -> dict[str, str]:
    data = figures.FIGURES[a.id](a.trials, a.seed)
    return {name: columns_csv(cols) for name, cols in data.items()}


# ---------------------------------------------------------------------------
# manifests
# ---------------------------------------------------------------------------


def _params(a) -> dict:
    skip = {"func", "out", "command", "manifest"}
    return {k: v for k, v in sorted(vars(a).items()) if k not in skip}


def _manifest(a, outputs: list[str]) -> dict:
    params = _params(a)
    return {
        "schema": MANIFEST_SCHEMA,
        "command": a.command,
        "params": params,
        "seed": params.get("seed"),
        "version": __version__,
        "outputs": outputs,
    }


def _argv_from_manifest(m: dict, out: str | None) -> list[str]:
    argv = [m["command"]]
    for k, v in m["params"].items():
        if v is None or v is False:
            continue
        flag = "--" + k
        argv += [flag] if v is True else [flag, str(v)]
    if out is not None:
        argv += ["--out", out]
    return argv


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _emit(a, result) -> None:
    if a.command == "figure":
        out = a.out or os.environ.get(OUTPUT_DIR_ENV)
        if not out:
            raise UsageError(f"figure needs --out DIR or ${OUTPUT_DIR_ENV}")
        d = Path(out)
        for name, text in result.items():
            _write(d / name, text)
        _write(d / "manifest.json", json_text(_manifest(a, sorted(result))))
        print(f"wrote {len(result)} file(s) to {d}")
        return
    if a.out:
        path = Path(a.out)
        _write(path, result)
        _write(Path(str(path) + ".manifest.json"), json_text(_manifest(a, [path.name])))
    else:
        sys.stdout.write(result)


def cmd_rerun(a) -> int:
    m = json.loads(Path(a.manifest).read_text())
    if m.get("schema") != MANIFEST_SCHEMA:
        raise UsageError(f"unknown manifest schema {m.get('schema')!r}")
    base = Path(a.manifest).parent
    if a.out is not None:
        out = a.out if m["command"] == "figure" else str(Path(a.out) / m["outputs"][0])
    elif m["command"] == "figure":
        out = str(base)
    else:
        out = str(base / m["outputs"][0])
    return main(_argv_from_manifest(m, out))


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _nonneg_int(s: str) -> int:
    v = int(s)
    if v < 0:
        raise argparse.ArgumentTypeError("must be a non-negative integer")
    return v


def _seed(s: str) -> int:
    v = int(s)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gtnb", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"gtnb {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def inst_args(p, required=True):
        p.add_argument("--n", type=_positive_int, required=True)
        p.add_argument("--k", type=_positive_int, required=required)
        p.add_argument("--p", type=float, required=required)
        p.add_argument("--T", type=_nonneg_int, required=required)

    p = sub.add_parser("moments", help="falling moments of G and its comparison laws")
    inst_args(p)
    p.add_argument("--smax", type=_nonneg_int, default=4)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("stein", help="Stein-Chen total-variation bound")
    inst_args(p, required=False)
    p.add_argument("--grid", action="store_true", help="k in {5,10,20} x T in {500,1000} x p in {.05,.1,.2}")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_stein)

    p = sub.add_parser("figure", help="data behind figures 2, 3 and 4")
    p.add_argument("--id", type=int, choices=sorted(figures.FIGURES), required=True)
    p.add_argument("--trials", type=_positive_int, default=100_000)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--out", help=f"output directory (default ${OUTPUT_DIR_ENV})")
    p.set_defaults(func=cmd_figure)

    p = sub.add_parser("plan", help="two-stage COMP plan for a test budget")
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--k", type=_positive_int, required=True)
    p.add_argument("--p", type=float, help="design parameter (default 1/k)")
    p.add_argument("--budget", type=_nonneg_int, required=True)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("simulate", help="Monte Carlo histogram of G")
    inst_args(p)
    p.add_argument("--trials", type=_positive_int, required=True)
    p.add_argument("--seed", type=_seed, required=True)
    p.add_argument("--engine", choices=[e.value for e in simulate.Engine], default="mixture")
    p.add_argument("--workers", type=_positive_int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("rerun", help="re-execute a run manifest")
    p.add_argument("manifest")
    p.add_argument("--out", help="write outputs here instead of next to the manifest")
    p.set_defaults(func=None)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        a = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if a.command == "rerun":
            return cmd_rerun(a)
        _emit(a, a.func(a))
        return EXIT_OK
    except ResourceGuardError as exc:
        print(f"gtnb: resource guard: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except NumericalError as exc:
        print(f"gtnb: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, DegenerateError, ValueError, FileNotFoundError, KeyError) as exc:
        print(f"gtnb: error: {exc}", file=sys.stderr)
        return EXIT_USAGE

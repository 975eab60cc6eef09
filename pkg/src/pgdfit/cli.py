"""Command line: ``pgdfit run|evaluate|sweep|report``.

Exit status 0 on success, 1 for bad input (config, archive, arguments),
2 when a solver fails.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .archive import ArchiveError, load_archive
from .config import ConfigError, load_config
from .engine import DegenerateCoefficient, EmptyProblem
from .linalg import ContractViolation, MaxIterations, SingularSystem
from .mesh import InvalidGrid
from .oracle import BudgetExceeded, sweep_electrothermal
from .pipeline import fmt, run, write_csv
from .separated import OutOfRange

EXIT_OK, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2
INPUT_ERRORS = (ConfigError, ArchiveError, OutOfRange, InvalidGrid, ContractViolation, BudgetExceeded, OSError)
SOLVER_ERRORS = (SingularSystem, MaxIterations, DegenerateCoefficient, EmptyProblem, FloatingPointError)


def _parse_mu(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}") from None


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.output:
        cfg.output = Path(args.output)
    outcome = run(cfg, compare=not args.no_compare)
    res = outcome.result
    for name, rep in (("electric", res.electric_report), ("thermal", res.thermal_report)):
        print(f"{name}: {rep.n_modes} modes, stop={rep.stop_reason}, spatial solves={rep.total_spatial_calls}")
    for row in outcome.errors:
        if row[1] == (res.electric.n_modes if row[0] == "electric" else res.thermal.n_modes):
            print(f"{row[0]}: rel error {fmt(row[3])}, max rel error {fmt(row[4])}")
    print(f"wrote {cfg.output}  ({outcome.seconds:.3f} s)")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    arc = load_archive(args.archive)
    mu = args.mu
    if len(mu) != len(arc.solution.axes):
        raise ContractViolation(f"archive has {len(arc.solution.axes)} parameters, got {len(mu)} values")
    values = arc.solution.evaluate(mu)
    coords = arc.grid.node_coordinates()
    names = ["x", "y", "z"][: arc.grid.dim]
    rows = [tuple(c) + (v,) for c, v in zip(coords, values)]
    if args.output:
        write_csv(Path(args.output), names + [arc.kind], rows)
    else:
        print(",".join(names + [arc.kind]))
        for r in rows:
            print(",".join(fmt(float(v)) for v in r))
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    budget = args.budget if args.budget is not None else cfg.sweep_budget
    e, t = sweep_electrothermal(cfg.setup, budget, cfg.averaging)
    out = Path(args.output) if args.output else cfg.output
    out.mkdir(parents=True, exist_ok=True)
    for name, sw in (("electric", e), ("thermal", t)):
        header = [ax.name for ax in sw.axes] + [f"n{i}" for i in range(cfg.setup.grid.n_nodes)]
        rows = []
        for idx, field in zip(sw.indices, sw.fields):
            rows.append(tuple(float(ax.points[j]) for ax, j in zip(sw.axes, idx)) + tuple(field))
        write_csv(out / f"sweep_{name}.csv", header, rows)
    print(f"{e.count} direct solves per field, wrote {out}")
    return EXIT_OK


def cmd_report(args) -> int:
    arc = load_archive(args.archive)
    sol = arc.solution
    print(f"kind: {arc.kind}")
    print(f"grid nodes: {' x '.join(str(n) for n in arc.grid.node_shape)}")
    for ax in sol.axes:
        print(f"parameter {ax.name}: [{fmt(ax.lo)}, {fmt(ax.hi)}], {ax.size} points")
    print(f"lift: {'yes' if sol.lift is not None else 'no'}")
    print(f"modes: {sol.n_modes}")
    dual = arc.grid.dual_volumes()
    for s, mode in enumerate(sol.modes, start=1):
        mag = float(np.sqrt(np.dot(dual, mode.spatial**2)))
        for f, ax in zip(mode.factors, sol.axes):
            mag *= ax.norm(f)
        print(f"  mode {s}: magnitude {fmt(mag)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pgdfit", description="PGD surrogates for parameterized electrothermal FIT models.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="build the surrogates of a YAML config")
    r.add_argument("config")
    r.add_argument("-o", "--output", help="output directory (overrides the config)")
    r.add_argument("--no-compare", action="store_true", help="skip the reference sweep and error table")
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("evaluate", help="evaluate an archived surrogate at one parameter point")
    e.add_argument("archive")
    e.add_argument("--mu", type=_parse_mu, required=True, help="comma separated values, one per parameter")
    e.add_argument("-o", "--output", help="CSV file (default: stdout)")
    e.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("sweep", help="direct FIT solves on every collocation point")
    s.add_argument("config")
    s.add_argument("-o", "--output")
    s.add_argument("--budget", type=int)
    s.set_defaults(func=cmd_sweep)

    rp = sub.add_parser("report", help="summarize an archive")
    rp.add_argument("archive")
    rp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except SOLVER_ERRORS as exc:
        print(f"solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

"""Batch runs: solve, archive, and write the CSV reports of a configuration."""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .archive import save_archive
from .config import RunConfig
from .electrothermal import ElectrothermalResult, solve_electrothermal
from .engine import PgdReport
from .oracle import (
    analytic_1d_electric,
    analytic_1d_thermal,
    relative_l2_error_1d,
    surrogate_errors,
    sweep_electrothermal,
)

log = logging.getLogger(__name__)


def fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


@dataclass
class RunOutcome:
    result: ElectrothermalResult
    seconds: float
    # rows of error_vs_modes.csv, empty when no reference was computed
    errors: list[tuple]


def run(cfg: RunConfig, compare: bool = True) -> RunOutcome:
    """Solve both subproblems and write every output file into ``cfg.output``."""
    out = cfg.output
    out.mkdir(parents=True, exist_ok=True)
    failed = out / "FAILED"
    if failed.exists():
        failed.unlink()
    try:
        return _run(cfg, out, compare)
    except Exception as exc:
        failed.write_text(f"{type(exc).__name__}: {exc}\n")
        raise


def _run(cfg: RunConfig, out: Path, compare: bool) -> RunOutcome:
    s = cfg.setup
    t0 = time.perf_counter()
    res = solve_electrothermal(
        s.grid, s.sigma, s.lam, s.bc_electric, s.bc_thermal, cfg.pgd,
        cfg.averaging, cfg.lift_electric, cfg.lift_thermal, cfg.solver,
    )
    seconds = time.perf_counter() - t0
    log.info("electric: %d modes (%s), thermal: %d modes (%s), %.3f s",
             res.electric_report.n_modes, res.electric_report.stop_reason,
             res.thermal_report.n_modes, res.thermal_report.stop_reason, seconds)
    save_archive(out / "electric.pgd", s.grid, res.electric, "electric")
    save_archive(out / "thermal.pgd", s.grid, res.thermal, "thermal")
    write_report(out / "report.csv", res)
    write_fp_trace(out / "fp_trace.csv", res)
    errors = error_table(cfg, res) if compare else []
    if errors:
        write_csv(out / "error_vs_modes.csv",
                  ["problem", "modes", "magnitude", "rel_error", "max_rel_error", "discretization_error"], errors)
    return RunOutcome(res, seconds, errors)


def _reports(res: ElectrothermalResult) -> list[tuple[str, PgdReport]]:
    return [("electric", res.electric_report), ("thermal", res.thermal_report)]


def write_report(path: Path, res: ElectrothermalResult) -> None:
    rows = []
    for name, rep in _reports(res):
        for m in rep.modes:
            rows.append((name, m.index, m.magnitude, m.fp_iterations, m.spatial_calls, int(m.converged), rep.stop_reason))
    write_csv(path, ["problem", "mode", "magnitude", "fp_iterations", "spatial_calls", "converged", "stop_reason"], rows)


def write_fp_trace(path: Path, res: ElectrothermalResult) -> None:
    rows = []
    for name, rep in _reports(res):
        for m in rep.modes:
            for k, (d, dr) in enumerate(zip(m.deltas, m.deltas_rel), start=1):
                rows.append((name, m.index, k, d, dr))
    write_csv(path, ["problem", "mode", "k", "delta", "delta_rel"], rows)


def error_table(cfg: RunConfig, res: ElectrothermalResult) -> list[tuple]:
    """Surrogate error per truncation level, for both subproblems.

    The 1D preset is measured against its closed form in the continuous L2
    norm; everything else against a full sweep of direct FIT solves.
    """
    overridden = any(k in cfg.raw for k in ("grid", "parameters", "materials", "boundary"))
    if cfg.problem == "model1d" and not overridden:
        return _errors_1d(cfg, res)
    e_sweep, t_sweep = sweep_electrothermal(cfg.setup, cfg.sweep_budget, cfg.averaging)
    rows = []
    for name, sol, rep, sweep in (
        ("electric", res.electric, res.electric_report, e_sweep),
        ("thermal", res.thermal, res.thermal_report, t_sweep),
    ):
        for m in range(1, sol.n_modes + 1):
            rel, worst = surrogate_errors(sol.truncated(m), sweep, cfg.setup.grid)
            rows.append((name, m, rep.modes[m - 1].magnitude, rel, worst, float("nan")))
    return rows


def _errors_1d(cfg: RunConfig, res: ElectrothermalResult) -> list[tuple]:
    s = cfg.setup
    x = s.grid.axes[0]
    length = 0.5 * x[-1]
    mus = s.axes[0].points
    exact = {
        "electric": lambda mu: (lambda y: analytic_1d_electric(y, mu, length)),
        "thermal": lambda mu: (lambda y: analytic_1d_thermal(y, mu, length, float(s.bc_thermal.values[0]))),
    }
    e_sweep, t_sweep = sweep_electrothermal(s, cfg.sweep_budget, cfg.averaging)
    rows = []
    for name, sol, rep, direct in (
        ("electric", res.electric, res.electric_report, e_sweep),
        ("thermal", res.thermal, res.thermal_report, t_sweep),
    ):
        disc = max(relative_l2_error_1d(x, direct.fields[j], exact[name](mu)) for j, mu in enumerate(mus))
        for m in range(1, sol.n_modes + 1):
            trunc = sol.truncated(m)
            errs = [relative_l2_error_1d(x, trunc.evaluate_index((j,)), exact[name](mu)) for j, mu in enumerate(mus)]
            rows.append((name, m, rep.modes[m - 1].magnitude, float(np.sqrt(np.mean(np.square(errs)))), max(errs), disc))
    return rows

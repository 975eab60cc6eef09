"""Run configuration: YAML documents checked key by key with line numbers.

A config names a ``problem`` (``model1d``, ``block3d`` or ``custom``).
The two presets supply every section; any section given explicitly
replaces the preset's.  Example::

    problem: custom
    grid:
      - {lo: 0.0, hi: 2.0, cells: 200}
    parameters:
      - {name: mu_1, lo: 0.2, hi: 1.0, points: 100}
    materials:
      sigma:
        default: 1.0
        regions:
          - {box: [[0.0, 1.0]], value: mu_1}
      lambda: same
    boundary:
      electric: [{face: x-min, value: 0.0}, {face: x-max, value: 1.0}]
      thermal: [{face: x-min, value: 20.0}, {face: x-max, value: 20.0}]
    pgd: {tol_fp: 1.0e-7, tol_pgd: 1.0e-2, max_modes: 50}
    output: out
"""

from __future__ import annotations

import copy
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .engine import PgdConfig
from .linalg import ContractViolation
from .mesh import AXIS_NAMES, BoundaryCondition, InvalidGrid, build_grid
from .problems import BRIDGES, ProblemSetup
from .separated import ParameterAxis, SeparatedCoefficient, SeparatedTerm
from .electrothermal import LIFT_RULES


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, source: str = "<config>"):
        self.line = line
        self.source = source
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {message}")


class _Map(dict):
    """dict that remembers the source line of itself and of each key."""

    line: int | None = None
    key_lines: dict


class _Seq(list):
    line: int | None = None


class _Loader(yaml.SafeLoader):
    pass


def _construct_map(loader, node):
    loader.flatten_mapping(node)
    out = _Map()
    out.line = node.start_mark.line + 1
    out.key_lines = {}
    for knode, vnode in node.value:
        key = loader.construct_object(knode, deep=True)
        if key in out:
            raise ConfigError(f"duplicate key {key!r}", knode.start_mark.line + 1)
        out[key] = loader.construct_object(vnode, deep=True)
        out.key_lines[key] = knode.start_mark.line + 1
    return out


def _construct_seq(loader, node):
    out = _Seq(loader.construct_object(v, deep=True) for v in node.value)
    out.line = node.start_mark.line + 1
    return out


_Loader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_map)
_Loader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_SEQUENCE_TAG, _construct_seq)


MODEL1D = {
    "grid": [{"lo": 0.0, "hi": 2.0, "cells": 200}],
    "parameters": [{"name": "mu_1", "lo": 0.2, "hi": 1.0, "points": 100}],
    "materials": {
        "sigma": {"default": 1.0, "regions": [{"box": [[0.0, 1.0]], "value": "mu_1"}]},
        "lambda": "same",
    },
    "boundary": {
        "electric": [{"face": "x-min", "value": 0.0}, {"face": "x-max", "value": 1.0}],
        "thermal": [{"face": "x-min", "value": 20.0}, {"face": "x-max", "value": 20.0}],
    },
}

BLOCK3D = {
    "grid": [{"lo": 0.0, "hi": 1.0, "cells": 8}] * 3,
    "parameters": [
        {"name": "mu_1", "lo": 1.0, "hi": 10.0, "points": 10},
        {"name": "mu_2", "lo": 1.0, "hi": 10.0, "points": 10},
    ],
    "materials": {
        "sigma": {
            "default": 1.0,
            "regions": [
                {"box": [list(b) for b in BRIDGES[0]], "value": "mu_1"},
                {"box": [list(b) for b in BRIDGES[1]], "value": "mu_2"},
            ],
        },
        "lambda": "same",
    },
    "boundary": {
        "electric": [{"face": "x-min", "value": 0.0}, {"face": "x-max", "value": 1.0}],
        "thermal": [{"face": "x-min", "value": 20.0}, {"face": "x-max", "value": 20.0}],
    },
}

PRESETS = {"model1d": MODEL1D, "block3d": BLOCK3D}
TOP_KEYS = {"problem", "grid", "parameters", "materials", "boundary", "pgd", "output", "averaging", "sweep_budget", "solver"}
PGD_KEYS = {"tol_fp", "tol_pgd", "max_modes", "max_fp_iters", "null_tol", "lift_electric", "lift_thermal"}


@dataclass
class RunConfig:
    problem: str
    setup: ProblemSetup
    pgd: PgdConfig
    output: Path
    lift_electric: str = "dirichlet"
    lift_thermal: str = "harmonic"
    averaging: str = "arithmetic"
    solver: str = "direct"
    sweep_budget: int = 10_000
    raw: dict = field(default_factory=dict, repr=False)


class _Checker:
    def __init__(self, source: str):
        self.source = source

    def fail(self, msg, node=None, key=None):
        line = None
        if isinstance(node, _Map) and key is not None:
            line = node.key_lines.get(key, node.line)
        elif isinstance(node, (_Map, _Seq)):
            line = node.line
        raise ConfigError(msg, line, self.source)

    def mapping(self, node, what, allowed, required=()):
        if not isinstance(node, dict):
            self.fail(f"{what} must be a mapping", node)
        for k in node:
            if k not in allowed:
                self.fail(f"unknown key {k!r} in {what}", node, k)
        for k in required:
            if k not in node:
                self.fail(f"{what} is missing {k!r}", node)
        return node

    def number(self, node, key, what, positive=False, integer=False):
        v = node[key]
        ok = isinstance(v, (int, float)) and not isinstance(v, bool)
        if integer:
            ok = ok and isinstance(v, int)
        if not ok or (positive and not v > 0):
            kind = "integer" if integer else "number"
            self.fail(f"{what}.{key} must be a {'positive ' if positive else ''}{kind}", node, key)
        return v


_VALUE = re.compile(r"^\s*(?:([-+0-9.eE]+)\s*\*\s*)?(mu_\d+)\s*$")


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", None, str(path)) from exc
    return parse_config(text, str(path), base=path.parent)


def parse_config(text: str, source: str = "<config>", base: Path | None = None) -> RunConfig:
    try:
        doc = yaml.load(text, Loader=_Loader)
    except ConfigError as exc:
        raise ConfigError(str(exc).split(": ", 1)[-1], exc.line, source) from None
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"invalid YAML: {getattr(exc, 'problem', exc)}", mark.line + 1 if mark else None, source) from None
    ck = _Checker(source)
    ck.mapping(doc, "config", TOP_KEYS, required=("problem",))
    problem = doc["problem"]
    if problem not in ("model1d", "block3d", "custom"):
        ck.fail(f"problem must be model1d, block3d or custom, not {problem!r}", doc, "problem")
    merged: dict[str, Any] = copy.deepcopy(PRESETS.get(problem, {}))
    for key in ("grid", "parameters", "materials", "boundary"):
        if key in doc:
            merged[key] = doc[key]
        elif key not in merged:
            ck.fail(f"custom problem needs a {key!r} section", doc)

    averaging = doc.get("averaging", "arithmetic")
    if averaging not in ("arithmetic", "harmonic"):
        ck.fail("averaging must be arithmetic or harmonic", doc, "averaging")
    solver = doc.get("solver", "direct")
    if solver not in ("direct", "cg"):
        ck.fail("solver must be direct or cg", doc, "solver")

    grid = _grid(ck, merged["grid"])
    axes = _axes(ck, merged["parameters"])
    sigma, lam = _materials(ck, merged["materials"], grid, axes)
    bc_e, bc_t = _boundary(ck, merged["boundary"], grid)
    setup = ProblemSetup(grid, sigma, lam, bc_e, bc_t)

    pgd_node = ck.mapping(doc.get("pgd", _Map()), "pgd", PGD_KEYS)
    kwargs = {}
    for key in ("tol_fp", "tol_pgd", "null_tol"):
        if key in pgd_node:
            kwargs[key] = float(ck.number(pgd_node, key, "pgd", positive=True))
    for key in ("max_modes", "max_fp_iters"):
        if key in pgd_node:
            kwargs[key] = ck.number(pgd_node, key, "pgd", positive=True, integer=True)
    lifts = {}
    for key, default in (("lift_electric", "dirichlet"), ("lift_thermal", "harmonic")):
        val = pgd_node.get(key, default)
        if val not in LIFT_RULES:
            ck.fail(f"pgd.{key} must be one of {', '.join(LIFT_RULES)}", pgd_node, key)
        lifts[key] = val
    try:
        pgd = PgdConfig(**kwargs)
    except ContractViolation as exc:
        ck.fail(str(exc), pgd_node)

    budget = doc.get("sweep_budget", 10_000)
    if "sweep_budget" in doc:
        ck.number(doc, "sweep_budget", "config", positive=True, integer=True)
    out = Path(str(doc.get("output", "out")))
    if base is not None and not out.is_absolute():
        out = base / out
    return RunConfig(problem, setup, pgd, out, lifts["lift_electric"], lifts["lift_thermal"], averaging, solver, budget, doc)


def _grid(ck: _Checker, node):
    if not isinstance(node, list) or not 1 <= len(node) <= 3:
        ck.fail("grid must be a list of 1 to 3 axes", node)
    coords = []
    for d, ax in enumerate(node):
        ck.mapping(ax, f"grid[{d}]", {"lo", "hi", "cells", "points"})
        if "points" in ax:
            if any(k in ax for k in ("lo", "hi", "cells")):
                ck.fail(f"grid[{d}] takes either points or lo/hi/cells", ax)
            pts = ax["points"]
            if not isinstance(pts, list) or not all(isinstance(v, (int, float)) for v in pts):
                ck.fail(f"grid[{d}].points must be a list of numbers", ax, "points")
            coords.append(np.array(pts, dtype=float))
        else:
            ck.mapping(ax, f"grid[{d}]", {"lo", "hi", "cells"}, required=("lo", "hi", "cells"))
            lo = ck.number(ax, "lo", f"grid[{d}]")
            hi = ck.number(ax, "hi", f"grid[{d}]")
            n = ck.number(ax, "cells", f"grid[{d}]", positive=True, integer=True)
            coords.append(np.linspace(lo, hi, n + 1))
    try:
        return build_grid(coords)
    except InvalidGrid as exc:
        ck.fail(str(exc), node)


def _axes(ck: _Checker, node):
    if not isinstance(node, list):
        ck.fail("parameters must be a list", node)
    axes = []
    for p, ax in enumerate(node):
        ck.mapping(ax, f"parameters[{p}]", {"name", "lo", "hi", "points"}, required=("lo", "hi", "points"))
        name = ax.get("name", f"mu_{p + 1}")
        if name != f"mu_{p + 1}":
            ck.fail(f"parameter {p + 1} must be named mu_{p + 1}", ax, "name")
        lo = ck.number(ax, "lo", f"parameters[{p}]")
        hi = ck.number(ax, "hi", f"parameters[{p}]")
        n = ck.number(ax, "points", f"parameters[{p}]", positive=True, integer=True)
        if n < 2 or not hi > lo:
            ck.fail(f"parameters[{p}] needs hi > lo and at least 2 points", ax)
        axes.append(ParameterAxis.uniform(lo, hi, n, name))
    return tuple(axes)


def _coefficient(ck: _Checker, node, what, grid, axes) -> SeparatedCoefficient:
    ck.mapping(node, what, {"default", "regions"}, required=("default",))
    default = ck.number(node, "default", what)
    regions = node.get("regions", [])
    if not isinstance(regions, list):
        ck.fail(f"{what}.regions must be a list", node, "regions")
    owner = np.full(grid.n_cells, -1)
    specs = []
    for r, reg in enumerate(regions):
        ck.mapping(reg, f"{what}.regions[{r}]", {"box", "value"}, required=("box", "value"))
        box = reg["box"]
        if (
            not isinstance(box, list)
            or len(box) != grid.dim
            or not all(isinstance(b, list) and len(b) == 2 for b in box)
        ):
            ck.fail(f"{what}.regions[{r}].box needs one [lo, hi] pair per grid axis", reg, "box")
        scale, axis = _parse_value(ck, reg, f"{what}.regions[{r}]", len(axes))
        owner[grid.cells_in_box([tuple(map(float, b)) for b in box])] = r
        specs.append((scale, axis))
    terms = []
    ones = [np.ones(ax.size) for ax in axes]
    rest = (owner == -1).astype(float)
    if default < 0:
        ck.fail(f"{what}.default must be non-negative", node, "default")
    if default > 0 and rest.any():
        terms.append(SeparatedTerm(default * rest, tuple(ones)))
    for r, (scale, axis) in enumerate(specs):
        mask = (owner == r).astype(float)
        if not mask.any():
            continue
        factors = list(ones)
        if axis is not None:
            factors[axis] = axes[axis].points.copy()
        terms.append(SeparatedTerm(scale * mask, tuple(factors)))
    if not terms:
        ck.fail(f"{what} is zero everywhere", node)
    try:
        coeff = SeparatedCoefficient(tuple(terms), axes)
    except ContractViolation as exc:
        ck.fail(f"{what}: {exc}", node)
    if coeff.min_value() <= 0:
        ck.fail(f"{what} must be positive on every cell for every parameter value", node)
    return coeff


def _parse_value(ck, reg, what, n_axes):
    v = reg["value"]
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        if v < 0:
            ck.fail(f"{what}.value must be non-negative", reg, "value")
        return float(v), None
    m = _VALUE.match(str(v))
    if not m:
        ck.fail(f"{what}.value must be a number, mu_p or c*mu_p", reg, "value")
    scale = float(m.group(1)) if m.group(1) else 1.0
    p = int(m.group(2).split("_")[1])
    if not 1 <= p <= n_axes:
        ck.fail(f"{what}.value refers to undefined parameter {m.group(2)}", reg, "value")
    return scale, p - 1


def _materials(ck, node, grid, axes):
    ck.mapping(node, "materials", {"sigma", "lambda"}, required=("sigma", "lambda"))
    sigma = _coefficient(ck, node["sigma"], "materials.sigma", grid, axes)
    if node["lambda"] == "same":
        lam = sigma
    else:
        lam = _coefficient(ck, node["lambda"], "materials.lambda", grid, axes)
    return sigma, lam


_FACES = {f"{a}-{s}": (d, s) for d, a in enumerate(AXIS_NAMES) for s in ("min", "max")}


def _bc(ck, node, what, grid):
    if not isinstance(node, list) or not node:
        ck.fail(f"{what} must be a non-empty list of faces", node)
    faces = {}
    for i, item in enumerate(node):
        ck.mapping(item, f"{what}[{i}]", {"face", "value"}, required=("face", "value"))
        face = item["face"]
        if face not in _FACES or _FACES[face][0] >= grid.dim:
            ck.fail(f"{what}[{i}].face {face!r} is not a face of this grid", item, "face")
        faces[_FACES[face]] = float(ck.number(item, "value", f"{what}[{i}]"))
    return BoundaryCondition.from_faces(grid, faces)


def _boundary(ck, node, grid):
    ck.mapping(node, "boundary", {"electric", "thermal"}, required=("electric", "thermal"))
    return _bc(ck, node["electric"], "boundary.electric", grid), _bc(ck, node["thermal"], "boundary.thermal", grid)

"""Mode archive: a text header followed by raw little-endian float64 arrays.

Header layout (one ``key value...`` per line, ASCII)::

    pgdfit-archive 1
    kind thermal
    grid 201
    axis mu_1 100
    modes 8
    lift 1
    end

``grid`` lists the node count per spatial axis.  The binary block holds,
in order: spatial node coordinates (one array per axis), parameter points
(one array per axis), the lift if present, then every mode as its spatial
vector followed by its parametric factors.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .mesh import TensorGrid, build_grid
from .separated import Mode, ParameterAxis, SeparatedSolution

MAGIC = "pgdfit-archive"
VERSION = 1
_F8 = np.dtype("<f8")


class ArchiveError(ValueError):
    pass


@dataclass
class Archive:
    grid: TensorGrid
    solution: SeparatedSolution
    kind: str = "field"


def save_archive(path, grid: TensorGrid, solution: SeparatedSolution, kind: str = "field") -> None:
    if not kind.isidentifier():
        raise ArchiveError(f"kind must be a plain word, got {kind!r}")
    lines = [f"{MAGIC} {VERSION}", f"kind {kind}", "grid " + " ".join(str(n) for n in grid.node_shape)]
    for ax in solution.axes:
        if not ax.name or any(c.isspace() for c in ax.name):
            raise ArchiveError(f"axis name {ax.name!r} cannot be stored")
        lines.append(f"axis {ax.name} {ax.size}")
    lines.append(f"modes {solution.n_modes}")
    lines.append(f"lift {int(solution.lift is not None)}")
    lines.append("end")
    arrays = list(grid.axes) + [ax.points for ax in solution.axes]
    if solution.lift is not None:
        arrays.append(solution.lift)
    for mode in solution.modes:
        arrays.append(mode.spatial)
        arrays.extend(mode.factors)
    with open(path, "wb") as fh:
        fh.write(("\n".join(lines) + "\n").encode("ascii"))
        for a in arrays:
            fh.write(np.ascontiguousarray(a, dtype=_F8).tobytes())


def load_archive(path) -> Archive:
    data = Path(path).read_bytes()
    marker = b"\nend\n"
    cut = data.find(marker)
    if cut < 0:
        raise ArchiveError(f"{path}: header terminator not found")
    header = data[:cut].decode("ascii").splitlines()
    body = data[cut + len(marker):]
    if not header or header[0].split() != [MAGIC, str(VERSION)]:
        raise ArchiveError(f"{path}: not a version {VERSION} mode archive")
    kind = "field"
    node_shape: list[int] = []
    axes_spec: list[tuple[str, int]] = []
    n_modes = None
    has_lift = None
    for line in header[1:]:
        key, *vals = line.split()
        if key == "kind":
            kind = vals[0]
        elif key == "grid":
            node_shape = [int(v) for v in vals]
        elif key == "axis":
            axes_spec.append((vals[0], int(vals[1])))
        elif key == "modes":
            n_modes = int(vals[0])
        elif key == "lift":
            has_lift = bool(int(vals[0]))
        else:
            raise ArchiveError(f"{path}: unknown header key {key!r}")
    if not node_shape or n_modes is None or has_lift is None:
        raise ArchiveError(f"{path}: incomplete header")

    flat = np.frombuffer(body, dtype=_F8)
    pos = 0

    def take(n: int) -> np.ndarray:
        nonlocal pos
        if pos + n > flat.size:
            raise ArchiveError(f"{path}: truncated data block")
        out = flat[pos:pos + n].copy()
        pos += n
        return out

    grid = build_grid([take(n) for n in node_shape])
    axes = tuple(ParameterAxis(take(n), name) for name, n in axes_spec)
    lift = take(grid.n_nodes) if has_lift else None
    modes = []
    for _ in range(n_modes):
        spatial = take(grid.n_nodes)
        factors = tuple(take(ax.size) for ax in axes)
        modes.append(Mode(spatial, factors))
    if pos != flat.size:
        raise ArchiveError(f"{path}: {flat.size - pos} trailing values")
    return Archive(grid, SeparatedSolution(axes, modes, lift, grid.n_nodes), kind)

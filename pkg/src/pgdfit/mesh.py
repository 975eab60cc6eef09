"""Tensor-product grids and the nodal FIT div-grad operator.

Nodes, edges and cells are numbered lexicographically with x fastest.
Edges are grouped by direction: all x-edges first, then y-edges, then
z-edges.  Materials live on cells and are averaged onto primal edges.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .linalg import ContractViolation, SingularSystem, SparseMatrix

AXIS_NAMES = ("x", "y", "z")


class InvalidGrid(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TensorGrid:
    axes: tuple[np.ndarray, ...]
    # derived
    node_shape: tuple[int, ...] = field(init=False)
    cell_shape: tuple[int, ...] = field(init=False)
    widths: tuple[np.ndarray, ...] = field(init=False, repr=False)
    edge_offsets: tuple[int, ...] = field(init=False, repr=False)

    def __post_init__(self):
        axes = []
        for a in self.axes:
            arr = np.array(a, dtype=float)
            arr.setflags(write=False)
            axes.append(arr)
        object.__setattr__(self, "axes", tuple(axes))
        object.__setattr__(self, "node_shape", tuple(a.size for a in axes))
        object.__setattr__(self, "cell_shape", tuple(a.size - 1 for a in axes))
        object.__setattr__(self, "widths", tuple(np.diff(a) for a in axes))
        offsets = [0]
        for d in range(self.dim):
            offsets.append(offsets[-1] + self.n_edges_along(d))
        object.__setattr__(self, "edge_offsets", tuple(offsets))

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.node_shape))

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.cell_shape))

    def edge_shape(self, d: int) -> tuple[int, ...]:
        return tuple(n - 1 if a == d else n for a, n in enumerate(self.node_shape))

    def n_edges_along(self, d: int) -> int:
        return int(np.prod(self.edge_shape(d)))

    @property
    def n_edges(self) -> int:
        return self.edge_offsets[-1]

    def node_index(self, *ijk: int) -> int:
        return int(np.ravel_multi_index(ijk, self.node_shape, order="F"))

    def node_coordinates(self) -> np.ndarray:
        """Array of shape (n_nodes, dim)."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel(order="F") for m in mesh], axis=1)

    def cell_centers(self) -> np.ndarray:
        mids = [0.5 * (a[1:] + a[:-1]) for a in self.axes]
        mesh = np.meshgrid(*mids, indexing="ij")
        return np.stack([m.ravel(order="F") for m in mesh], axis=1)

    def cell_volumes(self) -> np.ndarray:
        return _outer(self.widths).ravel(order="F")

    def dual_volumes(self) -> np.ndarray:
        """Volume of the dual cell around each node."""
        halves = [_dual_lengths(w) for w in self.widths]
        return _outer(halves).ravel(order="F")

    def edge_lengths(self) -> np.ndarray:
        parts = []
        for d in range(self.dim):
            shape = self.edge_shape(d)
            parts.append(np.broadcast_to(_along(self.widths[d], d, self.dim), shape).ravel(order="F"))
        return np.concatenate(parts)

    def dual_areas(self) -> np.ndarray:
        """Area of the dual facet crossed by each primal edge (1 in 1D)."""
        parts = []
        for d in range(self.dim):
            factors = [
                np.ones(1) if b == d else _dual_lengths(self.widths[b]) for b in range(self.dim)
            ]
            parts.append(
                np.broadcast_to(_outer(factors), self.edge_shape(d)).ravel(order="F")
            )
        return np.concatenate(parts)

    def edge_nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """Start and end node of every edge (end is one step along the edge axis)."""
        starts, ends = [], []
        ids = np.arange(self.n_nodes).reshape(self.node_shape, order="F")
        for d in range(self.dim):
            lo = [slice(None)] * self.dim
            hi = [slice(None)] * self.dim
            lo[d] = slice(0, -1)
            hi[d] = slice(1, None)
            starts.append(ids[tuple(lo)].ravel(order="F"))
            ends.append(ids[tuple(hi)].ravel(order="F"))
        return np.concatenate(starts), np.concatenate(ends)

    def gradient(self) -> SparseMatrix:
        """Primal incidence matrix G (n_edges x n_nodes), -1 at start, +1 at end."""
        s, e = self.edge_nodes()
        rows = np.concatenate([np.arange(self.n_edges)] * 2)
        cols = np.concatenate([s, e])
        vals = np.concatenate([-np.ones(self.n_edges), np.ones(self.n_edges)])
        return SparseMatrix.from_triplets(rows, cols, vals, (self.n_edges, self.n_nodes))

    def boundary_nodes(self, axis: int, side: str) -> np.ndarray:
        ids = np.arange(self.n_nodes).reshape(self.node_shape, order="F")
        sl = [slice(None)] * self.dim
        sl[axis] = 0 if side == "min" else -1
        return np.sort(ids[tuple(sl)].ravel())

    def nodes_in_box(self, box: Sequence[tuple[float, float]], tol: float = 1e-12) -> np.ndarray:
        xyz = self.node_coordinates()
        mask = np.ones(self.n_nodes, dtype=bool)
        for d, (lo, hi) in enumerate(box):
            mask &= (xyz[:, d] >= lo - tol) & (xyz[:, d] <= hi + tol)
        return np.flatnonzero(mask)

    def cells_in_box(self, box: Sequence[tuple[float, float]]) -> np.ndarray:
        """Boolean mask of cells whose center lies inside ``box``."""
        c = self.cell_centers()
        mask = np.ones(self.n_cells, dtype=bool)
        for d, (lo, hi) in enumerate(box):
            mask &= (c[:, d] >= lo) & (c[:, d] <= hi)
        return mask

    def l2_norm(self, u) -> float:
        """Discrete L2 norm of a nodal vector, weighted by dual volumes."""
        u = np.asarray(u, dtype=float)
        return float(np.sqrt(np.dot(self.dual_volumes(), u * u)))


def _outer(factors: Sequence[np.ndarray]) -> np.ndarray:
    out = np.asarray(factors[0], dtype=float)
    for f in factors[1:]:
        out = np.multiply.outer(out, f)
    return out


def _along(v: np.ndarray, d: int, dim: int) -> np.ndarray:
    shape = [1] * dim
    shape[d] = v.size
    return v.reshape(shape)


def _dual_lengths(widths: np.ndarray) -> np.ndarray:
    """Half-cell sums around each node of one axis."""
    out = np.zeros(widths.size + 1)
    out[:-1] += 0.5 * widths
    out[1:] += 0.5 * widths
    return out


def build_grid(axes: Sequence[Sequence[float]]) -> TensorGrid:
    if not 1 <= len(axes) <= 3:
        raise InvalidGrid(f"grid dimension must be 1, 2 or 3, got {len(axes)}")
    for d, a in enumerate(axes):
        arr = np.asarray(a, dtype=float)
        if arr.ndim != 1 or arr.size < 2:
            raise InvalidGrid(f"axis {AXIS_NAMES[d]} needs at least 2 points")
        if not np.all(np.isfinite(arr)) or np.any(np.diff(arr) <= 0):
            raise InvalidGrid(f"axis {AXIS_NAMES[d]} is not strictly increasing")
    return TensorGrid(tuple(axes))


def uniform_grid(bounds: Sequence[tuple[float, float]], cells: Sequence[int]) -> TensorGrid:
    return build_grid([np.linspace(lo, hi, n + 1) for (lo, hi), n in zip(bounds, cells)])


@dataclass(frozen=True, eq=False)
class BoundaryCondition:
    """Dirichlet values on a node subset; all other boundary is homogeneous Neumann."""

    nodes: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=np.int64)
        values = np.broadcast_to(np.asarray(self.values, dtype=float), nodes.shape).copy()
        order = np.argsort(nodes, kind="stable")
        nodes, values = nodes[order], values[order]
        if nodes.size and np.any(np.diff(nodes) == 0):
            raise ContractViolation("duplicate Dirichlet nodes")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_faces(cls, grid: TensorGrid, faces: Mapping[tuple[int, str], float]) -> "BoundaryCondition":
        """``faces`` maps (axis, "min"|"max") to a prescribed value.

        Where faces meet, the later entry wins.
        """
        assigned: dict[int, float] = {}
        for (axis, side), value in faces.items():
            for n in grid.boundary_nodes(axis, side):
                assigned[int(n)] = float(value)
        nodes = np.array(sorted(assigned), dtype=np.int64)
        return cls(nodes, np.array([assigned[n] for n in nodes.tolist()]))

    def full_vector(self, n_nodes: int) -> np.ndarray:
        """Dirichlet values at Dirichlet nodes, zero elsewhere."""
        v = np.zeros(n_nodes)
        v[self.nodes] = self.values
        return v

    def free_nodes(self, n_nodes: int) -> np.ndarray:
        mask = np.ones(n_nodes, dtype=bool)
        mask[self.nodes] = False
        return np.flatnonzero(mask)

    def homogeneous(self) -> "BoundaryCondition":
        return BoundaryCondition(self.nodes, np.zeros_like(self.values))


def check_cell_field(grid: TensorGrid, material) -> np.ndarray:
    m = np.asarray(material, dtype=float)
    if m.shape != (grid.n_cells,):
        raise ContractViolation(f"cell field has shape {m.shape}, grid has {grid.n_cells} cells")
    if np.any(m < 0) or not np.all(np.isfinite(m)):
        raise ContractViolation("cell field values must be finite and non-negative")
    return m


def edge_material(grid: TensorGrid, material, averaging: str = "arithmetic") -> np.ndarray:
    """Edge conductances: averaged cell material times dual area over edge length.

    Each cell adjacent to an edge owns the part of the dual facet lying
    inside it.  ``arithmetic`` weights cell values by those parts;
    ``harmonic`` takes the part-weighted harmonic mean.
    """
    m = check_cell_field(grid, material).reshape(grid.cell_shape, order="F")
    if averaging not in ("arithmetic", "harmonic"):
        raise ContractViolation(f"unknown averaging rule {averaging!r}")
    parts = []
    for d in range(grid.dim):
        # weight of each cell's share of the dual facet
        share = _outer(
            [np.ones(grid.cell_shape[d]) if b == d else 0.5 * grid.widths[b] for b in range(grid.dim)]
        )
        if averaging == "arithmetic":
            num = _spread(m * share, d)
            area = _spread(share, d)
            conduct = num
        else:
            with np.errstate(divide="ignore"):
                inv = np.where(m > 0, share / np.where(m > 0, m, 1.0), np.inf)
            area = _spread(share, d)
            resist = _spread(inv, d)
            conduct = np.where(np.isinf(resist), 0.0, area * area / np.where(np.isinf(resist), 1.0, resist))
        length = _along(grid.widths[d], d, grid.dim)
        parts.append((conduct / length).ravel(order="F"))
    return np.concatenate(parts)


def _spread(cellwise: np.ndarray, d: int) -> np.ndarray:
    """Sum cell contributions onto the edges along axis ``d`` they touch."""
    out = cellwise
    for b in range(out.ndim):
        if b == d:
            continue
        pad = [(0, 0)] * out.ndim
        pad[b] = (1, 1)
        p = np.pad(out, pad)
        lo = [slice(None)] * out.ndim
        hi = [slice(None)] * out.ndim
        lo[b] = slice(0, -1)
        hi[b] = slice(1, None)
        out = p[tuple(lo)] + p[tuple(hi)]
    return out


@dataclass(frozen=True, eq=False)
class Stiffness:
    """Assembled operator with its Dirichlet reduction.

    ``reduced`` acts on ``free`` nodes; ``lifting`` is ``-S[free, dir] @ g``,
    the contribution of the Dirichlet data to the reduced right-hand side.
    """

    full: SparseMatrix
    reduced: SparseMatrix
    lifting: np.ndarray
    free: np.ndarray
    bc: BoundaryCondition

    def expand(self, u_free: np.ndarray) -> np.ndarray:
        u = self.bc.full_vector(self.full.n_rows)
        u[self.free] = u_free
        return u


def stiffness_matrix(grid: TensorGrid, material, averaging: str = "arithmetic") -> SparseMatrix:
    """S = G^T diag(g) G, assembled entry by entry so it is bitwise symmetric."""
    g = edge_material(grid, material, averaging)
    s, e = grid.edge_nodes()
    rows = np.concatenate([s, e, s, e])
    cols = np.concatenate([s, e, e, s])
    vals = np.concatenate([g, g, -g, -g])
    return SparseMatrix.from_triplets(rows, cols, vals, (grid.n_nodes, grid.n_nodes))


def reduce_dirichlet(full: SparseMatrix, bc: BoundaryCondition) -> Stiffness:
    n = full.n_rows
    free = bc.free_nodes(n)
    m = full.to_scipy()
    reduced = SparseMatrix.from_scipy(m[free][:, free])
    lifting = -(m[free][:, bc.nodes] @ bc.values) if bc.nodes.size else np.zeros(free.size)
    return Stiffness(full, reduced, np.asarray(lifting, dtype=float), free, bc)


def check_solvable(grid: TensorGrid, material, bc: BoundaryCondition, averaging: str = "arithmetic") -> None:
    """Every connected set of free nodes must reach a Dirichlet node."""
    g = edge_material(grid, material, averaging)
    s, e = grid.edge_nodes()
    keep = g > 0
    adj = sp.coo_matrix((np.ones(keep.sum()), (s[keep], e[keep])), shape=(grid.n_nodes, grid.n_nodes))
    _, labels = connected_components(adj, directed=False)
    anchored = np.zeros(labels.max() + 1, dtype=bool)
    anchored[labels[bc.nodes]] = True
    free = bc.free_nodes(grid.n_nodes)
    if not np.all(anchored[labels[free]]):
        raise SingularSystem("a region without Dirichlet nodes has no conducting path to one")


def assemble_stiffness(grid: TensorGrid, material, bc: BoundaryCondition, averaging: str = "arithmetic") -> Stiffness:
    check_solvable(grid, material, bc, averaging)
    return reduce_dirichlet(stiffness_matrix(grid, material, averaging), bc)


def joule_rhs(grid: TensorGrid, material, u_i, u_j, averaging: str = "arithmetic") -> np.ndarray:
    """Nodal loss vector for the conductance-weighted product of two potentials.

    Edge power ``p_e = g_e * (G u_i)_e * (G u_j)_e`` is split evenly between
    the two end nodes, so the entries sum to ``u_i^T S u_j``.
    """
    u_i = np.asarray(u_i, dtype=float)
    u_j = np.asarray(u_j, dtype=float)
    if u_i.shape != (grid.n_nodes,) or u_j.shape != (grid.n_nodes,):
        raise ContractViolation("nodal vectors must have one entry per node")
    g = edge_material(grid, material, averaging)
    s, e = grid.edge_nodes()
    du_i = u_i[e] - u_i[s]
    du_j = u_j[e] - u_j[s]
    p = g * (du_i * du_j)
    half = 0.5 * p
    return np.bincount(s, half, grid.n_nodes) + np.bincount(e, half, grid.n_nodes)

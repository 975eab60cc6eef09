"""Separated space x parameter representations.

A parametric factor is a vector of values at the collocation points of a
:class:`ParameterAxis`.  Parametric inner products use the trapezoidal
weights of the axis, so the parametric mass matrix is diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .linalg import ContractViolation


class OutOfRange(ValueError):
    pass


class ZeroMode(ArithmeticError):
    """A mode factor vanished; the enrichment produced nothing new."""


@dataclass(frozen=True, eq=False)
class ParameterAxis:
    points: np.ndarray
    name: str = "mu"
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 1 or not np.all(np.isfinite(pts)):
            raise ContractViolation("axis needs at least one finite point")
        if np.any(np.diff(pts) <= 0):
            raise ContractViolation("axis points must be strictly increasing")
        if pts.size == 1:
            w = np.ones(1)
        else:
            h = np.diff(pts)
            w = np.zeros(pts.size)
            w[:-1] += 0.5 * h
            w[1:] += 0.5 * h
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, lo: float, hi: float, n: int, name: str = "mu") -> "ParameterAxis":
        if n < 2 or not hi > lo:
            raise ContractViolation("uniform axis needs n >= 2 and hi > lo")
        return cls(np.linspace(lo, hi, n), name)

    @property
    def lo(self) -> float:
        return float(self.points[0])

    @property
    def hi(self) -> float:
        return float(self.points[-1])

    @property
    def size(self) -> int:
        return int(self.points.size)

    def norm(self, a) -> float:
        a = np.asarray(a, dtype=float)
        return float(np.sqrt(np.dot(self.weights, a * a)))

    def interpolate(self, values, mu: float) -> float:
        if not self.lo <= mu <= self.hi:
            raise OutOfRange(f"{self.name}={mu} outside [{self.lo}, {self.hi}]")
        return float(np.interp(mu, self.points, values))


def weighted_inner(axis: ParameterAxis, coeff, a, b) -> float:
    """sum_j w_j c_j a_j b_j, symmetric in (a, b) bit for bit."""
    coeff, a, b = (np.asarray(v, dtype=float) for v in (coeff, a, b))
    if not (coeff.shape == a.shape == b.shape == axis.weights.shape):
        raise ContractViolation("weighted_inner: lengths differ from the axis")
    return float(np.dot(axis.weights * coeff, a * b))


@dataclass(frozen=True, eq=False)
class SeparatedTerm:
    """One rank-one term: a spatial array times one factor per parameter axis."""

    spatial: np.ndarray
    factors: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "spatial", np.asarray(self.spatial, dtype=float))
        object.__setattr__(self, "factors", tuple(np.asarray(f, dtype=float) for f in self.factors))


def _check_factors(terms: Sequence[SeparatedTerm], axes: Sequence[ParameterAxis]) -> None:
    for t in terms:
        if len(t.factors) != len(axes):
            raise ContractViolation("every term needs one factor per parameter axis")
        for f, ax in zip(t.factors, axes):
            if f.shape != (ax.size,):
                raise ContractViolation(f"factor length {f.shape} does not match axis {ax.name}")


def _index_product(factors: Sequence[np.ndarray], index: Sequence[int]) -> float:
    out = 1.0
    for f, j in zip(factors, index):
        out *= f[j]
    return out


def _interp_product(factors, axes, mu) -> float:
    out = 1.0
    for f, ax, m in zip(factors, axes, mu):
        out *= ax.interpolate(f, m)
    return out


def _check_mu(axes, mu) -> None:
    if len(mu) != len(axes):
        raise ContractViolation(f"expected {len(axes)} parameter values, got {len(mu)}")
    for ax, m in zip(axes, mu):
        if not ax.lo <= m <= ax.hi:
            raise OutOfRange(f"{ax.name}={m} outside [{ax.lo}, {ax.hi}]")


@dataclass(frozen=True, eq=False)
class SeparatedCoefficient:
    """Material coefficient sum_q spatial_q(x) * prod_p factor_{q,p}(mu_p) on cells."""

    terms: tuple[SeparatedTerm, ...]
    axes: tuple[ParameterAxis, ...]

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        object.__setattr__(self, "axes", tuple(self.axes))
        if not self.terms:
            raise ContractViolation("a coefficient needs at least one term")
        _check_factors(self.terms, self.axes)
        n = self.terms[0].spatial.shape
        if any(t.spatial.shape != n for t in self.terms):
            raise ContractViolation("spatial factors differ in length")
        if any(np.any(t.spatial < 0) for t in self.terms):
            raise ContractViolation("spatial factors must be non-negative")

    @property
    def n_terms(self) -> int:
        return len(self.terms)

    def at_index(self, index: Sequence[int]) -> np.ndarray:
        out = np.zeros_like(self.terms[0].spatial)
        for t in self.terms:
            out = out + t.spatial * _index_product(t.factors, index)
        return out

    def at(self, mu: Sequence[float]) -> np.ndarray:
        _check_mu(self.axes, mu)
        out = np.zeros_like(self.terms[0].spatial)
        for t in self.terms:
            out = out + t.spatial * _interp_product(t.factors, self.axes, mu)
        return out

    def mean(self) -> np.ndarray:
        """Coefficient averaged over the parameter box."""
        out = np.zeros_like(self.terms[0].spatial)
        for t in self.terms:
            c = 1.0
            for f, ax in zip(t.factors, self.axes):
                c *= np.dot(ax.weights, f) / ax.weights.sum()
            out = out + c * t.spatial
        return out

    def min_value(self) -> float:
        """Smallest reconstructed value over all cells and collocation tuples."""
        full = np.zeros((self.terms[0].spatial.size,) + tuple(ax.size for ax in self.axes))
        for t in self.terms:
            prod = t.spatial
            for f in t.factors:
                prod = np.multiply.outer(prod, f)
            full += prod
        return float(full.min())


@dataclass(frozen=True, eq=False)
class Mode:
    spatial: np.ndarray
    factors: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "spatial", np.asarray(self.spatial, dtype=float))
        object.__setattr__(self, "factors", tuple(np.asarray(f, dtype=float) for f in self.factors))


SpatialNorm = Callable[[np.ndarray], float]


def mode_magnitude(mode: Mode, axes: Sequence[ParameterAxis], spatial_norm: SpatialNorm) -> float:
    out = spatial_norm(mode.spatial)
    for f, ax in zip(mode.factors, axes):
        out *= ax.norm(f)
    return out


def normalize_mode(mode: Mode, axes: Sequence[ParameterAxis], spatial_norm: SpatialNorm) -> tuple[Mode, float]:
    """Rescale parametric factors to unit norm; the spatial factor absorbs the scale."""
    scale = 1.0
    factors = []
    for f, ax in zip(mode.factors, axes):
        n = ax.norm(f)
        if n == 0.0 or not np.isfinite(n):
            raise ZeroMode(f"parametric factor along {ax.name} has zero norm")
        factors.append(f / n)
        scale *= n
    spatial = mode.spatial * scale
    out = Mode(spatial, tuple(factors))
    return out, spatial_norm(spatial)


@dataclass(eq=False)
class SeparatedSolution:
    """lift(x) + sum_s spatial_s(x) prod_p factor_{s,p}(mu_p) on grid nodes."""

    axes: tuple[ParameterAxis, ...]
    modes: list[Mode] = field(default_factory=list)
    lift: np.ndarray | None = None
    n_nodes: int | None = None

    def __post_init__(self):
        self.axes = tuple(self.axes)
        if self.n_nodes is None:
            if self.lift is not None:
                self.n_nodes = int(np.asarray(self.lift).size)
            elif self.modes:
                self.n_nodes = int(self.modes[0].spatial.size)
        _check_factors(self.modes, self.axes)

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    def truncated(self, m: int) -> "SeparatedSolution":
        return SeparatedSolution(self.axes, list(self.modes[:m]), self.lift, self.n_nodes)

    def _base(self) -> np.ndarray:
        if self.lift is not None:
            return np.array(self.lift, dtype=float)
        if self.n_nodes is None:
            raise ContractViolation("empty solution without lift has unknown size")
        return np.zeros(self.n_nodes)

    def evaluate(self, mu: Sequence[float]) -> np.ndarray:
        _check_mu(self.axes, mu)
        out = self._base()
        for mode in self.modes:
            out = out + mode.spatial * _interp_product(mode.factors, self.axes, mu)
        return out

    def evaluate_index(self, index: Sequence[int]) -> np.ndarray:
        out = self._base()
        for mode in self.modes:
            out = out + mode.spatial * _index_product(mode.factors, index)
        return out

    def all_modes(self) -> list[Mode]:
        """Modes with the lift prepended as a mode whose factors are all ones."""
        out = []
        if self.lift is not None:
            out.append(Mode(self.lift, tuple(np.ones(ax.size) for ax in self.axes)))
        return out + list(self.modes)

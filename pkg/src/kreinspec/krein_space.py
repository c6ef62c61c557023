"""The Krein space L2(r) + C^2 (inner matrix Delta), its Hilbert majorant and symmetry J."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import Grid


class KreinSpaceError(Exception):
    """Base class for Krein space failures."""


class GridMismatch(KreinSpaceError):
    """Two elements live on different grids."""


@dataclass(frozen=True, eq=False)
class SpaceElement:
    """A pair (function sampled on ``grid.nodes``; vector in C^2)."""

    grid: Grid
    fun: np.ndarray
    vec: np.ndarray

    def __post_init__(self):
        fun = np.asarray(self.fun, complex)
        vec = np.asarray(self.vec, complex).reshape(2)
        if fun.shape != self.grid.nodes.shape:
            raise GridMismatch(f"function has {fun.size} samples, grid has {self.grid.size} nodes")
        object.__setattr__(self, "fun", fun)
        object.__setattr__(self, "vec", vec)

    @classmethod
    def from_callable(cls, grid: Grid, f, vec=(0.0, 0.0)) -> "SpaceElement":
        return cls(grid, np.asarray(f(grid.nodes), complex) * np.ones(grid.size), vec)

    @classmethod
    def zero(cls, grid: Grid) -> "SpaceElement":
        return cls(grid, np.zeros(grid.size), np.zeros(2))

    def __add__(self, other: "SpaceElement") -> "SpaceElement":
        _same_grid(self, other)
        return SpaceElement(self.grid, self.fun + other.fun, self.vec + other.vec)

    def __sub__(self, other: "SpaceElement") -> "SpaceElement":
        _same_grid(self, other)
        return SpaceElement(self.grid, self.fun - other.fun, self.vec - other.vec)

    def __mul__(self, c: complex) -> "SpaceElement":
        return SpaceElement(self.grid, c * self.fun, c * self.vec)

    __rmul__ = __mul__

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.fun, self.vec])


def _same_grid(x: SpaceElement, y: SpaceElement) -> None:
    if x.grid is y.grid:
        return
    if x.grid.size != y.grid.size or not np.array_equal(x.grid.nodes, y.grid.nodes):
        raise GridMismatch("elements are sampled on different grids")


def _r_samples(grid: Grid, problem) -> np.ndarray:
    return np.asarray(problem.r.evaluate(grid.nodes), float)


def inner_krein(x: SpaceElement, y: SpaceElement, problem) -> complex:
    """[x, y] = int f conj(g) r + v^* Delta u  for x = (f; u), y = (g; v)."""
    _same_grid(x, y)
    r = _r_samples(x.grid, problem)
    fun_part = np.dot(x.grid.weights, x.fun * np.conj(y.fun) * r)
    vec_part = np.conj(y.vec) @ problem.delta_info.delta @ x.vec
    return complex(fun_part + vec_part)


def inner_hilbert(x: SpaceElement, y: SpaceElement, problem) -> complex:
    """<x, y> = int f conj(g) |r| + v^* |Delta| u."""
    _same_grid(x, y)
    r = np.abs(_r_samples(x.grid, problem))
    fun_part = np.dot(x.grid.weights, x.fun * np.conj(y.fun) * r)
    vec_part = np.conj(y.vec) @ problem.delta_info.abs_delta @ x.vec
    return complex(fun_part + vec_part)


def hilbert_norm(x: SpaceElement, problem) -> float:
    return float(np.sqrt(max(inner_hilbert(x, x, problem).real, 0.0)))


def sign_profile(grid: Grid) -> np.ndarray:
    # sgn r equals sgn x under the standing sign assumption; x = 0 is never a node
    return np.sign(grid.nodes)


def apply_J(x: SpaceElement, problem) -> SpaceElement:
    """(f; u) -> (f sgn r; sgn(Delta) u)."""
    return SpaceElement(x.grid, x.fun * sign_profile(x.grid), problem.delta_info.sign_delta @ x.vec)


def gram_weights(grid: Grid, problem, kind: str = "krein") -> tuple[np.ndarray, np.ndarray]:
    """Diagonal function weights and the 2x2 block for batched inner products.

    ``stacked(x)^* diag(w, B) stacked(y)`` conjugated appropriately gives the
    chosen inner product; used by the Gram assembly.
    """
    r = _r_samples(grid, problem)
    if kind == "krein":
        return grid.weights * r, problem.delta_info.delta
    if kind == "hilbert":
        return grid.weights * np.abs(r), problem.delta_info.abs_delta
    raise ValueError(f"unknown inner product kind {kind!r}")

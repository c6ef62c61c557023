"""Problem record: coefficients p, q, r plus boundary matrices M, N."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from typing import Optional

import numpy as np

from .boundary_algebra import (Classification, DeltaInfo, InvalidBoundaryData, classify,
                               compute_delta, validate_boundary_data)
from .coefficients import CoefficientDescriptor, InvalidDescriptor
from .numerics import DEFAULT_TOL, Grid, LinearSystem, Tolerances


class ProblemError(Exception):
    """Problem file or record is malformed; ``location`` names the offending key."""

    def __init__(self, message: str, location: str = ""):
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location


TOP_KEYS = {"name", "p", "q", "r", "M", "N", "tolerances", "grid"}
GRID_KEYS = {"n_panels", "order"}


def _complex_matrix(data, where: str) -> np.ndarray:
    try:
        arr = np.asarray(data, float)
    except (TypeError, ValueError) as exc:
        raise ProblemError(f"expected 2x4 array of [re, im] pairs ({exc})", where) from None
    if arr.shape != (2, 4, 2):
        raise ProblemError(f"expected 2x4 array of [re, im] pairs, got shape {arr.shape}", where)
    return arr[..., 0] + 1j * arr[..., 1]


def _matrix_to_pairs(A: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in A]


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    name: str
    p: CoefficientDescriptor
    q: CoefficientDescriptor
    r: CoefficientDescriptor
    M: np.ndarray
    N: np.ndarray
    tol: Tolerances = DEFAULT_TOL
    n_panels: int = 128
    order: int = 16

    @classmethod
    def from_dict(cls, data: dict) -> "ProblemSpec":
        if not isinstance(data, dict):
            raise ProblemError("top level must be an object")
        unknown = set(data) - TOP_KEYS
        if unknown:
            raise ProblemError(f"unknown keys {sorted(unknown)}", "<root>")
        for key in ("p", "q", "r", "M", "N"):
            if key not in data:
                raise ProblemError("missing required key", key)
        coefs = {}
        for key in ("p", "q", "r"):
            try:
                coefs[key] = CoefficientDescriptor.from_dict(data[key], key)
                coefs[key].validate()
            except InvalidDescriptor as exc:
                raise ProblemError(str(exc), key) from None
            except (KeyError, TypeError, ValueError) as exc:
                raise ProblemError(f"malformed descriptor ({exc})", key) from None
        tol_data = data.get("tolerances", {}) or {}
        try:
            tol = Tolerances(**tol_data)
        except (TypeError, ValueError) as exc:
            raise ProblemError(str(exc), "tolerances") from None
        grid = data.get("grid", {}) or {}
        if set(grid) - GRID_KEYS:
            raise ProblemError(f"unknown keys {sorted(set(grid) - GRID_KEYS)}", "grid")
        M = _complex_matrix(data["M"], "M")
        N = _complex_matrix(data["N"], "N")
        rep = validate_boundary_data(M, N)
        if not rep.passed:
            raise ProblemError("; ".join(rep.failures()), "M/N")
        return cls(str(data.get("name", "unnamed")), coefs["p"], coefs["q"], coefs["r"], M, N, tol,
                   int(grid.get("n_panels", 128)), int(grid.get("order", 16)))

    def to_dict(self) -> dict:
        return {"name": self.name, "p": self.p.to_dict(), "q": self.q.to_dict(), "r": self.r.to_dict(),
                "M": _matrix_to_pairs(self.M), "N": _matrix_to_pairs(self.N),
                "tolerances": self.tol.to_dict(),
                "grid": {"n_panels": self.n_panels, "order": self.order}}

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def replace(self, **changes) -> "ProblemSpec":
        fields = dict(name=self.name, p=self.p, q=self.q, r=self.r, M=self.M, N=self.N,
                      tol=self.tol, n_panels=self.n_panels, order=self.order)
        fields.update(changes)
        return ProblemSpec(**fields)

    # derived data -------------------------------------------------------------
    @cached_property
    def delta_info(self) -> DeltaInfo:
        return compute_delta(self.M, self.N)

    @cached_property
    def classification(self) -> Classification:
        return classify(self.M, self.N)

    @cached_property
    def breaks(self) -> np.ndarray:
        pts = set()
        for c in (self.p, self.q, self.r):
            pts |= set(c.breakpoints.tolist())
        pts |= {-1.0, 0.0, 1.0}
        return np.array(sorted(pts))

    @cached_property
    def packed(self) -> tuple:
        return self.p.pack(), self.q.pack(), self.r.pack()

    def system(self, lam: complex = 0.0, depth: int = 0) -> LinearSystem:
        P, Qc, R = self.packed
        return LinearSystem(P, Qc, R, complex(lam), self.breaks, depth)

    @cached_property
    def r_norm1(self) -> float:
        return self.r.norm1()

    def grid(self, n_panels: Optional[int] = None, order: Optional[int] = None, extra=()) -> Grid:
        extra = list(extra) + [b for b in self.breaks.tolist()]
        return Grid.uniform(n_panels or self.n_panels, order or self.order, extra)


def load_problem(path) -> ProblemSpec:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ProblemError(f"syntax error: {exc.msg} at line {exc.lineno} column {exc.colno}",
                               str(path)) from None
    return ProblemSpec.from_dict(data)


SHIPPED = ("example_p0", "example_p1", "example_p2", "example_p0_amended")


def shipped_problem(name: str) -> ProblemSpec:
    """One of the bundled problem files by name."""
    if name not in SHIPPED:
        raise ProblemError(f"unknown shipped problem {name!r}; choose from {SHIPPED}")
    ref = resources.files("kreinspec") / "problems" / f"{name}.json"
    with ref.open(encoding="utf-8") as fh:
        return ProblemSpec.from_dict(json.load(fh))

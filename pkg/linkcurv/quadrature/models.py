"""Quadrature results and convergence tables."""

from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from linkcurv.config.settings import QuadSettings

Integrand = Callable[[np.ndarray], np.ndarray]
# (lo, hi) corners of cells, each (K, dim) -> bool mask of cells that may contribute
Screen = Callable[[np.ndarray, np.ndarray], np.ndarray]

# Relative tolerance of the final row against its reference.
FINAL_REL_TOL = 0.05
FINAL_ABS_TOL = 1e-4

__all__ = [
    "FINAL_ABS_TOL",
    "FINAL_REL_TOL",
    "ConvergenceRow",
    "ConvergenceTable",
    "Integrand",
    "QuadResult",
    "QuadSettings",
    "Screen",
]


@dataclass(frozen=True, eq=False)
class QuadResult:
    value: float | np.ndarray
    error: float
    converged: bool
    evaluations: int
    levels: int
    method: str


@dataclass(frozen=True)
class ConvergenceRow:
    kappa: float
    term: str
    value: complex | None
    error: float | None
    reference: complex | None = None
    abs_error: float | None = None
    failure: str | None = None


@dataclass(frozen=True)
class ConvergenceTable:
    rows: tuple[ConvergenceRow, ...] = field(default_factory=tuple)
    tail_monotone: bool = True
    final_within_tol: bool = True

    def term(self, name: str) -> list[ConvergenceRow]:
        return [row for row in self.rows if row.term == name]

    def terms(self) -> list[str]:
        seen: dict[str, None] = {}
        for row in self.rows:
            seen.setdefault(row.term, None)
        return list(seen)

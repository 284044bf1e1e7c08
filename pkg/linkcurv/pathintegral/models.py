"""Scenes and operator values."""

from dataclasses import dataclass
from typing import Literal

import numpy as np

from linkcurv.geometry.models import Hyperlink, Surface
from linkcurv.liealg.models import AlgebraElement

Sign = Literal[1, -1]
TermCMethod = Literal["nested", "qmc"]

TERM_C_METHODS: tuple[str, ...] = ("nested", "qmc")

# Row names of a convergence study, in table order.
STUDY_TERMS: tuple[str, ...] = (
    "A",
    "B",
    "C",
    "total",
    "lk_axis0",
    "lk_axis1",
    "lk_axis2",
    "lk_axis3",
)


@dataclass(frozen=True, eq=False)
class Scene:
    """Matter and geometric hyperlinks, an optional surface and the charge q."""

    matter: Hyperlink
    geometric: Hyperlink
    surface: Surface | None
    charge: float
    name: str = "scene"

    @property
    def has_surface(self) -> bool:
        return self.surface is not None and len(self.surface.patches) > 0


@dataclass(frozen=True, eq=False)
class OperatorValue:
    """coefficient (x) algebra; algebra None stands for the scalar identity."""

    coefficient: complex
    algebra: AlgebraElement | None

    def as_vector(self) -> np.ndarray | complex:
        if self.algebra is None:
            return complex(self.coefficient)
        return complex(self.coefficient) * self.algebra.as_vector()


@dataclass(frozen=True, eq=False)
class LoopSurfaceIntegrals:
    """a_j for the axis-j kernels and b for the time kernel, at one kappa."""

    kappa: float
    a: np.ndarray
    b: float
    error: float

    @property
    def a_sum(self) -> float:
        return float(np.sum(self.a))

"""Connection fields and curvature components."""

from collections.abc import Callable, Mapping
from dataclasses import dataclass, field

import numpy as np

from linkcurv.core.exceptions import AppValidationError, DegenerateIndexError
from linkcurv.liealg.models import AlgebraElement

ScalarField = Callable[[np.ndarray], np.ndarray]
Slot = tuple[int, int, int]

# Step of the central differences used when no gradient is supplied.
FD_STEP = 1e-5


@dataclass(frozen=True, eq=False)
class GaussianPolynomial:
    """P(x) exp(-width |x - center|^2) with P = sum_t coef_t x0^e0 x1^e1 x2^e2 x3^e3.

    ``terms`` rows are (coef, e0, e1, e2, e3).
    """

    terms: np.ndarray
    width: float = 0.0
    center: np.ndarray = field(default_factory=lambda: np.zeros(4))

    def __post_init__(self):
        terms = np.array(self.terms, dtype=float).reshape(-1, 5)
        exps = terms[:, 1:]
        if np.any(exps < 0) or np.any(exps != np.round(exps)):
            raise AppValidationError("Monomial exponents must be non-negative integers")
        if not (np.isfinite(self.width) and self.width >= 0):
            raise AppValidationError(f"Gaussian width must be >= 0, got {self.width}")
        center = np.array(self.center, dtype=float).reshape(4)
        terms.setflags(write=False)
        center.setflags(write=False)
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "center", center)

    def _parts(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        coef, exps = self.terms[:, 0], self.terms[:, 1:].astype(int)
        powers = x[:, None, :] ** exps[None, :, :]
        poly = np.einsum("t,nt->n", coef, np.prod(powers, axis=-1))
        dpoly = np.zeros_like(x)
        for a in range(4):
            lowered = exps.copy()
            lowered[:, a] = np.maximum(exps[:, a] - 1, 0)
            dpow = x[:, None, :] ** lowered[None, :, :]
            dpoly[:, a] = np.einsum("t,nt->n", coef * exps[:, a], np.prod(dpow, axis=-1))
        diff = x - self.center
        envelope = np.exp(-self.width * np.sum(diff**2, axis=1))
        return poly, dpoly, envelope

    def __call__(self, x: np.ndarray) -> np.ndarray:
        poly, _, envelope = self._parts(np.atleast_2d(x))
        return poly * envelope

    def gradient(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        poly, dpoly, envelope = self._parts(x)
        dgauss = -2.0 * self.width * (x - self.center)
        return (dpoly + poly[:, None] * dgauss) * envelope[:, None]


@dataclass(frozen=True, eq=False)
class CallableComponent:
    """A user-supplied scalar field with an optional exact gradient."""

    func: ScalarField
    grad: Callable[[np.ndarray], np.ndarray] | None = None

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.func(np.atleast_2d(x)), dtype=float)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        if self.grad is not None:
            return np.asarray(self.grad(x), dtype=float)
        # central differences with one Richardson step
        out = np.empty_like(x, dtype=float)
        for a in range(4):
            step = np.zeros(4)
            step[a] = FD_STEP
            coarse = (self(x + step) - self(x - step)) / (2 * FD_STEP)
            fine = (self(x + step / 2) - self(x - step / 2)) / FD_STEP
            out[:, a] = (4.0 * fine - coarse) / 3.0
        return out


Component = GaussianPolynomial | CallableComponent


def _check_slot(i: int, alpha: int, beta: int) -> None:
    if i not in (1, 2, 3):
        raise AppValidationError(f"Connection form index must be 1..3, got {i}")
    if alpha == beta:
        raise DegenerateIndexError(f"A^{i}_{{{alpha}{beta}}} has equal algebra indices")
    if not (0 <= alpha <= 3 and 0 <= beta <= 3):
        raise DegenerateIndexError(f"Algebra indices must lie in 0..3, got ({alpha}, {beta})")


@dataclass(frozen=True, eq=False)
class ConnectionField:
    """omega = A^i_{ab} dx_i (x) E^{ab}; components keyed by (i, a, b) with a < b."""

    components: Mapping[Slot, Component]

    def __post_init__(self):
        normalized: dict[Slot, Component] = {}
        for (i, alpha, beta), comp in self.components.items():
            _check_slot(i, alpha, beta)
            if alpha > beta:
                raise AppValidationError(
                    f"A^{i}_{{{alpha}{beta}}}: store the slot with ascending indices "
                    "and the sign flipped"
                )
            normalized[(i, alpha, beta)] = comp
        object.__setattr__(self, "components", normalized)

    @classmethod
    def zero(cls) -> "ConnectionField":
        return cls({})

    def component(self, i: int, alpha: int, beta: int) -> Component | None:
        """A^i_{ab} for any ordering; None when the slot is empty."""
        _check_slot(i, alpha, beta)
        lo, hi = min(alpha, beta), max(alpha, beta)
        comp = self.components.get((i, lo, hi))
        if comp is None or alpha < beta:
            return comp
        return CallableComponent(lambda x, c=comp: -c(x), lambda x, c=comp: -c.gradient(x))


@dataclass(frozen=True, eq=False)
class CurvatureComponents:
    """R_ab for a, b in 0..3 as a (4, 4, 6) antisymmetric array of algebra vectors."""

    tensor: np.ndarray

    def component(self, a: int, b: int) -> AlgebraElement:
        return AlgebraElement.from_vector(self.tensor[a, b])

    def is_zero(self, atol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.tensor) <= atol))

"""su(2) x su(2) domain types."""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from linkcurv.core.exceptions import InvalidSpinError

# Dimension cap of the dense representation oracle.
MAX_SPIN = Fraction(11, 2)


def parse_spin(value) -> Fraction:
    """Half-integer spin from "1/2", 1, 0.5 or a Fraction."""
    try:
        spin = Fraction(str(value)) if isinstance(value, str) else Fraction(value)
    except (ValueError, ZeroDivisionError, TypeError):
        raise InvalidSpinError(f"Invalid spin: {value!r}") from None
    if spin < 0 or (2 * spin).denominator != 1:
        raise InvalidSpinError(f"Spin must be a non-negative half-integer, got {value!r}")
    if spin > MAX_SPIN:
        raise InvalidSpinError(f"Spin {spin} exceeds the supported maximum {MAX_SPIN}")
    return spin


def format_spin(spin: Fraction) -> str:
    return str(spin)


@dataclass(frozen=True)
class IrrepSpec:
    """Irreducible representation (rho+, rho-) labelled by two spins."""

    j_plus: Fraction
    j_minus: Fraction

    def __post_init__(self):
        object.__setattr__(self, "j_plus", parse_spin(self.j_plus))
        object.__setattr__(self, "j_minus", parse_spin(self.j_minus))

    def to_strings(self) -> tuple[str, str]:
        return format_spin(self.j_plus), format_spin(self.j_minus)


@dataclass(frozen=True, eq=False)
class AlgebraElement:
    """Element of su(2) x su(2).

    ``plus`` holds the coefficients of E^01, E^02, E^03 and ``minus`` those of
    E^23, E^31, E^12.
    """

    plus: np.ndarray
    minus: np.ndarray

    def __post_init__(self):
        plus = np.array(self.plus, dtype=float).reshape(3)
        minus = np.array(self.minus, dtype=float).reshape(3)
        plus.setflags(write=False)
        minus.setflags(write=False)
        object.__setattr__(self, "plus", plus)
        object.__setattr__(self, "minus", minus)

    @classmethod
    def zero(cls) -> "AlgebraElement":
        return cls(np.zeros(3), np.zeros(3))

    @classmethod
    def from_vector(cls, vec) -> "AlgebraElement":
        vec = np.asarray(vec, dtype=float)
        return cls(vec[:3], vec[3:])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.plus, self.minus])

    def __add__(self, other: "AlgebraElement") -> "AlgebraElement":
        return AlgebraElement(self.plus + other.plus, self.minus + other.minus)

    def __sub__(self, other: "AlgebraElement") -> "AlgebraElement":
        return AlgebraElement(self.plus - other.plus, self.minus - other.minus)

    def __neg__(self) -> "AlgebraElement":
        return AlgebraElement(-self.plus, -self.minus)

    def __mul__(self, scalar: float) -> "AlgebraElement":
        return AlgebraElement(scalar * self.plus, scalar * self.minus)

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        if not isinstance(other, AlgebraElement):
            return NotImplemented
        return bool(
            np.array_equal(self.plus, other.plus) and np.array_equal(self.minus, other.minus)
        )

    def __hash__(self) -> int:
        return hash((self.plus.tobytes(), self.minus.tobytes()))

    def allclose(self, other: "AlgebraElement", atol: float = 1e-12) -> bool:
        return bool(np.allclose(self.as_vector(), other.as_vector(), rtol=0.0, atol=atol))


@dataclass(frozen=True, eq=False)
class RepMatrix:
    entries: np.ndarray

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


F_PLUS = AlgebraElement(np.ones(3), np.zeros(3))
F_MINUS = AlgebraElement(np.zeros(3), np.ones(3))

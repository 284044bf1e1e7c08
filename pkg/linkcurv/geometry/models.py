"""Geometry domain types: points, loops, hyperlinks, surface patches."""

from dataclasses import dataclass, field
from typing import Literal, NamedTuple

import numpy as np

from linkcurv.core.exceptions import AppValidationError
from linkcurv.liealg.models import IrrepSpec

TWO_PI = 2.0 * np.pi

HyperlinkRole = Literal["matter", "geometric"]
PatchBasis = Literal["poly", "trig"]


class Point4(NamedTuple):
    x0: float
    x1: float
    x2: float
    x3: float


class Point3(NamedTuple):
    a: float
    b: float
    c: float


def _frozen(values, shape: tuple[int, ...] | None, what: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if shape is not None and arr.shape != shape:
        raise AppValidationError(f"{what}: expected shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise AppValidationError(f"{what}: coefficients must be finite")
    arr.setflags(write=False)
    return arr


def _check_orientation(orientation: int, what: str) -> None:
    if orientation not in (1, -1):
        raise AppValidationError(f"{what}: orientation must be +1 or -1, got {orientation}")


@dataclass(frozen=True, eq=False)
class Loop:
    """Closed curve x_a(s) = a_0 + sum_n (a_n cos 2 pi n s + b_n sin 2 pi n s).

    ``constant`` has shape (4,); ``cos`` and ``sin`` have shape (4, N) with column n-1
    holding harmonic n. Orientation -1 traverses the same image with s -> 1 - s.
    """

    constant: np.ndarray
    cos: np.ndarray
    sin: np.ndarray
    orientation: int = 1
    name: str = "loop"

    def __post_init__(self):
        cos = np.atleast_2d(np.array(self.cos, dtype=float))
        if cos.ndim != 2 or cos.shape[0] != 4 or cos.shape[1] < 1:
            raise AppValidationError(f"Loop {self.name}: cos must have shape (4, N), N >= 1")
        object.__setattr__(self, "constant", _frozen(self.constant, (4,), f"Loop {self.name}"))
        object.__setattr__(self, "cos", _frozen(cos, cos.shape, f"Loop {self.name}"))
        object.__setattr__(self, "sin", _frozen(self.sin, cos.shape, f"Loop {self.name}"))
        _check_orientation(self.orientation, f"Loop {self.name}")

    @property
    def harmonics(self) -> int:
        return self.cos.shape[1]

    def evaluate(self, s) -> tuple[np.ndarray, np.ndarray]:
        """Points and derivatives, each of shape s.shape + (4,)."""
        s = np.asarray(s, dtype=float)
        n = np.arange(1, self.harmonics + 1, dtype=float)
        # reduce n*s mod 1 so that s = 0 and s = 1 give bit-identical points
        phase = TWO_PI * np.mod(np.multiply.outer(s, n), 1.0)
        c, sn = np.cos(phase), np.sin(phase)
        sin_eff = self.orientation * self.sin
        point = self.constant + c @ self.cos.T + sn @ sin_eff.T
        deriv = TWO_PI * ((-sn * n) @ self.cos.T + (c * n) @ sin_eff.T)
        return point, deriv

    def speed_bounds(self) -> np.ndarray:
        """Per-coordinate bound on |dx_a/ds|."""
        n = np.arange(1, self.harmonics + 1, dtype=float)
        return TWO_PI * (np.abs(self.cos) + np.abs(self.sin)) @ n

    def reversed(self) -> "Loop":
        return Loop(self.constant, self.cos, self.sin, -self.orientation, self.name)

    def shifted(self, c: float) -> "Loop":
        """Same image with parameter origin moved: new(s) = old(s + c)."""
        n = np.arange(1, self.harmonics + 1, dtype=float)
        phi = TWO_PI * np.mod(n * c, 1.0)
        sin_eff = self.orientation * self.sin
        cos_new = self.cos * np.cos(phi) + sin_eff * np.sin(phi)
        sin_new = sin_eff * np.cos(phi) - self.cos * np.sin(phi)
        return Loop(self.constant, cos_new, self.orientation * sin_new, self.orientation, self.name)

    def traversed(self, k: int) -> "Loop":
        """The loop run k times: new(s) = old(k s)."""
        if k < 1:
            raise AppValidationError(f"Loop {self.name}: traversal count must be >= 1")
        cos = np.zeros((4, k * self.harmonics))
        sin = np.zeros((4, k * self.harmonics))
        cos[:, k - 1 :: k] = self.cos
        sin[:, k - 1 :: k] = self.sin
        return Loop(self.constant, cos, sin, self.orientation, self.name)

    def renamed(self, name: str) -> "Loop":
        return Loop(self.constant, self.cos, self.sin, self.orientation, name)


@dataclass(frozen=True, eq=False)
class Hyperlink:
    loops: tuple[Loop, ...]
    role: HyperlinkRole
    colors: tuple[IrrepSpec | None, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "loops", tuple(self.loops))
        colors = tuple(self.colors)
        if self.role == "geometric":
            if any(c is not None for c in colors):
                raise AppValidationError("Geometric hyperlink loops carry no color")
            colors = (None,) * len(self.loops)
        elif not colors:
            colors = (None,) * len(self.loops)
        if len(colors) != len(self.loops):
            raise AppValidationError("One color entry per matter loop is required")
        object.__setattr__(self, "colors", colors)

    def __len__(self) -> int:
        return len(self.loops)


@dataclass(frozen=True, eq=False)
class DiskPatch:
    """sigma(t, tb) = center + radius * t * (cos 2 pi tb * u + sin 2 pi tb * v)."""

    center: np.ndarray
    u: np.ndarray
    v: np.ndarray
    radius: float

    periodic = (False, True)

    def __post_init__(self):
        object.__setattr__(self, "center", _frozen(self.center, (4,), "Disk center"))
        object.__setattr__(self, "u", _frozen(self.u, (4,), "Disk u"))
        object.__setattr__(self, "v", _frozen(self.v, (4,), "Disk v"))
        if not (np.isfinite(self.radius) and self.radius > 0):
            raise AppValidationError(f"Disk radius must be positive, got {self.radius}")
        if np.linalg.matrix_rank(np.stack([self.u, self.v])) < 2:
            raise AppValidationError("Disk spanning vectors must be linearly independent")

    def evaluate(self, t, tb) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        t = np.asarray(t, dtype=float)[..., None]
        phi = TWO_PI * np.asarray(tb, dtype=float)[..., None]
        radial = np.cos(phi) * self.u + np.sin(phi) * self.v
        tangent = -np.sin(phi) * self.u + np.cos(phi) * self.v
        point = self.center + self.radius * t * radial
        return point, self.radius * radial, TWO_PI * self.radius * t * tangent

    def speed_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        r = np.hypot(self.u, self.v)
        return self.radius * r, TWO_PI * self.radius * r


def _poly_basis(x: np.ndarray, size: int) -> tuple[np.ndarray, np.ndarray]:
    m = np.arange(size, dtype=float)
    values = x[..., None] ** m
    derivs = np.zeros_like(values)
    if size > 1:
        derivs[..., 1:] = m[1:] * x[..., None] ** (m[1:] - 1)
    return values, derivs


def _trig_basis(x: np.ndarray, size: int) -> tuple[np.ndarray, np.ndarray]:
    idx = np.arange(size)
    k = (idx + 1) // 2
    phase = TWO_PI * k * x[..., None]
    is_cos = idx % 2 == 1
    values = np.where(is_cos, np.cos(phase), np.sin(phase))
    derivs = TWO_PI * k * np.where(is_cos, -np.sin(phase), np.cos(phase))
    values[..., 0] = 1.0
    derivs[..., 0] = 0.0
    return values, derivs


def _basis_rates(size: int, basis: PatchBasis) -> np.ndarray:
    idx = np.arange(size, dtype=float)
    if basis == "poly":
        return idx
    return TWO_PI * ((idx + 1) // 2)


@dataclass(frozen=True, eq=False)
class ParamPatch:
    """Tensor-product patch sigma_c(t, tb) = sum_mn coeffs[c, m, n] phi_m(t) psi_n(tb).

    basis "poly": phi_m(t) = t**m. basis "trig": index 0 is constant, index 2k-1 is
    cos(2 pi k t) and index 2k is sin(2 pi k t).
    """

    coeffs: np.ndarray
    basis: PatchBasis = "poly"

    def __post_init__(self):
        arr = np.array(self.coeffs, dtype=float)
        if arr.ndim != 3 or arr.shape[0] != 4:
            raise AppValidationError(f"Patch coefficients must be 4 x M x N, got {arr.shape}")
        if self.basis not in ("poly", "trig"):
            raise AppValidationError(f"Unknown patch basis {self.basis!r}")
        object.__setattr__(self, "coeffs", _frozen(arr, arr.shape, "Patch"))

    @property
    def periodic(self) -> tuple[bool, bool]:
        return (self.basis == "trig", self.basis == "trig")

    def evaluate(self, t, tb) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        make = _poly_basis if self.basis == "poly" else _trig_basis
        phi, dphi = make(np.asarray(t, dtype=float), self.coeffs.shape[1])
        psi, dpsi = make(np.asarray(tb, dtype=float), self.coeffs.shape[2])
        point = np.einsum("...m,cmn,...n->...c", phi, self.coeffs, psi)
        dt = np.einsum("...m,cmn,...n->...c", dphi, self.coeffs, psi)
        dtb = np.einsum("...m,cmn,...n->...c", phi, self.coeffs, dpsi)
        return point, dt, dtb

    def speed_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        rate_t = _basis_rates(self.coeffs.shape[1], self.basis)
        rate_tb = _basis_rates(self.coeffs.shape[2], self.basis)
        mag = np.abs(self.coeffs)
        return (
            np.einsum("cmn,m->c", mag, rate_t),
            np.einsum("cmn,n->c", mag, rate_tb),
        )


Patch = DiskPatch | ParamPatch


@dataclass(frozen=True, eq=False)
class Surface:
    patches: tuple[Patch, ...]
    orientation: int = 1
    name: str = "surface"

    def __post_init__(self):
        object.__setattr__(self, "patches", tuple(self.patches))
        _check_orientation(self.orientation, f"Surface {self.name}")

    def reversed(self) -> "Surface":
        return Surface(self.patches, -self.orientation, self.name)


@dataclass(frozen=True, eq=False)
class SurfaceSample:
    point: np.ndarray
    jacobians: np.ndarray
    j_sigma: np.ndarray
    k_sigma: np.ndarray


@dataclass(frozen=True)
class TimelikeViolation:
    kind: Literal["spatial", "coordinates"]
    loop_a: str
    s_a: float
    loop_b: str
    s_b: float


@dataclass(frozen=True)
class TimelikeReport:
    ok: bool
    violations: tuple[TimelikeViolation, ...] = field(default_factory=tuple)
    count: int = 0

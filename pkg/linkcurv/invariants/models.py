"""Piercings and crossings."""

from dataclasses import dataclass


@dataclass(frozen=True)
class Piercing:
    """Transversal root of pi_axis(sigma(t, tb)) = pi_axis(rho(s)).

    ``weight`` is the orientation bracket divided by the absolute Jacobian determinant of
    the root system; it equals ``orientation_sign`` when the loop's time is stationary at
    the root, and always for axis 0.
    """

    loop: str
    patch: int
    s: float
    t: float
    t_bar: float
    axis: int
    orientation_sign: int
    height_sign: int
    weight: float
    residual: float


@dataclass(frozen=True)
class Crossing:
    """Crossing of two loops seen along spatial axis k."""

    s: float
    s_bar: float
    axis: int
    epsilon: int
    time_sign: int
    residual: float

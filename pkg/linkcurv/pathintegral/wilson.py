"""Regularized Wilson loop exponent and its kappa limit."""

from collections.abc import Sequence

import numpy as np

from linkcurv.config.settings import Settings, get_settings
from linkcurv.core.log_config import logger
from linkcurv.geometry.models import Hyperlink, Loop
from linkcurv.kernels.models import SPATIAL_AXES
from linkcurv.kernels.services import check_kappa, kernel_w
from linkcurv.quadrature.models import QuadResult
from linkcurv.quadrature.services import (
    gaussian_radius2,
    integrate_unit_cube,
    lipschitz_gaps,
    points_for,
    require_converged,
)


def _pair_integral(y_loop: Loop, rho_loop: Loop, kappa: float, settings: Settings) -> QuadResult:
    quad = settings.QUADRATURE
    prefactor = kappa**3 / (4.0 * np.pi)
    radius2 = gaussian_radius2(kappa, quad)
    lipschitz = np.stack([y_loop.speed_bounds(), rho_loop.speed_bounds()], axis=1)

    def integrand(x: np.ndarray) -> np.ndarray:
        y, dy = y_loop.evaluate(x[:, 0])
        rho, drho = rho_loop.evaluate(x[:, 1])
        cross = np.cross(dy[:, 1:], drho[:, 1:])
        total = np.zeros(len(x))
        for k in SPATIAL_AXES:
            total += kernel_w(kappa, y, rho, k) * cross[:, k - 1]
        return prefactor * total

    def screen(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        mid = (lo + hi) / 2
        diff = y_loop.evaluate(mid[:, 0])[0] - rho_loop.evaluate(mid[:, 1])[0]
        gaps2 = lipschitz_gaps(diff, (hi - lo) / 2, lipschitz) ** 2
        keep = np.zeros(len(lo), dtype=bool)
        for k in SPATIAL_AXES:
            others = [c for c in SPATIAL_AXES if c != k]
            keep |= gaps2[:, others].sum(axis=1) <= radius2
        return keep

    speeds = [float(np.max(y_loop.speed_bounds()[1:])), float(np.max(rho_loop.speed_bounds()[1:]))]
    return integrate_unit_cube(2, integrand, quad, points_for(kappa, speeds, quad), screen)


def wilson_integral(
    l_bar: Loop, geometric: Hyperlink, kappa: float, settings: Settings | None = None
) -> tuple[float, float]:
    """I(kappa) and its error estimate, summed over the geometric components."""
    settings = settings or get_settings()
    kappa = check_kappa(kappa)
    value, error = 0.0, 0.0
    for loop in geometric.loops:
        result = require_converged(
            _pair_integral(l_bar, loop, kappa, settings),
            f"Wilson integral {l_bar.name} x {loop.name} at kappa={kappa}",
        )
        value += float(result.value)
        error += result.error
    logger.debug("I({}) for {} = {:.8g} +- {:.2g}", kappa, l_bar.name, value, error)
    return value, error


def wilson_exponent(
    l_bar: Loop, geometric: Hyperlink, kappa: float, settings: Settings | None = None
) -> float:
    """I(kappa) = (kappa^3 / 4 pi) sum_v int eps^{ijk} <p^y, p^rho>_k y'_i rho'_j ds ds_bar."""
    return wilson_integral(l_bar, geometric, kappa, settings)[0]


def wilson_limit(
    l_bar: Loop,
    geometric: Hyperlink,
    schedule: Sequence[float],
    settings: Settings | None = None,
) -> list[tuple[float, float, float]]:
    """(kappa, I/(4 pi), error/(4 pi)) along a schedule."""
    rows = []
    for kappa in schedule:
        value, error = wilson_integral(l_bar, geometric, kappa, settings)
        rows.append((float(kappa), value / (4.0 * np.pi), error / (4.0 * np.pi)))
    return rows

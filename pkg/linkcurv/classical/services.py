"""Classical curvature of a connection and its total over a surface."""

import numpy as np

from linkcurv.classical.models import ConnectionField, CurvatureComponents
from linkcurv.config.settings import Settings, get_settings
from linkcurv.core.exceptions import AppValidationError
from linkcurv.core.log_config import logger
from linkcurv.geometry.models import Point4, Surface
from linkcurv.geometry.services import as_point4, eval_surface, surface_samples
from linkcurv.kernels.models import SPATIAL_AXES
from linkcurv.liealg.models import AlgebraElement
from linkcurv.liealg.services import basis_element
from linkcurv.quadrature.services import integrate_unit_cube, require_converged


def _fields(omega: ConnectionField, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Algebra vectors of the connection forms and their gradients.

    Returns (n, 4, 6) values indexed by the form index (slot 0 unused) and
    (n, 4, 6, 4) gradients.
    """
    values = np.zeros((len(x), 4, 6))
    grads = np.zeros((len(x), 4, 6, 4))
    for (i, alpha, beta), comp in omega.components.items():
        # A^i_{ab} E^{ab} + A^i_{ba} E^{ba} = 2 A^i_{ab} E^{ab}
        vec = 2.0 * basis_element(alpha, beta).as_vector()
        values[:, i] += comp(x)[:, None] * vec
        grads[:, i] += vec[None, :, None] * comp.gradient(x)[:, None, :]
    return values, grads


def _bracket(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    plus = np.cross(u[..., :3], v[..., :3])
    minus = np.cross(u[..., 3:], v[..., 3:])
    return np.concatenate([plus, minus], axis=-1)


def _curvature(omega: ConnectionField, x: np.ndarray) -> np.ndarray:
    """(n, 4, 4, 6) curvature array at the given points."""
    values, grads = _fields(omega, x)
    tensor = np.zeros((len(x), 4, 4, 6))
    for i in SPATIAL_AXES:
        tensor[:, 0, i] = grads[:, i, :, 0]
        tensor[:, i, 0] = -tensor[:, 0, i]
        for j in SPATIAL_AXES:
            if j <= i:
                continue
            r_ij = grads[:, j, :, i] - grads[:, i, :, j]
            # the bracket appears once for (i, j) and once, negated, for (j, i)
            r_ij += 2.0 * _bracket(values[:, i], values[:, j])
            tensor[:, i, j] = r_ij
            tensor[:, j, i] = -r_ij
    return tensor


def connection_algebra(omega: ConnectionField, x) -> list[AlgebraElement]:
    """The three algebra-valued forms at a point, indexed 1..3 in the returned list order."""
    values, _ = _fields(omega, np.asarray(as_point4(x), dtype=float)[None, :])
    return [AlgebraElement.from_vector(values[0, i]) for i in SPATIAL_AXES]


def curvature_at_point(omega: ConnectionField, p: Point4 | np.ndarray) -> CurvatureComponents:
    """R_0i = d_0 A_i and R_ij = d_i A_j - d_j A_i + 2 [A_i, A_j]."""
    point = np.asarray(as_point4(p), dtype=float)[None, :]
    return CurvatureComponents(tensor=_curvature(omega, point)[0])


def total_curvature_surface(
    omega: ConnectionField, surface: Surface, settings: Settings | None = None
) -> AlgebraElement:
    """F_S = 1/2 sum_patches int sum_{a<b} R_ab J_ab dt dtb."""
    settings = settings or get_settings()
    quad = settings.QUADRATURE
    if not omega.components or not surface.patches:
        return AlgebraElement.zero()
    pts = surface_samples(surface, 32)
    for comp in omega.components.values():
        if not np.all(np.isfinite(comp(pts))):
            raise AppValidationError(f"Connection is not finite on surface {surface.name}")

    pairs = [(a, b) for a in range(4) for b in range(a + 1, 4)]
    total = np.zeros(6)
    for index, patch in enumerate(surface.patches):

        def integrand(x: np.ndarray, patch=patch) -> np.ndarray:
            sample = eval_surface(patch, x[:, 0], x[:, 1], surface.orientation)
            curv = _curvature(omega, sample.point)
            out = np.zeros((len(x), 6))
            for a, b in pairs:
                out += curv[:, a, b] * sample.jacobians[:, a, b, None]
            return 0.5 * out

        result = require_converged(
            integrate_unit_cube(2, integrand, quad), f"Total curvature on {surface.name}[{index}]"
        )
        total += np.asarray(result.value, dtype=float).reshape(6)
    logger.info("F_S over {}: {}", surface.name, np.round(total, 10).tolist())
    return AlgebraElement.from_vector(total)

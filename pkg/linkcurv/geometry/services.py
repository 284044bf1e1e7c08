"""Curve and surface evaluation, projections, time-like and disjointness checks."""

from collections.abc import Sequence

import numpy as np

from linkcurv.core.exceptions import AppValidationError
from linkcurv.core.log_config import logger
from linkcurv.geometry.models import (
    Hyperlink,
    Loop,
    Patch,
    Point3,
    Point4,
    Surface,
    SurfaceSample,
    TimelikeReport,
    TimelikeViolation,
)

# Violations kept verbatim in a report; the rest are only counted.
MAX_REPORTED_VIOLATIONS = 50
_PAIR_BLOCK = 1 << 20


def eval_curve(loop: Loop, s) -> tuple[np.ndarray, np.ndarray]:
    """Point and analytic derivative of a loop at parameter(s) s."""
    return loop.evaluate(s)


def eval_surface(patch: Patch, t, tb, orientation: int = 1) -> SurfaceSample:
    """Point, J_{ab} array, J_sigma and K_sigma of a patch at (t, tb)."""
    point, dt, dtb = patch.evaluate(t, tb)
    outer = dt[..., :, None] * dtb[..., None, :]
    jac = orientation * (outer - np.swapaxes(outer, -1, -2))
    j_sigma = np.stack([jac[..., 2, 3], jac[..., 3, 1], jac[..., 1, 2]], axis=-1)
    k_sigma = np.stack([jac[..., 0, 1], jac[..., 0, 2], jac[..., 0, 3]], axis=-1)
    return SurfaceSample(point=point, jacobians=jac, j_sigma=j_sigma, k_sigma=k_sigma)


def project(p: Sequence[float], a: int) -> Point3:
    """pi_a: drop coordinate a and keep the others in increasing index order."""
    if a not in (0, 1, 2, 3):
        raise AppValidationError(f"Projection axis must be 0..3, got {a}")
    kept = [float(p[i]) for i in range(4) if i != a]
    return Point3(*kept)


def circle_loop(
    center: Sequence[float],
    u: Sequence[float],
    v: Sequence[float],
    radius: float,
    name: str = "loop",
    orientation: int = 1,
    time_terms: Sequence[tuple[int, float, float]] = (),
) -> Loop:
    """center + radius (cos 2 pi s u + sin 2 pi s v), plus optional time harmonics (n, a, b)."""
    harmonics = max([1, *(n for n, _, _ in time_terms)])
    cos = np.zeros((4, harmonics))
    sin = np.zeros((4, harmonics))
    cos[:, 0] = radius * np.asarray(u, dtype=float)
    sin[:, 0] = radius * np.asarray(v, dtype=float)
    for n, a, b in time_terms:
        if n < 1:
            raise AppValidationError(f"Time harmonic index must be >= 1, got {n}")
        cos[0, n - 1] += a
        sin[0, n - 1] += b
    return Loop(np.asarray(center, dtype=float), cos, sin, orientation, name)


def check_regular(loop: Loop, grid_n: int) -> None:
    """Reject loops whose derivative vanishes on the validation grid."""
    _, deriv = loop.evaluate(np.arange(grid_n) / grid_n)
    if np.min(np.linalg.norm(deriv, axis=-1)) == 0.0:
        raise AppValidationError(f"Loop {loop.name} is not regularly parametrized")


def _pair_flags(
    pa: np.ndarray, pb: np.ndarray, tol: float
) -> tuple[np.ndarray, np.ndarray]:
    diff = pa[:, None, :] - pb[None, :, :]
    spatial = np.sum(diff[..., 1:] ** 2, axis=-1) <= tol
    close = np.abs(diff) <= tol
    coords = (np.sum(close[..., 1:], axis=-1) >= 2) & close[..., 0]
    return spatial, coords


def validate_timelike(hyperlink: Hyperlink, grid_n: int = 512, tol: float = 1e-9) -> TimelikeReport:
    """Grid check of both time-like conditions over all pairs of sample points."""
    if grid_n < 64:
        raise AppValidationError(f"grid_n must be >= 64, got {grid_n}")
    s = np.arange(grid_n) / grid_n
    samples = [loop.evaluate(s)[0] for loop in hyperlink.loops]
    idx = np.arange(grid_n)
    violations: list[TimelikeViolation] = []
    count = 0
    rows = max(1, _PAIR_BLOCK // grid_n)

    for a, loop_a in enumerate(hyperlink.loops):
        check_regular(loop_a, grid_n)
        for b in range(a, len(hyperlink.loops)):
            loop_b = hyperlink.loops[b]
            for start in range(0, grid_n, rows):
                block = slice(start, min(start + rows, grid_n))
                spatial, coords = _pair_flags(samples[a][block], samples[b], tol)
                if a == b:
                    gap = np.abs(idx[block, None] - idx[None, :])
                    # each unordered pair once, neighbours closer than 2/grid_n excluded
                    keep = (idx[block, None] < idx[None, :]) & (np.minimum(gap, grid_n - gap) >= 2)
                    spatial &= keep
                    coords &= keep
                coords &= ~spatial
                for kind, mask in (("spatial", spatial), ("coordinates", coords)):
                    hits = np.argwhere(mask)
                    count += len(hits)
                    for i, j in hits[: max(0, MAX_REPORTED_VIOLATIONS - len(violations))]:
                        violations.append(
                            TimelikeViolation(
                                kind=kind,
                                loop_a=loop_a.name,
                                s_a=float(s[start + i]),
                                loop_b=loop_b.name,
                                s_b=float(s[j]),
                            )
                        )

    violations.sort(key=lambda v: (v.loop_a, v.loop_b, v.s_a, v.s_b, v.kind))
    logger.info(
        "Time-like check: {} loops, grid {}, {} violations",
        len(hyperlink.loops),
        grid_n,
        count,
    )
    return TimelikeReport(ok=count == 0, violations=tuple(violations), count=count)


def surface_samples(surface: Surface, n: int) -> np.ndarray:
    """Points of every patch on an n x n parameter grid, stacked."""
    grid = (np.arange(n) + 0.5) / n
    t, tb = np.meshgrid(grid, grid, indexing="ij")
    points = [patch.evaluate(t, tb)[0].reshape(-1, 4) for patch in surface.patches]
    return np.concatenate(points) if points else np.zeros((0, 4))


def validate_disjoint(
    hyperlink: Hyperlink, surface: Surface | None, grid_n: int = 512, tol: float = 1e-6
) -> float:
    """Smallest sampled 4D distance between the loops and the surface."""
    if surface is None or not surface.patches or not hyperlink.loops:
        return float("inf")
    patch_points = surface_samples(surface, 128)
    s = np.arange(grid_n) / grid_n
    best = float("inf")
    rows = max(1, _PAIR_BLOCK // len(patch_points))
    for loop in hyperlink.loops:
        pts = loop.evaluate(s)[0]
        for start in range(0, grid_n, rows):
            diff = pts[start : start + rows, None, :] - patch_points[None, :, :]
            best = min(best, float(np.sqrt(np.min(np.sum(diff**2, axis=-1)))))
    if best <= tol:
        raise AppValidationError(
            f"Geometric hyperlink meets surface {surface.name} (distance {best:.3g})"
        )
    logger.debug("Loop-surface separation for {}: {:.4g}", surface.name, best)
    return best


def as_point4(values: Sequence[float]) -> Point4:
    arr = np.asarray(values, dtype=float).reshape(4)
    if not np.all(np.isfinite(arr)):
        raise AppValidationError("Point coordinates must be finite")
    return Point4(*arr.tolist())

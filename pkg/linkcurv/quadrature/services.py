"""Composite Gauss-Legendre cubature on unit cubes, Sobol fallback, kappa schedules."""

import itertools
import math
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache

import numpy as np
from scipy.stats import qmc

from linkcurv.config.settings import QuadSettings
from linkcurv.core.exceptions import AppError, AppValidationError, NonConvergenceError
from linkcurv.core.log_config import logger
from linkcurv.quadrature.models import (
    FINAL_ABS_TOL,
    FINAL_REL_TOL,
    ConvergenceRow,
    ConvergenceTable,
    Integrand,
    QuadResult,
    Screen,
)


@lru_cache(maxsize=16)
def gauss_legendre_unit(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the order-point Gauss-Legendre rule on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(order)
    nodes, weights = (x + 1.0) / 2.0, w / 2.0
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


@lru_cache(maxsize=32)
def _tensor_rule(order: int, dim: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = gauss_legendre_unit(order)
    grid = np.stack(np.meshgrid(*([nodes] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    wgrid = np.prod(
        np.stack(np.meshgrid(*([weights] * dim), indexing="ij"), axis=-1).reshape(-1, dim), axis=1
    )
    return grid, wgrid


def points_for(kappa: float, speeds: Sequence[float], settings: QuadSettings) -> list[int]:
    """Per-axis node counts that resolve a Gaussian of width 1/kappa along each axis."""
    return [
        max(settings.base_points_per_axis, math.ceil(settings.points_per_kappa * kappa * sp))
        for sp in speeds
    ]


def gaussian_radius2(kappa: float, settings: QuadSettings) -> float:
    """Squared distance beyond which exp(-kappa^2 d^2 / 8) is below exp(-screen_exponent)."""
    return 8.0 * settings.screen_exponent / kappa**2


def lipschitz_gaps(
    values: np.ndarray, half_widths: np.ndarray, lipschitz: np.ndarray
) -> np.ndarray:
    """Lower bounds of |g_c| over cells.

    values: (K, C) centre values; half_widths: (K, D); lipschitz: (C, D) bounds of
    |dg_c / dx_d|.
    """
    return np.maximum(np.abs(values) - half_widths @ lipschitz.T, 0.0)


def _base_depths(dim: int, points: Sequence[int] | None, settings: QuadSettings) -> np.ndarray:
    wanted = [settings.base_points_per_axis] * dim if points is None else list(points)
    if len(wanted) != dim:
        raise AppValidationError(f"points must list {dim} axes, got {len(wanted)}")
    depths = []
    for n in wanted:
        panels = math.ceil(max(n, settings.base_points_per_axis) / settings.panel_order)
        depths.append(max(0, math.ceil(math.log2(panels))))
    return np.array(depths, dtype=int)


def leaf_cells(depths: np.ndarray, screen: Screen | None = None) -> np.ndarray:
    """Integer indices of the dyadic cells at the given depths that survive the screen.

    Cells are bisected along every axis not yet at its depth; the screen is applied after
    each bisection, so discarded regions are never subdivided.
    """
    dim = len(depths)
    idx = np.zeros((1, dim), dtype=np.int64)
    current = np.zeros(dim, dtype=int)
    while np.any(current < depths):
        split = current < depths
        offsets = np.array(list(itertools.product(*[(0, 1) if s else (0,) for s in split])))
        idx = (idx[:, None, :] * np.where(split, 2, 1) + offsets[None, :, :]).reshape(-1, dim)
        current = current + split
        if screen is not None and len(idx):
            scale = 2.0**current
            idx = idx[np.asarray(screen(idx / scale, (idx + 1) / scale), dtype=bool)]
    return idx


def _tensor_sum(
    f: Integrand, cells: np.ndarray, depths: np.ndarray, settings: QuadSettings
) -> np.ndarray:
    dim = len(depths)
    nodes, weights = _tensor_rule(settings.panel_order, dim)
    width = 2.0 ** (-depths.astype(float))
    volume = float(np.prod(width))
    per_chunk = max(1, settings.chunk_size // len(weights))
    partials: list[np.ndarray] = []
    for start in range(0, len(cells), per_chunk):
        lo = cells[start : start + per_chunk] * width
        points = (lo[:, None, :] + nodes[None, :, :] * width).reshape(-1, dim)
        values = np.asarray(f(points), dtype=float)
        values = values.reshape(len(lo), len(weights), -1)
        partials.append(np.einsum("cnm,n->m", values, weights))
    if not partials:
        return np.zeros(1)
    stacked = np.stack(partials)
    # fixed chunk order and fsum keep the total bit-stable
    return np.array([math.fsum(stacked[:, m]) for m in range(stacked.shape[1])]) * volume


def _shape_value(total: np.ndarray, scalar: bool) -> float | np.ndarray:
    return float(total[0]) if scalar else total


def _is_scalar(f: Integrand, dim: int) -> bool:
    sample = np.asarray(f(np.full((1, dim), 0.5)))
    return sample.ndim <= 1


def integrate_unit_cube(
    dim: int,
    f: Integrand,
    settings: QuadSettings,
    points: Sequence[int] | None = None,
    screen: Screen | None = None,
) -> QuadResult:
    """Integrate f over [0, 1]^dim by doubling composite Gauss-Legendre grids.

    f maps an (n, dim) array of points to (n,) or (n, m) values.
    """
    if dim not in (1, 2, 3, 4):
        raise AppValidationError(f"dim must be 1..4, got {dim}")
    scalar = _is_scalar(f, dim)
    base = _base_depths(dim, points, settings)
    per_cell = settings.panel_order**dim
    previous: np.ndarray | None = None
    evaluations = 0
    error = float("inf")

    for level in range(settings.max_refinements + 1):
        depths = base + level
        cells = leaf_cells(depths, screen)
        if len(cells) * per_cell > settings.max_tensor_points:
            if previous is None:
                logger.info(
                    "Tensor grid of {} points exceeds limit, switching to Sobol",
                    len(cells) * per_cell,
                )
                return integrate_qmc(dim, f, settings, settings.seed)
            break
        value = _tensor_sum(f, cells, depths, settings)
        evaluations += len(cells) * per_cell
        logger.debug("Level {}: {} cells, value {}", level, len(cells), value)
        if previous is not None:
            error = float(np.max(np.abs(value - previous)))
            if error <= max(settings.rel_tol * float(np.max(np.abs(value))), settings.abs_tol):
                shaped = _shape_value(value, scalar)
                return QuadResult(shaped, error, True, evaluations, level + 1, "gauss-legendre")
        previous = value

    assert previous is not None
    logger.warning("Quadrature did not converge in dim {} (error estimate {:.3g})", dim, error)
    return QuadResult(
        _shape_value(previous, scalar), error, False, evaluations, level + 1, "gauss-legendre"
    )


def integrate_qmc(
    dim: int, f: Integrand, settings: QuadSettings, seed: int | None = None
) -> QuadResult:
    """Scrambled Sobol replicas; the error is three standard errors of the replica means."""
    rng = np.random.default_rng(seed)
    scalar = _is_scalar(f, dim)
    means = []
    for _ in range(settings.qmc_replicas):
        engine = qmc.Sobol(d=dim, scramble=True, rng=rng)
        samples = engine.random_base2(settings.qmc_log2_points)
        sums = []
        for start in range(0, len(samples), settings.chunk_size):
            values = np.asarray(f(samples[start : start + settings.chunk_size]), dtype=float)
            sums.append(values.reshape(len(values), -1).sum(axis=0))
        total = np.array([math.fsum(col) for col in np.stack(sums).T])
        means.append(total / len(samples))
    stacked = np.stack(means)
    value = stacked.mean(axis=0)
    error = float(3.0 * np.max(stacked.std(axis=0, ddof=1)) / math.sqrt(len(means)))
    converged = error <= max(settings.rel_tol * float(np.max(np.abs(value))), settings.abs_tol)
    evaluations = settings.qmc_replicas * (1 << settings.qmc_log2_points)
    logger.info("Sobol estimate over {} points, 3-sigma {:.3g}", evaluations, error)
    return QuadResult(_shape_value(value, scalar), error, converged, evaluations, 1, "sobol")


def require_converged(result: QuadResult, what: str) -> QuadResult:
    """Raise NonConvergenceError unless the integration met its tolerance."""
    if not result.converged:
        raise NonConvergenceError(
            f"{what} did not converge ({result.method}, {result.levels} levels, "
            f"error {result.error:.3g})"
        )
    return result


def validate_schedule(schedule: Sequence[float]) -> list[float]:
    kappas = [float(k) for k in schedule]
    if len(kappas) < 3:
        raise AppValidationError(f"kappa schedule needs at least 3 values, got {len(kappas)}")
    if any(k <= 0 or not math.isfinite(k) for k in kappas):
        raise AppValidationError("kappa values must be positive and finite")
    if any(b <= a for a, b in zip(kappas, kappas[1:])):
        raise AppValidationError(f"kappa schedule must be strictly increasing: {kappas}")
    return kappas


def _unpack(result) -> tuple[complex, float]:
    if isinstance(result, QuadResult):
        return complex(np.asarray(result.value).reshape(-1)[0]), result.error
    if isinstance(result, tuple):
        value, error = result
        return complex(value), float(error)
    return complex(result), 0.0


def tail_monotone(values: Sequence[float], tail: int = 3) -> bool:
    """True when the last `tail` entries are non-increasing (up to rounding)."""
    last = list(values)[-tail:]
    return all(b <= a * (1 + 1e-9) + 1e-15 for a, b in zip(last, last[1:]))


def within_tol(value: complex, reference: complex, rel_tol: float = FINAL_REL_TOL) -> bool:
    return abs(value - reference) <= max(rel_tol * abs(reference), FINAL_ABS_TOL)


def run_schedule(
    evaluator: Callable[[float], object],
    schedule: Sequence[float],
    reference: complex | None = None,
    term: str = "value",
    max_workers: int = 1,
) -> ConvergenceTable:
    """Evaluate along a kappa schedule; failures are recorded per row."""
    kappas = validate_schedule(schedule)

    def cell(kappa: float) -> ConvergenceRow:
        try:
            with logger.contextualize(kappa=f"{kappa:g}"):
                value, error = _unpack(evaluator(kappa))
        except AppError as exc:
            logger.warning("{} failed at kappa={}: {}", term, kappa, exc.message)
            return ConvergenceRow(kappa, term, None, None, reference, None, exc.code)
        abs_error = None if reference is None else abs(value - reference)
        return ConvergenceRow(kappa, term, value, error, reference, abs_error)

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            rows = tuple(pool.map(cell, kappas))
    else:
        rows = tuple(cell(k) for k in kappas)

    ok = [r for r in rows if r.value is not None]
    last = rows[-1].value
    if reference is not None:
        monotone = tail_monotone([r.abs_error for r in ok if r.abs_error is not None])
        final = last is not None and within_tol(last, reference)
    else:
        diffs = [abs(complex(b.value or 0) - complex(a.value or 0)) for a, b in zip(ok, ok[1:])]
        monotone = tail_monotone(diffs, tail=2) if diffs else True
        final = len(ok) == len(rows)
    return ConvergenceTable(rows=rows, tail_monotone=monotone, final_within_tol=final)

"""Regularized curvature terms, the Wilson loop observable, and kappa-convergence studies."""

import math
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from linkcurv.config.settings import QuadSettings, Settings, get_settings
from linkcurv.core.exceptions import (
    AppError,
    AppValidationError,
    DuplicateIdentifierError,
    InvalidStateError,
    NonConvergenceError,
    TimelikeViolationError,
    UncoloredMatterError,
)
from linkcurv.core.log_config import logger
from linkcurv.geometry.models import Hyperlink, Loop, Patch
from linkcurv.geometry.services import eval_surface, validate_disjoint, validate_timelike
from linkcurv.invariants.services import crossing_sk_hyperlink, lk_hyperlink_surface
from linkcurv.kernels.models import CYCLIC_TRIPLES, SPATIAL_AXES
from linkcurv.kernels.services import check_kappa, kernel_a, kernel_b, kernel_c
from linkcurv.liealg.models import F_MINUS, F_PLUS
from linkcurv.liealg.services import wilson_factor
from linkcurv.pathintegral.models import (
    TERM_C_METHODS,
    LoopSurfaceIntegrals,
    OperatorValue,
    Scene,
    Sign,
    TermCMethod,
)
from linkcurv.pathintegral.wilson import wilson_integral
from linkcurv.quadrature.models import ConvergenceRow, ConvergenceTable
from linkcurv.quadrature.services import (
    gauss_legendre_unit,
    gaussian_radius2,
    integrate_qmc,
    integrate_unit_cube,
    lipschitz_gaps,
    points_for,
    require_converged,
    run_schedule,
    validate_schedule,
)

SQRT_4PI = math.sqrt(4.0 * math.pi)
A_LIMIT = 3.0 * math.sqrt(math.pi) / 2.0
B_LIMIT = math.sqrt(math.pi) / 2.0
COEFFICIENT_IDENTITY_TOL = 1e-15
Z_IMAG_TOL = 1e-10
_PAIR_BLOCK = 1 << 22


def validate_scene(scene: Scene, settings: Settings | None = None) -> Scene:
    """Distinct names, time-like chi(matter, geometric), geometric hyperlink disjoint from S."""
    settings = settings or get_settings()
    loops = (*scene.matter.loops, *scene.geometric.loops)
    seen: set[str] = set()
    for loop in loops:
        if loop.name in seen:
            raise DuplicateIdentifierError(f"Loop name {loop.name!r} is used twice")
        seen.add(loop.name)
    if scene.surface is not None and scene.surface.name in seen:
        raise DuplicateIdentifierError(f"Surface name {scene.surface.name!r} clashes with a loop")
    if scene.matter.role != "matter" or scene.geometric.role != "geometric":
        raise AppValidationError("Scene hyperlinks must have roles matter and geometric")
    if not math.isfinite(scene.charge):
        raise AppValidationError(f"Charge must be finite, got {scene.charge}")

    if loops:
        chi = Hyperlink(loops, "matter")
        report = validate_timelike(chi, settings.TIMELIKE.grid_n, settings.TIMELIKE.tol)
        if not report.ok:
            first = report.violations[0]
            raise TimelikeViolationError(
                f"{report.count} time-like violations, first: {first.kind} between "
                f"{first.loop_a}(s={first.s_a:.6g}) and {first.loop_b}(s={first.s_b:.6g})",
                report,
            )
    validate_disjoint(scene.geometric, scene.surface, settings.TIMELIKE.grid_n)
    logger.info(
        "Scene {} valid: {} matter, {} geometric loops, {} patches",
        scene.name,
        len(scene.matter),
        len(scene.geometric),
        len(scene.surface.patches) if scene.surface else 0,
    )
    return scene


def _patch_lipschitz(loop: Loop, patch: Patch) -> np.ndarray:
    speed_t, speed_tb = patch.speed_bounds()
    return np.stack([loop.speed_bounds(), speed_t, speed_tb], axis=1)


def _max_speed(values: np.ndarray) -> float:
    return float(np.max(values))


def loop_surface_integrals(
    scene: Scene, kappa: float, settings: Settings | None = None
) -> LoopSurfaceIntegrals:
    """a_j = (kappa^3 / 32 pi) sum_v int A_j (rho'_k J_0i - rho'_i J_0k) and
    b = (kappa^3 / 32 pi) sum_v int B rho' . J_sigma over (s, t, tb) in I^3."""
    settings = settings or get_settings()
    kappa = check_kappa(kappa)
    quad = settings.QUADRATURE
    if not scene.has_surface:
        return LoopSurfaceIntegrals(kappa, np.zeros(3), 0.0, 0.0)
    assert scene.surface is not None
    surface = scene.surface
    prefactor = kappa**3 / (32.0 * np.pi)
    radius2 = gaussian_radius2(kappa, quad)
    total = np.zeros(4)
    error = 0.0

    for loop in scene.geometric.loops:
        for patch in surface.patches:

            def integrand(x: np.ndarray, loop=loop, patch=patch) -> np.ndarray:
                rho, drho = loop.evaluate(x[:, 0])
                sample = eval_surface(patch, x[:, 1], x[:, 2], surface.orientation)
                sigma, jac = sample.point, sample.jacobians
                out = np.empty((len(x), 4))
                for i, j, k in CYCLIC_TRIPLES:
                    bracket = drho[:, k] * jac[:, 0, i] - drho[:, i] * jac[:, 0, k]
                    out[:, j - 1] = kernel_a(kappa, sigma, rho, j) * bracket
                flux = np.einsum("nc,nc->n", drho[:, 1:], sample.j_sigma)
                out[:, 3] = kernel_b(kappa, sigma, rho) * flux
                return prefactor * out

            lipschitz = _patch_lipschitz(loop, patch)

            def screen(lo: np.ndarray, hi: np.ndarray, loop=loop, patch=patch, lipschitz=lipschitz):
                mid = (lo + hi) / 2
                diff = patch.evaluate(mid[:, 1], mid[:, 2])[0] - loop.evaluate(mid[:, 0])[0]
                gaps2 = lipschitz_gaps(diff, (hi - lo) / 2, lipschitz) ** 2
                keep = gaps2[:, 1:].sum(axis=1) <= radius2
                for i, _, k in CYCLIC_TRIPLES:
                    keep |= gaps2[:, [0, i, k]].sum(axis=1) <= radius2
                return keep

            speeds = [float(v) for v in np.max(lipschitz, axis=0)]
            points = points_for(kappa, speeds, quad)
            result = require_converged(
                integrate_unit_cube(3, integrand, quad, points, screen),
                f"Loop-surface integral {loop.name} x {surface.name} at kappa={kappa}",
            )
            total += np.asarray(result.value, dtype=float).reshape(4)
            error += result.error

    logger.debug("Loop-surface integrals at kappa={}: a={} b={:.6g}", kappa, total[:3], total[3])
    return LoopSurfaceIntegrals(kappa, total[:3].copy(), float(total[3]), error)


def _term_a_coefficient(integrals: LoopSurfaceIntegrals) -> complex:
    return -1j * integrals.a_sum / SQRT_4PI


def _term_b_coefficient(integrals: LoopSurfaceIntegrals) -> complex:
    return 1j * integrals.b / SQRT_4PI


def _algebra_for(sign: Sign):
    if sign not in (1, -1):
        raise AppValidationError(f"sign must be +1 or -1, got {sign}")
    return F_PLUS if sign == 1 else F_MINUS


def term_A(
    scene: Scene, kappa: float, sign: Sign = 1, settings: Settings | None = None
) -> OperatorValue:
    """A-bar^+- = -+(i / sqrt(4 pi)) sum_j a_j (x) F^+-."""
    algebra = _algebra_for(sign)
    coefficient = _term_a_coefficient(loop_surface_integrals(scene, kappa, settings))
    return OperatorValue(sign * coefficient, algebra)


def term_B(scene: Scene, kappa: float, settings: Settings | None = None) -> OperatorValue:
    """B-bar = (i / sqrt(4 pi)) b (x) (F^+ - F^-)."""
    coefficient = _term_b_coefficient(loop_surface_integrals(scene, kappa, settings))
    return OperatorValue(coefficient, F_PLUS - F_MINUS)


@dataclass(frozen=True, eq=False)
class _InnerRule:
    nodes: np.ndarray
    weights: np.ndarray
    rho: np.ndarray
    drho: np.ndarray
    mid: np.ndarray
    half: float
    lipschitz: np.ndarray
    order: int


def _inner_rule(loop: Loop, kappa: float, quad: QuadSettings) -> _InnerRule:
    wanted = 2 * points_for(kappa, [_max_speed(loop.speed_bounds()[1:])], quad)[0]
    panels = 1 << max(0, math.ceil(math.log2(math.ceil(wanted / quad.panel_order))))
    nodes, weights = gauss_legendre_unit(quad.panel_order)
    width = 1.0 / panels
    s = ((np.arange(panels)[:, None] + nodes[None, :]) * width).reshape(-1)
    rho, drho = loop.evaluate(s)
    mid = loop.evaluate((np.arange(panels) + 0.5) * width)[0]
    return _InnerRule(
        nodes=s,
        weights=np.tile(weights * width, panels),
        rho=rho,
        drho=drho,
        mid=mid,
        half=width / 2,
        lipschitz=loop.speed_bounds(),
        order=quad.panel_order,
    )


def _close_panels(
    points: np.ndarray, slack: np.ndarray, rule: _InnerRule, radius2: float
) -> np.ndarray:
    """(n, panels) mask: some C_c kernel between a point and the panel may exceed the screen."""
    delta = np.abs(points[:, None, 1:] - rule.mid[None, :, 1:])
    delta -= slack[:, None, 1:] + rule.half * rule.lipschitz[1:]
    gap2 = np.maximum(delta, 0.0) ** 2
    off_axis = gap2.sum(axis=-1, keepdims=True) - gap2
    return np.any(off_axis <= radius2, axis=-1)


def _moments(sigma: np.ndarray, rule: _InnerRule, kappa: float, radius2: float) -> np.ndarray:
    """M[n, a, c] = int rho'_a(s) C_c(sigma_n, rho(s)) ds on the screened panels."""
    n = len(sigma)
    out = np.zeros((n, 3, 3))
    block = max(1, _PAIR_BLOCK // max(1, len(rule.mid)))
    for start in range(0, n, block):
        part = sigma[start : start + block]
        owner, panel = np.nonzero(_close_panels(part, np.zeros_like(part), rule, radius2))
        if not len(owner):
            continue
        node = (panel[:, None] * rule.order + np.arange(rule.order)).reshape(-1)
        owner = np.repeat(owner, rule.order)
        sig, rho = part[owner], rule.rho[node]
        kern = np.stack([kernel_c(kappa, sig, rho, c) for c in SPATIAL_AXES], axis=-1)
        contrib = (rule.weights[node, None] * rule.drho[node, 1:])[:, :, None] * kern[:, None, :]
        for a in range(3):
            for c in range(3):
                out[start : start + len(part), a, c] = np.bincount(
                    owner, weights=contrib[:, a, c], minlength=len(part)
                )
    return out


def _c_density(jac: np.ndarray, n_mat: np.ndarray) -> np.ndarray:
    total = np.zeros(len(jac))
    for i, j, k in CYCLIC_TRIPLES:
        total += jac[:, i, j] * n_mat[:, k - 1, j - 1] * n_mat[:, i - 1, k - 1]
    return -total / (32.0 * np.pi**2)


def _term_c_nested(scene: Scene, kappa: float, settings: Settings) -> tuple[float, float]:
    quad = settings.QUADRATURE
    assert scene.surface is not None
    surface = scene.surface
    radius2 = gaussian_radius2(kappa, quad)
    rules = [_inner_rule(loop, kappa, quad) for loop in scene.geometric.loops]
    value, error = 0.0, 0.0

    for patch in surface.patches:
        speed_t, speed_tb = patch.speed_bounds()

        def integrand(x: np.ndarray, patch=patch) -> np.ndarray:
            sample = eval_surface(patch, x[:, 0], x[:, 1], surface.orientation)
            n_mat = np.zeros((len(x), 3, 3))
            for rule in rules:
                moments = _moments(sample.point, rule, kappa, radius2)
                n_mat += moments - moments.transpose(0, 2, 1)
            return _c_density(sample.jacobians, n_mat)

        def screen(lo: np.ndarray, hi: np.ndarray, patch=patch, speed_t=speed_t, speed_tb=speed_tb):
            mid = (lo + hi) / 2
            half = (hi - lo) / 2
            centre = patch.evaluate(mid[:, 0], mid[:, 1])[0]
            slack = half[:, :1] * speed_t + half[:, 1:] * speed_tb
            keep = np.zeros(len(lo), dtype=bool)
            block = max(1, _PAIR_BLOCK // max(1, max(len(r.mid) for r in rules)))
            for start in range(0, len(lo), block):
                part = slice(start, start + block)
                for rule in rules:
                    close = _close_panels(centre[part], slack[part], rule, radius2)
                    keep[part] |= np.any(close, axis=1)
            return keep

        speeds = [_max_speed(speed_t[1:]), _max_speed(speed_tb[1:])]
        result = require_converged(
            integrate_unit_cube(2, integrand, quad, points_for(kappa, speeds, quad), screen),
            f"Term C (nested) on {surface.name} at kappa={kappa}",
        )
        value += float(result.value)
        error += result.error
    return value, error


def _c_kernels(kappa: float, sigma: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """(n, 4) with column c holding C_c; column 0 is unused."""
    kernels = [kernel_c(kappa, sigma, rho, c) for c in SPATIAL_AXES]
    return np.stack([np.zeros(len(sigma)), *kernels], axis=1)


def _term_c_qmc(scene: Scene, kappa: float, settings: Settings) -> tuple[float, float]:
    quad = settings.QUADRATURE
    assert scene.surface is not None
    surface = scene.surface
    loops = scene.geometric.loops
    value, error = 0.0, 0.0

    for patch in surface.patches:

        def integrand(x: np.ndarray, patch=patch) -> np.ndarray:
            sample = eval_surface(patch, x[:, 0], x[:, 1], surface.orientation)
            sigma, jac = sample.point, sample.jacobians
            total = np.zeros(len(x))
            for first in loops:
                r1, d1 = first.evaluate(x[:, 2])
                c1 = _c_kernels(kappa, sigma, r1)
                for second in loops:
                    r2, d2 = second.evaluate(x[:, 3])
                    c2 = _c_kernels(kappa, sigma, r2)
                    for i, j, k in CYCLIC_TRIPLES:
                        left = d1[:, k] * c1[:, j] - d1[:, j] * c1[:, k]
                        right = d2[:, i] * c2[:, k] - d2[:, k] * c2[:, i]
                        total += jac[:, i, j] * left * right
            return -total / (32.0 * np.pi**2)

        result = require_converged(
            integrate_qmc(4, integrand, quad, quad.seed),
            f"Term C (qmc) on {surface.name} at kappa={kappa}",
        )
        value += float(result.value)
        error += result.error
    return value, error


def _term_c_value(
    scene: Scene, kappa: float, method: TermCMethod, settings: Settings
) -> tuple[float, float]:
    kappa = check_kappa(kappa)
    if method not in TERM_C_METHODS:
        raise AppValidationError(
            f"Unknown term C method {method!r}; expected one of {TERM_C_METHODS}"
        )
    if not scene.has_surface or not scene.geometric.loops:
        return 0.0, 0.0
    run = _term_c_nested if method == "nested" else _term_c_qmc
    value, error = run(scene, kappa, settings)
    logger.debug("Term C ({}) at kappa={}: {:.6g} +- {:.2g}", method, kappa, value, error)
    return value, error


def term_C(
    scene: Scene,
    kappa: float,
    sign: Sign = 1,
    method: TermCMethod = "nested",
    settings: Settings | None = None,
) -> OperatorValue:
    """C-bar^+- = -(1 / 32 pi^2) int sum_C3 J_ij N_kj N_ik (x) F^+-.

    The coefficient does not depend on the sign.
    """
    algebra = _algebra_for(sign)
    value, _ = _term_c_value(scene, kappa, method, settings or get_settings())
    return OperatorValue(complex(value), algebra)


def _check_colors(scene: Scene) -> None:
    for loop, color in zip(scene.matter.loops, scene.matter.colors):
        if color is None:
            raise UncoloredMatterError(f"Matter loop {loop.name} has no color (j_plus, j_minus)")


def _real_z(value: complex, what: str) -> float:
    if abs(value.imag) > Z_IMAG_TOL * max(abs(value), 1.0):
        raise NonConvergenceError(f"{what} has imaginary part {value.imag:.3g}")
    return float(value.real)


def z_observable(
    scene: Scene, numeric_kappa: float | None = None, settings: Settings | None = None
) -> float:
    """Z(q; chi) = prod_u wilson_factor(color_u, q, sk_u).

    With ``numeric_kappa`` the exact sk is replaced by I(kappa) / (4 pi).
    """
    settings = settings or get_settings()
    _check_colors(scene)
    z = complex(1.0)
    for loop, color in zip(scene.matter.loops, scene.matter.colors):
        assert color is not None
        if numeric_kappa is None:
            sk: float = crossing_sk_hyperlink(loop, scene.geometric, settings)
        else:
            sk = wilson_integral(loop, scene.geometric, numeric_kappa, settings)[0] / (4.0 * np.pi)
        z *= wilson_factor(color, scene.charge, sk)
    what = "Z" if numeric_kappa is None else f"Z at kappa={numeric_kappa}"
    result = _real_z(z, what)
    logger.info("{} for scene {} = {:.10g}", what, scene.name, result)
    return result


def f_hat_operator(scene: Scene, settings: Settings | None = None) -> OperatorValue:
    """F-hat_S[Z] = -i sqrt(4 pi) lk(L, S) Z (x) (F^+ - F^-); F_empty is the identity."""
    settings = settings or get_settings()
    z = z_observable(scene, settings=settings)
    if not scene.has_surface:
        return OperatorValue(complex(z), None)
    lk = lk_hyperlink_surface(scene.geometric, scene.surface, settings)
    coefficient = -1j * SQRT_4PI * lk * z
    logger.info("F-hat for scene {}: lk={}, Z={:.10g}", scene.name, lk, z)
    return OperatorValue(coefficient, F_PLUS - F_MINUS)


def check_coefficient_identity() -> float:
    """3 sqrt(pi) / 2 + sqrt(pi) / 2 = sqrt(4 pi); returns the discrepancy."""
    gap = abs(A_LIMIT + B_LIMIT - SQRT_4PI)
    if gap > COEFFICIENT_IDENTITY_TOL:
        raise InvalidStateError(f"Limit coefficients disagree by {gap:.3g}")
    return gap


def _cached(
    compute: Callable[[float], object], kappas: Sequence[float], max_workers: int
) -> Callable[[float], object]:
    """Evaluate every kappa once; errors are re-raised per kappa."""

    def guarded(kappa: float) -> object:
        try:
            with logger.contextualize(kappa=f"{kappa:g}"):
                return compute(kappa)
        except AppError as exc:
            return exc

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            results = dict(zip(kappas, pool.map(guarded, kappas)))
    else:
        results = {k: guarded(k) for k in kappas}

    def lookup(kappa: float) -> object:
        result = results[kappa]
        if isinstance(result, AppError):
            raise result
        return result

    return lookup


def convergence_study(
    scene: Scene,
    schedule: Sequence[float] | None = None,
    c_method: TermCMethod = "nested",
    settings: Settings | None = None,
) -> ConvergenceTable:
    """Regularized terms against their exact limits along a kappa schedule.

    Rows store F^+ coefficients: A-bar^+ + A-bar^- = c_A (F^+ - F^-),
    B-bar = c_B (F^+ - F^-) and C-bar^+ + C-bar^- = c_C (F^+ + F^-).
    """
    settings = settings or get_settings()
    kappas = validate_schedule(schedule or settings.KAPPA_SCHEDULE)
    workers = settings.MAX_WORKERS
    check_coefficient_identity()
    tables: list[ConvergenceTable] = []

    if scene.matter.loops and all(c is not None for c in scene.matter.colors):
        z_exact = z_observable(scene, settings=settings)
        tables.append(
            run_schedule(
                lambda k: z_observable(scene, k, settings), kappas, complex(z_exact), "Z", workers
            )
        )
    if not scene.has_surface:
        logger.info("Scene {} has no surface: study reduces to Z", scene.name)
        return _merge(tables, tables)

    lk = lk_hyperlink_surface(scene.geometric, scene.surface, settings)
    integrals = _cached(lambda k: loop_surface_integrals(scene, k, settings), kappas, workers)

    def a_cell(kappa: float) -> tuple[complex, float]:
        res = integrals(kappa)
        assert isinstance(res, LoopSurfaceIntegrals)
        return _term_a_coefficient(res), 3.0 * res.error / SQRT_4PI

    def b_cell(kappa: float) -> tuple[complex, float]:
        res = integrals(kappa)
        assert isinstance(res, LoopSurfaceIntegrals)
        return _term_b_coefficient(res), res.error / SQRT_4PI

    c_values = _cached(lambda k: _term_c_value(scene, k, c_method, settings), kappas, workers)

    def c_cell(kappa: float) -> tuple[complex, float]:
        value, error = c_values(kappa)  # type: ignore[misc]
        return complex(value), float(error)

    def total_cell(kappa: float) -> tuple[complex, float]:
        parts = [a_cell(kappa), b_cell(kappa), c_cell(kappa)]
        return sum((p[0] for p in parts), 0j), sum(p[1] for p in parts)

    def axis_cell(axis: int) -> Callable[[float], tuple[float, float]]:
        def cell(kappa: float) -> tuple[float, float]:
            res = integrals(kappa)
            assert isinstance(res, LoopSurfaceIntegrals)
            if axis == 0:
                return -res.b / np.pi, res.error / np.pi
            return float(res.a[axis - 1]) / np.pi, res.error / np.pi

        return cell

    main = [
        run_schedule(a_cell, kappas, -1j * A_LIMIT * lk, "A"),
        run_schedule(b_cell, kappas, -1j * B_LIMIT * lk, "B"),
        run_schedule(c_cell, kappas, 0j, "C"),
        run_schedule(total_cell, kappas, -1j * SQRT_4PI * lk, "total"),
    ]
    axes = [run_schedule(axis_cell(a), kappas, complex(lk), f"lk_axis{a}") for a in range(4)]

    wilson = []
    for loop in scene.matter.loops:
        sk = crossing_sk_hyperlink(loop, scene.geometric, settings)

        def w_cell(kappa: float, loop=loop) -> tuple[float, float]:
            value, error = wilson_integral(loop, scene.geometric, kappa, settings)
            return value / (4.0 * np.pi), error / (4.0 * np.pi)

        wilson.append(run_schedule(w_cell, kappas, complex(sk), f"W:{loop.name}", workers))

    table = _merge([*main, *axes, *wilson, *tables], main)
    logger.info(
        "Convergence study of {}: lk={}, tail monotone {}, final within tolerance {}",
        scene.name,
        lk,
        table.tail_monotone,
        table.final_within_tol,
    )
    return table


def _merge(
    tables: Sequence[ConvergenceTable], checked: Sequence[ConvergenceTable]
) -> ConvergenceTable:
    rows: tuple[ConvergenceRow, ...] = tuple(row for table in tables for row in table.rows)
    monotone = all(t.tail_monotone for t in checked)
    final = checked[-1].final_within_tol if checked else True
    return ConvergenceTable(rows=rows, tail_monotone=monotone, final_within_tol=final)

"""Exact invariants: piercings, loop-surface linking numbers, crossing counts."""

import math
from collections.abc import Callable, Sequence

import numpy as np

from linkcurv.config.settings import InvariantSettings, Settings, get_settings
from linkcurv.core.exceptions import (
    AmbiguousPiercingError,
    InsufficientResolutionError,
    InvalidStateError,
    NonConvergenceError,
)
from linkcurv.core.log_config import logger
from linkcurv.geometry.models import Hyperlink, Loop, Surface
from linkcurv.geometry.services import eval_surface
from linkcurv.invariants.models import Crossing, Piercing
from linkcurv.kernels.models import CYCLIC_TRIPLES, SPATIAL_AXES
from linkcurv.pathintegral.wilson import wilson_limit
from linkcurv.quadrature.services import (
    integrate_unit_cube,
    leaf_cells,
    require_converged,
    tail_monotone,
)

RootSystem = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]

INTEGER_RESIDUAL = 0.05
SK_RESIDUAL = 0.1
# convergence errors below this are treated as already saturated
SK_NOISE_FLOOR = 1e-6
_DEDUPE_FLOOR = 1e-8
_MAX_HALVINGS = 30


def _wrap(x: np.ndarray, periodic: np.ndarray) -> np.ndarray:
    return np.where(periodic, np.mod(x, 1.0), x)


def _scan(
    values: Callable[[np.ndarray], np.ndarray], lipschitz: np.ndarray, dim: int, scan_n: int
) -> np.ndarray:
    """Centres of the cells at resolution 1/scan_n that may hold a root."""
    depth = math.ceil(math.log2(scan_n))

    def screen(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        half = (hi - lo) / 2
        slack = half @ lipschitz.T
        return np.all(np.abs(values(lo + half)) <= slack * (1 + 1e-9) + 1e-12, axis=1)

    cells = leaf_cells(np.full(dim, depth), screen)
    return (cells + 0.5) / 2.0**depth


def _newton(
    system: RootSystem, x0: np.ndarray, periodic: np.ndarray, conf: InvariantSettings
) -> tuple[np.ndarray, np.ndarray]:
    """Damped Newton from every start; returns final points and residual norms."""
    x = _wrap(x0.copy(), periodic)
    f, jac = system(x)
    res = np.linalg.norm(f, axis=1)
    alive = np.ones(len(x), dtype=bool)
    polish = conf.root_tol * 1e-3
    for _ in range(conf.newton_max_iter):
        active = np.flatnonzero(alive & (res > polish))
        if not len(active):
            break
        step = -np.einsum("kij,kj->ki", np.linalg.pinv(jac[active]), f[active])
        lam = np.ones(len(active))
        accepted = np.zeros(len(active), dtype=bool)
        for _ in range(_MAX_HALVINGS):
            pending = np.flatnonzero(~accepted)
            trial = _wrap(x[active[pending]] + lam[pending, None] * step[pending], periodic)
            ft, jt = system(trial)
            rt = np.linalg.norm(ft, axis=1)
            better = rt < res[active[pending]]
            idx = active[pending[better]]
            x[idx], f[idx], jac[idx], res[idx] = trial[better], ft[better], jt[better], rt[better]
            accepted[pending[better]] = True
            if accepted.all():
                break
            lam[~accepted] *= conf.newton_damping
        # no descent possible: the start has stalled
        alive[active[~accepted]] = False
    return x, res


def _dedupe(points: np.ndarray, periodic: np.ndarray, radius: float) -> list[int]:
    order = np.lexsort(points.T[::-1])
    unique: list[int] = []
    for i in order:
        delta = np.abs(points[unique] - points[i]) if unique else np.zeros((0, points.shape[1]))
        delta = np.where(periodic, np.minimum(delta, 1.0 - delta), delta)
        if not unique or np.all(np.max(delta, axis=1) > radius):
            unique.append(int(i))
    return unique


def _solve(
    system: RootSystem,
    lipschitz: np.ndarray,
    periodic: np.ndarray,
    conf: InvariantSettings,
    what: str,
) -> np.ndarray:
    dim = len(periodic)
    starts = _scan(lambda x: system(x)[0], lipschitz, dim, conf.scan_n)
    if not len(starts):
        return np.zeros((0, dim))
    x, res = _newton(system, starts, periodic, conf)
    inside = np.all(periodic | ((x >= -conf.root_tol) & (x <= 1 + conf.root_tol)), axis=1)
    good = (res < conf.root_tol) & inside
    roots = x[good]
    keep = _dedupe(roots, periodic, max(10 * conf.root_tol, _DEDUPE_FLOOR))
    roots = roots[keep]
    failed = x[~good & inside]
    if len(failed):
        near = [
            bool(len(roots)) and bool(np.any(np.max(np.abs(roots - p), axis=1) < 1e-6))
            for p in failed
        ]
        dropped = len(failed) - int(np.sum(near))
        if dropped:
            logger.warning("{}: dropped {} Newton candidates without convergence", what, dropped)
    return roots


def _check_boundary(root: np.ndarray, periodic: np.ndarray, tol: float, what: str) -> None:
    near = (~periodic) & ((np.abs(root) <= tol) | (np.abs(root - 1.0) <= tol))
    if np.any(near):
        raise AmbiguousPiercingError(
            f"{what}: root at parameters {np.round(root, 12).tolist()} lies on a patch "
            "boundary; split the surface into patches that keep it inside"
        )


def _sign(value: float) -> int:
    return int(np.sign(value))


def find_piercings(
    loop: Loop,
    surface: Surface,
    axis: int,
    root_tol: float | None = None,
    scan_n: int | None = None,
    settings: Settings | None = None,
) -> list[Piercing]:
    """All roots of pi_axis(sigma(t, tb)) = pi_axis(rho(s)), with signs."""
    settings = settings or get_settings()
    conf = settings.INVARIANTS.model_copy(
        update={k: v for k, v in (("root_tol", root_tol), ("scan_n", scan_n)) if v is not None}
    )
    kept = [c for c in range(4) if c != axis]
    piercings: list[Piercing] = []

    for index, patch in enumerate(surface.patches):

        def system(x: np.ndarray, patch=patch) -> tuple[np.ndarray, np.ndarray]:
            rho, drho = loop.evaluate(x[:, 0])
            sigma, dt, dtb = patch.evaluate(x[:, 1], x[:, 2])
            f = (sigma - rho)[:, kept]
            jac = np.stack([-drho[:, kept], dt[:, kept], dtb[:, kept]], axis=-1)
            return f, jac

        speed_t, speed_tb = patch.speed_bounds()
        lipschitz = np.stack([loop.speed_bounds(), speed_t, speed_tb], axis=1)[kept]
        periodic = np.array([True, *patch.periodic])
        what = f"Loop {loop.name} x {surface.name}[{index}] axis {axis}"
        for root in _solve(system, lipschitz, periodic, conf, what):
            _check_boundary(root, periodic, conf.root_tol, what)
            piercings.append(_annotate(loop, surface, index, root, axis, system))

    piercings.sort(key=lambda p: (p.axis, p.s, p.t, p.t_bar))
    logger.info("{} x {} axis {}: {} piercings", loop.name, surface.name, axis, len(piercings))
    return piercings


def _annotate(
    loop: Loop, surface: Surface, index: int, root: np.ndarray, axis: int, system: RootSystem
) -> Piercing:
    s, t, tb = (float(v) for v in root)
    rho, drho = loop.evaluate(s)
    sample = eval_surface(surface.patches[index], t, tb, surface.orientation)
    f, jac = system(root[None, :])
    det = abs(float(np.linalg.det(jac[0])))
    if axis == 0:
        bracket = float(drho[1:] @ sample.j_sigma)
    else:
        i, _, k = next(tr for tr in CYCLIC_TRIPLES if tr[1] == axis)
        bracket = float(drho[k] * sample.jacobians[0, i] - drho[i] * sample.jacobians[0, k])
    height = _sign(float(sample.point[axis] - rho[axis]))
    orientation = _sign(bracket)
    if height == 0:
        raise InvalidStateError(f"Loop {loop.name} meets surface {surface.name} at s={s:.6g}")
    if orientation == 0 or det == 0.0:
        raise AmbiguousPiercingError(f"Loop {loop.name} touches {surface.name} tangentially")
    return Piercing(
        loop=loop.name,
        patch=index,
        s=s,
        t=t,
        t_bar=tb,
        axis=axis,
        orientation_sign=orientation,
        height_sign=height,
        weight=bracket / det,
        residual=float(np.linalg.norm(f)),
    )


def lk_loop_surface(loop: Loop, surface: Surface | None, settings: Settings | None = None) -> int:
    """Signed count orientation x height of the time-projection piercings."""
    if surface is None:
        return 0
    return lk_axis_loop_surface(loop, surface, 0, settings)


def lk_axis_loop_surface(
    loop: Loop, surface: Surface | None, axis: int, settings: Settings | None = None
) -> int:
    """The same signed count in the projection that drops spatial axis `axis`."""
    if surface is None:
        return 0
    piercings = find_piercings(loop, surface, axis, settings=settings)
    return sum(p.orientation_sign * p.height_sign for p in piercings)


def projection_limit(
    hyperlink: Hyperlink, surface: Surface | None, axis: int, settings: Settings | None = None
) -> float:
    """Exact kappa limit of the normalized axis integral: sum of height x weight."""
    if surface is None:
        return 0.0
    return math.fsum(
        p.height_sign * p.weight
        for loop in hyperlink.loops
        for p in find_piercings(loop, surface, axis, settings=settings)
    )


def lk_hyperlink_surface(
    hyperlink: Hyperlink, surface: Surface | None, settings: Settings | None = None
) -> int:
    return sum(lk_loop_surface(loop, surface, settings) for loop in hyperlink.loops)


def gauss_linking_value(l1: Loop, l2: Loop, settings: Settings | None = None) -> float:
    """(1/4 pi) double integral of (r1 - r2) . (dr1 x dr2) / |r1 - r2|^3 over the spatial parts."""
    settings = settings or get_settings()
    quad = settings.QUADRATURE
    grid = np.arange(256) / 256
    p1, p2 = l1.evaluate(grid)[0][:, 1:], l2.evaluate(grid)[0][:, 1:]
    closest = float(np.sqrt(np.min(np.sum((p1[:, None] - p2[None]) ** 2, axis=-1))))
    if closest == 0.0:
        raise InvalidStateError(f"Loops {l1.name} and {l2.name} meet spatially")

    def integrand(x: np.ndarray) -> np.ndarray:
        r1, d1 = l1.evaluate(x[:, 0])
        r2, d2 = l2.evaluate(x[:, 1])
        diff = r1[:, 1:] - r2[:, 1:]
        cross = np.cross(d1[:, 1:], d2[:, 1:])
        dist3 = np.sum(diff**2, axis=1) ** 1.5
        return np.sum(diff * cross, axis=1) / dist3 / (4.0 * np.pi)

    speeds = [float(np.max(lp.speed_bounds()[1:])) for lp in (l1, l2)]
    points = [max(quad.base_points_per_axis, math.ceil(4.0 * sp / closest)) for sp in speeds]
    result = require_converged(
        integrate_unit_cube(2, integrand, quad, points), f"Gauss linking of {l1.name}, {l2.name}"
    )
    return float(result.value)


def gauss_linking_spatial(l1: Loop, l2: Loop, settings: Settings | None = None) -> int:
    value = gauss_linking_value(l1, l2, settings)
    nearest = round(value)
    if abs(value - nearest) >= INTEGER_RESIDUAL:
        raise InsufficientResolutionError(
            f"Gauss linking of {l1.name}, {l2.name} = {value:.4f} is not near an integer; "
            "raise QUADRATURE__BASE_POINTS_PER_AXIS or lower QUADRATURE__REL_TOL"
        )
    return int(nearest)


def crossings(
    y_loop: Loop, rho_loop: Loop, axis: int, settings: Settings | None = None
) -> list[Crossing]:
    """Crossings of the two loops' projections along spatial axis `axis`."""
    settings = settings or get_settings()
    conf = settings.INVARIANTS
    kept = [c for c in SPATIAL_AXES if c != axis]

    def system(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        y, dy = y_loop.evaluate(x[:, 0])
        rho, drho = rho_loop.evaluate(x[:, 1])
        return (y - rho)[:, kept], np.stack([dy[:, kept], -drho[:, kept]], axis=-1)

    lipschitz = np.stack([y_loop.speed_bounds(), rho_loop.speed_bounds()], axis=1)[kept]
    periodic = np.array([True, True])
    what = f"Crossings {y_loop.name} x {rho_loop.name} axis {axis}"
    found = []
    for root in _solve(system, lipschitz, periodic, conf, what):
        s, sb = (float(v) for v in root)
        y, dy = y_loop.evaluate(s)
        rho, drho = rho_loop.evaluate(sb)
        depth = _sign(float(y[axis] - rho[axis]))
        turn = _sign(float(np.cross(dy[1:], drho[1:])[axis - 1]))
        time = _sign(float(y[0] - rho[0]))
        if depth == 0 or time == 0:
            raise InvalidStateError(f"{what}: loops are not time-like at s={s:.6g}, s_bar={sb:.6g}")
        if turn == 0:
            raise InvalidStateError(f"{what}: tangential crossing at s={s:.6g}, s_bar={sb:.6g}")
        residual = float(np.linalg.norm(system(root[None, :])[0]))
        found.append(Crossing(s, sb, axis, depth * turn, time, residual))
    found.sort(key=lambda c: (c.axis, c.s, c.s_bar))
    return found


def crossing_sk(l_bar: Loop, l_under: Loop, settings: Settings | None = None) -> int:
    """Exact kappa limit of I/(4 pi): minus the time-weighted crossing signs of all three views."""
    found = [c for k in SPATIAL_AXES for c in crossings(l_bar, l_under, k, settings)]
    return -sum(c.epsilon * c.time_sign for c in found)


def crossing_sk_hyperlink(
    l_bar: Loop, geometric: Hyperlink, settings: Settings | None = None
) -> int:
    return sum(crossing_sk(l_bar, loop, settings) for loop in geometric.loops)


def sk_from_limit(values: Sequence[float], what: str) -> int:
    """Round the last value of a kappa sweep after checking the tail and the residual."""
    nearest = round(values[-1])
    errors = [max(abs(v - nearest), SK_NOISE_FLOOR) for v in values]
    residual = abs(values[-1] - nearest)
    if residual >= SK_RESIDUAL or not tail_monotone(errors):
        raise NonConvergenceError(
            f"{what}: kappa sweep {[round(v, 4) for v in values]} does not settle on an integer"
        )
    return int(nearest)


def sk_hyperlink(
    l_bar: Loop,
    geometric: Hyperlink,
    schedule: Sequence[float] | None = None,
    settings: Settings | None = None,
) -> int:
    """sum_v of the rounded kappa limit of I/(4 pi) for the pair (l_bar, l_v)."""
    settings = settings or get_settings()
    schedule = list(schedule or settings.SK_SCHEDULE)
    total = 0
    for loop in geometric.loops:
        single = Hyperlink((loop,), "geometric")
        values = [v for _, v, _ in wilson_limit(l_bar, single, schedule, settings)]
        sk = sk_from_limit(values, f"sk({l_bar.name}, {loop.name})")
        logger.info("sk({}, {}) = {} (I/4pi -> {:.5f})", l_bar.name, loop.name, sk, values[-1])
        total += sk
    return total


def time_order(y_loop: Loop, rho_loop: Loop, grid_n: int = 512) -> int:
    """+1 when y_loop is entirely later than rho_loop, -1 when entirely earlier, else 0."""
    s = np.arange(grid_n) / grid_n
    y0 = y_loop.evaluate(s)[0][:, 0]
    r0 = rho_loop.evaluate(s)[0][:, 0]
    if y0.min() > r0.max():
        return 1
    if y0.max() < r0.min():
        return -1
    return 0

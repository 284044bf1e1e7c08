"""Scene and connection files, command dispatch, CSV output."""
# ruff: noqa: T201

import csv
import json
import re
import tomllib
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import ValidationError

from linkcurv.classical.models import ConnectionField, GaussianPolynomial
from linkcurv.classical.services import total_curvature_surface
from linkcurv.cli.plotting import render_convergence
from linkcurv.cli.schemas import (
    CommandFlags,
    ConnectionSchema,
    DiskSchema,
    SceneSchema,
)
from linkcurv.config.settings import Settings, get_settings
from linkcurv.core.exceptions import (
    AppValidationError,
    DuplicateIdentifierError,
    NotFoundError,
    SceneParseError,
    UncoloredMatterError,
)
from linkcurv.core.log_config import logger
from linkcurv.geometry.models import DiskPatch, Hyperlink, Loop, ParamPatch, Patch, Surface
from linkcurv.geometry.services import validate_disjoint
from linkcurv.invariants.services import (
    crossing_sk,
    crossing_sk_hyperlink,
    find_piercings,
    gauss_linking_spatial,
    lk_axis_loop_surface,
    projection_limit,
    sk_hyperlink,
    time_order,
)
from linkcurv.liealg.models import IrrepSpec
from linkcurv.pathintegral.models import Scene
from linkcurv.pathintegral.services import (
    convergence_study,
    f_hat_operator,
    validate_scene,
    z_observable,
)
from linkcurv.quadrature.models import ConvergenceTable
from linkcurv.quadrature.services import validate_schedule

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NONCONVERGENCE = 3

COMMANDS = ("validate", "lk", "sk", "z", "fhat", "converge", "classical")
CSV_COLUMNS = ("kappa", "term", "re_value", "im_value", "err_est", "re_ref", "im_ref", "abs_err")

_TOML_POSITION = re.compile(r"\s*\(at line (\d+), column (\d+)\)")


def _read_text(path: Path) -> str:
    if not path.is_file():
        raise NotFoundError(f"File not found: {path}")
    try:
        return path.read_text(encoding="utf-8")
    except UnicodeDecodeError:
        raise SceneParseError(f"{path.name} is not UTF-8 text") from None


def load_document(path: Path) -> tuple[dict[str, Any], str]:
    """Raw mapping and source text of a TOML or JSON file."""
    text = _read_text(path)
    if path.suffix.lower() == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SceneParseError(exc.msg, exc.lineno, exc.colno) from None
        if not isinstance(data, dict):
            raise SceneParseError("top level must be an object", 1, 1)
        return data, text
    try:
        return tomllib.loads(text), text
    except tomllib.TOMLDecodeError as exc:
        match = _TOML_POSITION.search(str(exc))
        message = _TOML_POSITION.sub("", str(exc))
        if match:
            raise SceneParseError(message, int(match[1]), int(match[2])) from None
        raise SceneParseError(message) from None


def _locate(text: str, loc: Sequence[int | str]) -> tuple[int | None, int | None]:
    """Best-effort 1-based (line, column) of a schema location in TOML text."""
    lines = text.splitlines()
    start, stop, prefix = -1, len(lines), ""
    parts = list(loc)
    while len(parts) >= 2 and isinstance(parts[0], str) and isinstance(parts[1], int):
        prefix = f"{prefix}.{parts[0]}" if prefix else parts[0]
        header = f"[[{prefix}]]"
        hits = [i for i in range(start + 1, stop) if lines[i].strip() == header]
        if parts[1] >= len(hits):
            break
        start = hits[parts[1]]
        stop = next(
            (
                i
                for i in range(start + 1, stop)
                if lines[i].lstrip().startswith("[")
                and not lines[i].strip().startswith((f"[[{prefix}.", f"[{prefix}."))
            ),
            stop,
        )
        parts = parts[2:]
    key = next((p for p in reversed(parts) if isinstance(p, str)), None)
    table_end = next(
        (i for i in range(start + 1, stop) if lines[i].lstrip().startswith("[")), stop
    )
    if key is not None:
        pattern = re.compile(rf"^(\s*){re.escape(key)}\s*=")
        for i in range(start + 1, table_end):
            match = pattern.match(lines[i])
            if match:
                return i + 1, len(match.group(1)) + 1
    if start >= 0:
        return start + 1, 1
    return None, None


def _schema_error(exc: ValidationError, text: str) -> SceneParseError:
    first = exc.errors()[0]
    where = ".".join(str(p) for p in first["loc"]) or "document"
    line, column = _locate(text, first["loc"])
    return SceneParseError(f"{where}: {first['msg']}", line, column)


def _build_patch(schema) -> Patch:
    if isinstance(schema, DiskSchema):
        return DiskPatch(
            np.array(schema.center), np.array(schema.u), np.array(schema.v), schema.radius
        )
    return ParamPatch(np.array(schema.coeffs), schema.basis)


def scene_from_document(data: dict[str, Any], text: str = "") -> Scene:
    """Build an unvalidated Scene from a parsed document."""
    try:
        doc = SceneSchema.model_validate(data)
    except ValidationError as exc:
        raise _schema_error(exc, text) from None

    seen: dict[str, int] = {}
    matter, geometric, colors = [], [], []
    for index, item in enumerate(doc.loops):
        line, _ = _locate(text, ("loops", index, "name"))
        if item.name in seen:
            where = f"line {line}: " if line else ""
            raise DuplicateIdentifierError(f"{where}loop name {item.name!r} is used twice")
        seen[item.name] = index
        try:
            loop = Loop(
                np.array(item.constant),
                np.array(item.cos),
                np.array(item.sin),
                item.orientation,
                item.name,
            )
        except AppValidationError as exc:
            raise SceneParseError(exc.message, *_locate(text, ("loops", index))) from None
        if item.role == "matter":
            matter.append(loop)
            colors.append(IrrepSpec(*item.color) if item.color else None)
        else:
            geometric.append(loop)

    surface = None
    if doc.surfaces:
        orientations = {s.orientation for s in doc.surfaces}
        if len(orientations) != 1:
            raise SceneParseError(
                "surfaces joined into one scene must share an orientation",
                *_locate(text, ("surfaces", 1)),
            )
        patches: list[Patch] = []
        for s_index, surf in enumerate(doc.surfaces):
            for p_index, patch in enumerate(surf.patches):
                try:
                    patches.append(_build_patch(patch))
                except AppValidationError as exc:
                    loc = ("surfaces", s_index, "patches", p_index)
                    raise SceneParseError(exc.message, *_locate(text, loc)) from None
        names = [s.name for s in doc.surfaces]
        if len(set(names)) != len(names):
            raise DuplicateIdentifierError(f"Surface names repeat: {names}")
        surface = Surface(tuple(patches), orientations.pop(), "+".join(names))

    return Scene(
        matter=Hyperlink(tuple(matter), "matter", tuple(colors)),
        geometric=Hyperlink(tuple(geometric), "geometric"),
        surface=surface,
        charge=doc.charge,
        name=doc.name,
    )


def parse_scene(
    path: Path | str, require_colors: bool = False, settings: Settings | None = None
) -> Scene:
    """Parse and fully validate a scene file."""
    path = Path(path)
    data, text = load_document(path)
    scene = validate_scene(scene_from_document(data, text), settings)
    if require_colors:
        for loop, color in zip(scene.matter.loops, scene.matter.colors):
            if color is None:
                raise UncoloredMatterError(f"Matter loop {loop.name} has no color")
    logger.info("Parsed scene {} from {}", scene.name, path)
    return scene


def _patch_document(patch: Patch) -> dict[str, Any]:
    if isinstance(patch, DiskPatch):
        return {
            "kind": "disk",
            "center": patch.center.tolist(),
            "u": patch.u.tolist(),
            "v": patch.v.tolist(),
            "radius": float(patch.radius),
        }
    return {"kind": "param", "basis": patch.basis, "coeffs": patch.coeffs.tolist()}


def _loop_document(loop: Loop, role: str, color: IrrepSpec | None) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "name": loop.name,
        "role": role,
        "orientation": loop.orientation,
        "constant": loop.constant.tolist(),
        "cos": loop.cos.tolist(),
        "sin": loop.sin.tolist(),
    }
    if color is not None:
        doc["color"] = list(color.to_strings())
    return doc


def serialize_scene(scene: Scene) -> str:
    """Canonical JSON form of a scene."""
    loops = [
        _loop_document(loop, "matter", color)
        for loop, color in zip(scene.matter.loops, scene.matter.colors)
    ]
    loops += [_loop_document(loop, "geometric", None) for loop in scene.geometric.loops]
    surfaces = []
    if scene.surface is not None:
        surfaces.append(
            {
                "name": scene.surface.name,
                "orientation": scene.surface.orientation,
                "patches": [_patch_document(p) for p in scene.surface.patches],
            }
        )
    doc = {"name": scene.name, "charge": float(scene.charge), "loops": loops, "surfaces": surfaces}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def parse_connection(path: Path | str) -> ConnectionField:
    """Connection file: [[components]] with slot, terms, width and center."""
    path = Path(path)
    data, text = load_document(path)
    try:
        doc = ConnectionSchema.model_validate(data)
    except ValidationError as exc:
        raise _schema_error(exc, text) from None
    components: dict[tuple[int, int, int], GaussianPolynomial] = {}
    for index, item in enumerate(doc.components):
        i, alpha, beta = item.slot
        terms = np.array(item.terms, dtype=float)
        if alpha > beta:
            alpha, beta = beta, alpha
            terms[:, 0] *= -1.0
        key = (i, alpha, beta)
        if key in components:
            line, _ = _locate(text, ("components", index, "slot"))
            where = f"line {line}: " if line else ""
            raise DuplicateIdentifierError(f"{where}connection slot {key} given twice")
        try:
            components[key] = GaussianPolynomial(terms, item.width, np.array(item.center))
        except AppValidationError as exc:
            raise SceneParseError(exc.message, *_locate(text, ("components", index))) from None
    try:
        return ConnectionField(components)
    except AppValidationError as exc:
        raise SceneParseError(exc.message) from None


def apply_flags(settings: Settings, flags: CommandFlags) -> Settings:
    """One-run copy of the settings with command-line overrides."""
    quad: dict[str, Any] = {}
    if flags.grid is not None:
        quad["base_points_per_axis"] = flags.grid
    if flags.tol is not None:
        quad["rel_tol"] = flags.tol
    if flags.seed is not None:
        quad["seed"] = flags.seed
    update: dict[str, Any] = {"QUADRATURE": settings.QUADRATURE.model_copy(update=quad)}
    if flags.kappa:
        update["KAPPA_SCHEDULE"] = validate_schedule(flags.kappa)
    if flags.out:
        update["OUTPUT_DIR"] = flags.out
    return settings.model_copy(update=update)


def _fmt(value: float | None) -> str:
    return "" if value is None else f"{value:.12e}"


def write_convergence_csv(table: ConvergenceTable, path: Path) -> Path:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in table.rows:
            value = row.value
            ref = row.reference
            writer.writerow(
                [
                    _fmt(row.kappa),
                    row.term,
                    _fmt(None if value is None else value.real),
                    _fmt(None if value is None else value.imag),
                    _fmt(row.error),
                    _fmt(None if ref is None else ref.real),
                    _fmt(None if ref is None else ref.imag),
                    _fmt(row.abs_error),
                ]
            )
    return path


def write_plot_data(table: ConvergenceTable, path: Path) -> Path:
    """kappa against abs_err, one column per term."""
    terms = table.terms()
    kappas = sorted({row.kappa for row in table.rows})
    lookup = {(row.term, row.kappa): row.abs_error for row in table.rows}
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["kappa", *terms])
        for kappa in kappas:
            writer.writerow([_fmt(kappa), *(_fmt(lookup.get((t, kappa))) for t in terms)])
    return path


def _print_algebra(label: str, vector: np.ndarray) -> None:
    plus = ", ".join(f"{v:.10g}" for v in vector[:3])
    minus = ", ".join(f"{v:.10g}" for v in vector[3:])
    print(f"{label}: plus = ({plus}) | minus = ({minus})")


def _cmd_validate(path: Path, flags: CommandFlags, settings: Settings) -> int:
    scene = parse_scene(path, settings=settings)
    separation = validate_disjoint(scene.geometric, scene.surface, settings.TIMELIKE.grid_n)
    print(f"scene {scene.name}: valid")
    print(f"  matter loops:    {', '.join(lp.name for lp in scene.matter.loops) or '-'}")
    print(f"  geometric loops: {', '.join(lp.name for lp in scene.geometric.loops) or '-'}")
    patches = len(scene.surface.patches) if scene.surface else 0
    print(f"  surface patches: {patches}")
    print(f"  time-like check: ok on a {settings.TIMELIKE.grid_n}-point grid")
    print(f"  loop-surface separation: {separation:.6g}")
    return EXIT_OK


def _cmd_lk(path: Path, flags: CommandFlags, settings: Settings) -> int:
    scene = parse_scene(path, settings=settings)
    if scene.surface is None or not scene.has_surface:
        print("lk = 0 (empty surface)")
        return EXIT_OK
    total = 0
    print(f"{'loop':<12} {'patch':>5} {'s':>14} {'t':>14} {'t_bar':>14} {'or':>3} {'ht':>3}")
    for loop in scene.geometric.loops:
        for p in find_piercings(loop, scene.surface, 0, settings=settings):
            total += p.orientation_sign * p.height_sign
            print(
                f"{p.loop:<12} {p.patch:>5} {p.s:>14.10f} {p.t:>14.10f} {p.t_bar:>14.10f} "
                f"{p.orientation_sign:>3} {p.height_sign:>3}"
            )
    print(f"lk = {total}")
    if flags.oracle:
        for axis in (1, 2, 3):
            count = sum(
                lk_axis_loop_surface(loop, scene.surface, axis, settings)
                for loop in scene.geometric.loops
            )
            limit = projection_limit(scene.geometric, scene.surface, axis, settings)
            print(f"  axis {axis}: signed count {count}, kernel limit / pi {limit:.10f}")
    return EXIT_OK


def _cmd_sk(path: Path, flags: CommandFlags, settings: Settings) -> int:
    scene = parse_scene(path, settings=settings)
    code = EXIT_OK
    for l_bar in scene.matter.loops:
        exact = crossing_sk_hyperlink(l_bar, scene.geometric, settings)
        print(f"sk({l_bar.name}) = {exact}")
        if not flags.oracle:
            continue
        limit = sk_hyperlink(l_bar, scene.geometric, settings=settings)
        print(f"  kappa limit of I/(4 pi): {limit}")
        if limit != exact:
            logger.error("sk mismatch for {}: crossings {} vs limit {}", l_bar.name, exact, limit)
            code = EXIT_NONCONVERGENCE
        for loop in scene.geometric.loops:
            tau = time_order(l_bar, loop, settings.TIMELIKE.grid_n)
            if tau == 0:
                print(f"  {loop.name}: time orders interleave, no Gauss check")
                continue
            gauss = gauss_linking_spatial(l_bar, loop, settings)
            pair = crossing_sk(l_bar, loop, settings)
            print(f"  {loop.name}: time order {tau:+d}, Gauss linking {gauss}, sk {pair}")
            expected = -6 * tau * gauss
            if pair != expected:
                logger.error("sk({}, {}) = {}, expected {}", l_bar.name, loop.name, pair, expected)
                code = EXIT_NONCONVERGENCE
    return code


def _cmd_z(path: Path, flags: CommandFlags, settings: Settings) -> int:
    scene = parse_scene(path, require_colors=True, settings=settings)
    z = z_observable(scene, settings=settings)
    print(f"Z = {z:.12g}")
    if not scene.has_surface:
        print("  surface empty: F_S is the identity")
    return EXIT_OK


def _cmd_fhat(path: Path, flags: CommandFlags, settings: Settings) -> int:
    scene = parse_scene(path, require_colors=True, settings=settings)
    value = f_hat_operator(scene, settings)
    if value.algebra is None:
        print(f"F_S is the identity: value = Z = {value.coefficient.real:.12g}")
        return EXIT_OK
    c = value.coefficient
    print(f"coefficient = {c.real:.12g} {c.imag:+.12g}i")
    _print_algebra("algebra", value.algebra.as_vector())
    return EXIT_OK


def _cmd_converge(path: Path, flags: CommandFlags, settings: Settings) -> int:
    scene = parse_scene(path, settings=settings)
    table = convergence_study(scene, settings.KAPPA_SCHEDULE, flags.c_method, settings)
    out = Path(settings.OUTPUT_DIR)
    out.mkdir(parents=True, exist_ok=True)
    write_convergence_csv(table, out / "convergence.csv")
    write_plot_data(table, out / "plot_data.csv")
    if flags.plot:
        render_convergence(table, out / "convergence.png")
    for term in ("total", "Z"):
        rows = table.term(term)
        if rows and rows[-1].value is not None and rows[-1].reference is not None:
            v, r = rows[-1].value, rows[-1].reference
            print(f"{term} at kappa={rows[-1].kappa:g}: {v:.8g} (limit {r:.8g})")
    print(f"tail monotone: {table.tail_monotone}, final within tolerance: {table.final_within_tol}")
    print(f"written to {out}")
    failed = [row for row in table.rows if row.failure is not None]
    if failed or not table.final_within_tol:
        return EXIT_NONCONVERGENCE
    return EXIT_OK


def _cmd_classical(path: Path, flags: CommandFlags, settings: Settings) -> int:
    if not flags.connection:
        raise AppValidationError("classical needs --connection FILE")
    scene = parse_scene(path, settings=settings)
    omega = parse_connection(flags.connection)
    if scene.surface is None:
        print("surface empty: F_S = 0")
        return EXIT_OK
    total = total_curvature_surface(omega, scene.surface, settings)
    _print_algebra("F_S", total.as_vector())
    return EXIT_OK


_HANDLERS: dict[str, Callable[[Path, CommandFlags, Settings], int]] = {
    "validate": _cmd_validate,
    "lk": _cmd_lk,
    "sk": _cmd_sk,
    "z": _cmd_z,
    "fhat": _cmd_fhat,
    "converge": _cmd_converge,
    "classical": _cmd_classical,
}


def run_command(
    cmd: str, scene_path: Path | str, flags: CommandFlags, settings: Settings | None = None
) -> int:
    """Run one command; returns the exit code. Errors propagate as AppError."""
    if cmd not in _HANDLERS:
        raise AppValidationError(f"Unknown command {cmd!r}; expected one of {COMMANDS}")
    settings = apply_flags(settings or get_settings(), flags)
    logger.info("Running {} on {}", cmd, scene_path)
    return _HANDLERS[cmd](Path(scene_path), flags, settings)

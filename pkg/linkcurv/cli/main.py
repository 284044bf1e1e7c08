"""Command-line entry point: linkcurv <command> <scene> [flags]."""
# ruff: noqa: T201

import argparse
import sys
import uuid
from collections.abc import Sequence
from pathlib import Path

from pydantic import ValidationError

from linkcurv.cli.schemas import CommandFlags
from linkcurv.cli.services import (
    COMMANDS,
    EXIT_NONCONVERGENCE,
    EXIT_VALIDATION,
    run_command,
)
from linkcurv.config.settings import get_settings
from linkcurv.core.exceptions import AppError, NonConvergenceError, TimelikeViolationError
from linkcurv.core.log_config import configure, logger


def _kappa_list(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid kappa list: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="linkcurv",
        description="Quantized curvature, Wilson loops and linking numbers of time-like loops.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("scene", help="scene file (.scene / .toml, or .json)")
    parser.add_argument("--kappa", type=_kappa_list, help="comma separated kappa schedule")
    parser.add_argument("--grid", type=int, help="base quadrature points per axis")
    parser.add_argument("--tol", type=float, help="relative quadrature tolerance")
    parser.add_argument("--oracle", action="store_true", help="cross-check independently")
    parser.add_argument("--out", help="output directory for converge")
    parser.add_argument("--seed", type=int, help="seed of the randomized QMC rule")
    parser.add_argument("--connection", help="connection file for classical")
    parser.add_argument("--plot", action="store_true", help="write convergence.png")
    parser.add_argument("--c-method", dest="c_method", default="nested", choices=("nested", "qmc"))
    parser.add_argument("--log-level", dest="log_level", help="override LINKCURV_LOG_LEVEL")
    return parser


def _report(exc: AppError) -> None:
    print(f"error [{exc.code}]: {exc.message}", file=sys.stderr)
    if isinstance(exc, TimelikeViolationError) and exc.report is not None:
        for v in exc.report.violations[:10]:
            print(
                f"  {v.kind}: {v.loop_a}(s={v.s_a:.6g}) vs {v.loop_b}(s={v.s_b:.6g})",
                file=sys.stderr,
            )


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    settings = get_settings()
    configure(args.log_level or settings.LOG_LEVEL)
    try:
        flags = CommandFlags(
            kappa=args.kappa,
            grid=args.grid,
            tol=args.tol,
            oracle=args.oracle,
            out=args.out,
            seed=args.seed,
            connection=args.connection,
            plot=args.plot,
            c_method=args.c_method,
        )
    except ValidationError as exc:
        print(f"error [VALIDATION_ERROR]: {exc.errors()[0]['msg']}", file=sys.stderr)
        return EXIT_VALIDATION

    with logger.contextualize(
        run_id=str(uuid.uuid4())[:8], command=args.command, scene=Path(args.scene).stem
    ):
        try:
            return run_command(args.command, args.scene, flags, settings)
        except NonConvergenceError as exc:
            logger.warning("Run failed to converge: {}", exc.message)
            _report(exc)
            return EXIT_NONCONVERGENCE
        except AppError as exc:
            logger.info("Run rejected: {}", exc.code)
            _report(exc)
            return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())

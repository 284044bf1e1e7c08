"""Loguru logging configuration."""

import sys

from loguru import logger

from linkcurv.config.settings import settings


def formatter(record):
    # one "command scene@kappa" column; kappa only shows inside schedule cells
    extra = record["extra"]
    study = f"{extra['command']} {extra['scene']}"
    if extra["kappa"] != "-":
        study = f"{study}@kappa={extra['kappa']}"
    extra["study"] = study
    return (
        "<green>{elapsed}</green> | "
        "<level>{level: <8}</level> | "
        "<cyan>{extra[run_id]}</cyan> | "
        "<magenta>{extra[study]}</magenta> | "
        "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - "
        "<level>{message}</level>\n{exception}"
    )


def configure(level: str) -> None:
    """Replace every sink with a single stderr sink at the given level."""
    logger.remove()
    logger.add(
        sys.stderr,
        format=formatter,
        level=level.upper(),
        colorize=True,
        enqueue=True,
        backtrace=True,
        diagnose=False,
    )


configure(settings.LOG_LEVEL)

# Default extra values for when contextualize() is not active
logger.configure(extra={"run_id": "-", "command": "-", "scene": "-", "kappa": "-"})

__all__ = ["configure", "logger"]

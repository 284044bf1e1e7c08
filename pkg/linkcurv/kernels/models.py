"""Kernel kinds and axis tables."""

from typing import Literal

KernelKind = Literal["A", "B", "C", "W"]

KERNEL_KINDS: tuple[str, ...] = ("A", "B", "C", "W")

SPATIAL_AXES: tuple[int, int, int] = (1, 2, 3)

# Cyclic triples (i, j, k) of spatial axes.
CYCLIC_TRIPLES: tuple[tuple[int, int, int], ...] = ((1, 2, 3), (2, 3, 1), (3, 1, 2))

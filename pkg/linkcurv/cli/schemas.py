"""Pydantic schemas for scene files, connection files and command flags."""

from typing import Annotated, Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from linkcurv.core.exceptions import InvalidSpinError
from linkcurv.liealg.models import format_spin, parse_spin

Vector4 = Annotated[list[float], Field(min_length=4, max_length=4)]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class LoopSchema(_Strict):
    """Schema for one loop of a scene file."""

    name: str = Field(min_length=1, max_length=100)
    role: Literal["matter", "geometric"]
    orientation: Literal[1, -1] = 1
    constant: Vector4
    cos: list[list[float]] = Field(min_length=4, max_length=4)
    sin: list[list[float]] = Field(min_length=4, max_length=4)
    color: tuple[str | float, str | float] | None = None

    @field_validator("color")
    @classmethod
    def validate_color(cls, v):
        if v is None:
            return v
        try:
            return tuple(format_spin(parse_spin(x)) for x in v)
        except InvalidSpinError as exc:
            raise ValueError(exc.message) from None

    @model_validator(mode="after")
    def validate_harmonics(self):
        widths = {len(row) for row in (*self.cos, *self.sin)}
        if len(widths) != 1 or 0 in widths:
            raise ValueError("cos and sin must be 4 rows of the same positive length")
        if self.role == "geometric" and self.color is not None:
            raise ValueError("geometric loops carry no color")
        return self


class DiskSchema(_Strict):
    """Schema for a disk patch."""

    kind: Literal["disk"]
    center: Vector4
    u: Vector4
    v: Vector4
    radius: float = Field(gt=0)


class ParamSchema(_Strict):
    """Schema for a tensor-product patch."""

    kind: Literal["param"]
    basis: Literal["poly", "trig"] = "poly"
    coeffs: list[list[list[float]]] = Field(min_length=4, max_length=4)

    @model_validator(mode="after")
    def validate_shape(self):
        rows = {len(block) for block in self.coeffs}
        cols = {len(row) for block in self.coeffs for row in block}
        if len(rows) != 1 or len(cols) != 1 or 0 in rows or 0 in cols:
            raise ValueError("coeffs must be a 4 x M x N array")
        return self


PatchSchema = Annotated[DiskSchema | ParamSchema, Field(discriminator="kind")]


class SurfaceSchema(_Strict):
    """Schema for a surface made of patches."""

    name: str = Field(min_length=1, max_length=100)
    orientation: Literal[1, -1] = 1
    patches: list[PatchSchema] = Field(min_length=1)


class SceneSchema(_Strict):
    """Schema for a whole scene file."""

    name: str = Field(default="scene", min_length=1, max_length=100)
    charge: float
    loops: list[LoopSchema] = Field(default_factory=list)
    surfaces: list[SurfaceSchema] = Field(default_factory=list)


class ComponentSchema(_Strict):
    """Schema for one connection component A^i_{ab}."""

    slot: tuple[int, int, int]
    terms: list[tuple[float, float, float, float, float]] = Field(min_length=1)
    width: float = Field(default=0.0, ge=0)
    center: Vector4 = Field(default_factory=lambda: [0.0, 0.0, 0.0, 0.0])


class ConnectionSchema(_Strict):
    """Schema for a connection file."""

    components: list[ComponentSchema] = Field(default_factory=list)


class CommandFlags(BaseModel):
    """Flags shared by every command."""

    kappa: list[float] | None = None
    grid: int | None = Field(default=None, ge=4)
    tol: float | None = Field(default=None, gt=0)
    oracle: bool = False
    out: str | None = None
    seed: int | None = None
    connection: str | None = None
    plot: bool = False
    c_method: Literal["nested", "qmc"] = "nested"

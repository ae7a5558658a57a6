"""Run configuration for the command-line tools."""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, ValidationError, field_validator

from .errors import ConfigError


class Tolerances(BaseModel):
    model_config = ConfigDict(extra="forbid")

    integrator: PositiveFloat = 1e-12
    orbit: PositiveFloat = 1e-10
    unit_circle: PositiveFloat = 1e-9
    resonance: PositiveFloat = 1e-9
    twist: PositiveFloat = 1e-8
    symplectic: PositiveFloat = 1e-8


class SectionSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    index: int = 0
    value: float = 0.0
    period: Optional[PositiveFloat] = 2 * math.pi


class PerturbSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    orbit_id: Optional[str] = None
    energy: Optional[float] = None
    k: int = Field(2, ge=1, le=6)
    times: Union[Literal["auto"], list[float]] = "auto"
    amplitude: float = 1e-2
    half_width: Optional[PositiveFloat] = None
    eps: PositiveFloat = 0.5
    arc: Optional[PositiveFloat] = None
    h: PositiveFloat = 1e-4


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    model: dict
    energies: list[float] = []
    k: int = Field(3, ge=1, le=6)
    tolerances: Tolerances = Tolerances()
    section: SectionSpec = SectionSpec()
    seed: Optional[list[float]] = None
    momentum_guess: Optional[float] = None
    max_newton: int = Field(30, ge=1)
    perturb: Optional[PerturbSpec] = None
    db: Optional[str] = None

    @field_validator("model")
    @classmethod
    def _model_shape(cls, v):
        if "name" not in v and "mass" not in v and "inv_mass" not in v:
            raise ValueError("model needs a 'name' or a kinetic matrix ('mass' or 'inv_mass')")
        return v

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        """sha256 of the canonical (sorted-key, compact) JSON text."""
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def parse_config(text: str) -> RunConfig:
    try:
        return RunConfig.model_validate_json(text)
    except ValidationError as exc:
        raise ConfigError(f"invalid config: {exc}") from exc

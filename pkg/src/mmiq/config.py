"""Strict JSON experiment configuration.

Unknown keys are rejected at every level so that a misspelt rate name
fails loudly instead of silently falling back to a default.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .chain_core import QueueSpec
from .errors import ConfigError, DimensionMismatch, InvalidGenerator
from .model1 import ScalingParams


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class QueueSection(_Strict):
    Q: list[list[float]]
    lam: list[float] = Field(alias="lambda")
    mu: list[float]


class ScalingSection(_Strict):
    N: float = Field(1.0, gt=0)
    alpha: float = Field(1.0, ge=0)


class TimesSection(_Strict):
    grid: Optional[list[float]] = None
    t_star: Optional[float] = Field(None, ge=0)

    @model_validator(mode="after")
    def _one_of(self):
        if (self.grid is None) == (self.t_star is None):
            raise ValueError("exactly one of 'grid' or 't_star' must be given")
        if self.grid is not None:
            if not self.grid:
                raise ValueError("'grid' must not be empty")
            if any(t < 0 for t in self.grid) or any(
                    b <= a for a, b in zip(self.grid, self.grid[1:])):
                raise ValueError("'grid' must be nonnegative and strictly increasing")
        return self

    def values(self) -> list[float]:
        return list(self.grid) if self.grid is not None else [float(self.t_star)]


class SimSection(_Strict):
    replications: int = Field(1000, ge=1)
    seed: int = Field(0, ge=0, lt=2**64)
    engine: Literal["auto", "gillespie", "poisson", "aggregated"] = "auto"


class OutputsSection(_Strict):
    directory: str = "out"
    formats: list[Literal["csv", "gnuplot"]] = ["csv", "gnuplot"]


class Fig2Section(_Strict):
    mu_orderings: list[list[float]] = [[2.0, 1.0], [1.0, 2.0]]
    u_max: float = Field(3.0, gt=0)
    num_u: int = Field(61, ge=2)


class Fig3Section(_Strict):
    alphas: list[float] = [0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0]
    Ns: list[float] = [100.0, 100000.0]
    downscale_to: float = Field(10000.0, gt=0)
    t_star: Optional[float] = Field(None, gt=0)

    @model_validator(mode="after")
    def _two_ns(self):
        if len(self.Ns) != 2:
            raise ValueError("'Ns' must list exactly two scales")
        if any(a <= 0 for a in self.alphas):
            raise ValueError("'alphas' must be positive")
        return self


class FigureSection(_Strict):
    fig2: Fig2Section = Fig2Section()
    fig3: Fig3Section = Fig3Section()


class ExperimentConfig(_Strict):
    """Top-level configuration; see the README for the schema."""

    queue: QueueSection
    model: Literal["I", "II"] = "I"
    scaling: ScalingSection = ScalingSection()
    times: TimesSection
    lag: float = Field(0.0, ge=0)
    sim: SimSection = SimSection()
    outputs: OutputsSection = OutputsSection()
    figure: FigureSection = FigureSection()

    def queue_spec(self, mu=None) -> QueueSpec:
        q = self.queue
        try:
            return QueueSpec.from_arrays(q.Q, q.lam, q.mu if mu is None else mu)
        except InvalidGenerator as exc:
            raise ConfigError(f"queue.Q: {exc}") from exc
        except DimensionMismatch as exc:
            raise ConfigError(f"queue.lambda/queue.mu: {exc}") from exc
        except ValueError as exc:
            field = "queue.mu" if "mu" in str(exc) else "queue.lambda"
            raise ConfigError(f"{field}: {exc}") from exc

    def scaling_params(self) -> ScalingParams:
        return ScalingParams(self.scaling.N, self.scaling.alpha)


def _format_validation(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(x) for x in err["loc"]) or "<root>"
        parts.append(f"{loc}: {err['msg']}")
    return "; ".join(parts)


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    """Parse and validate configuration text.

    Raises
    ------
    ConfigError
        With the line and column of a JSON syntax error, or the dotted path
        of every invalid or missing field.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    try:
        cfg = ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"{source}: {_format_validation(exc)}") from exc
    cfg.queue_spec()
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from exc
    return parse_config(text, str(path))

"""Run configuration: a JSON document validated before any computation.

Example::

    {
      "params": {"K1": 1, "K2": 1, "b1": 1, "b2": 1, "hbar": 1, "t": 1},
      "psi": {"kind": "gaussian", "q0": 0.5, "p0": 0, "var_q": 0.5},
      "grid": "auto",
      "seed": 42,
      "samples": 100000,
      "regime": "joint"
    }

``moments`` may replace ``psi`` for commands that only need second moments
(``evolve``); sampling commands then build the pure Gaussian with those
moments.  Unknown keys anywhere are rejected.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Annotated, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .ak_model import AKParams, SystemMoments

__all__ = [
    "ConfigError",
    "RunConfig",
    "load_config",
    "apply_overrides",
]


class ConfigError(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ParamsModel(_Strict):
    K1: float = 1.0
    K2: float = 1.0
    b1: float = Field(1.0, gt=0)
    b2: float = Field(1.0, gt=0)
    hbar: float = Field(1.0, gt=0)
    t: float = Field(1.0, ge=0)

    def build(self) -> AKParams:
        return AKParams(**self.model_dump())


class MomentsModel(_Strict):
    q0: float = 0.0
    p0: float = 0.0
    var_q: float = Field(0.5, gt=0)
    var_p: float = Field(0.5, gt=0)
    cov_qp: float = 0.0

    def build(self) -> SystemMoments:
        return SystemMoments(**self.model_dump())


class GaussianPsi(_Strict):
    kind: Literal["gaussian"] = "gaussian"
    q0: float = 0.0
    p0: float = 0.0
    var_q: float = Field(0.5, gt=0)
    cov_qp: float = 0.0


class Component(_Strict):
    q0: float = 0.0
    p0: float = 0.0
    var_q: float = Field(0.5, gt=0)
    cov_qp: float = 0.0
    weight: float = 1.0
    phase: float = 0.0


class SuperpositionPsi(_Strict):
    kind: Literal["superposition"]
    components: List[Component] = Field(min_length=1)


class FilePsi(_Strict):
    """JSON file ``{"axis": {min, max, count}, "re": [...], "im": [...]}``."""

    kind: Literal["file"]
    path: str


PsiSpec = Annotated[Union[GaussianPsi, SuperpositionPsi, FilePsi], Field(discriminator="kind")]


class AxisModel(_Strict):
    min: float
    max: float
    count: int


class GridSpec(_Strict):
    count: Optional[int] = None
    q: Optional[AxisModel] = None
    Q1: Optional[AxisModel] = None
    Q2: Optional[AxisModel] = None
    refine: int = 4
    sigmas: float = Field(10.0, gt=0)

    @model_validator(mode="after")
    def _all_or_none(self):
        given = [a is not None for a in (self.q, self.Q1, self.Q2)]
        if any(given) and not all(given):
            raise ValueError("explicit grids need all of q, Q1 and Q2")
        if all(given) and self.count is not None:
            raise ValueError("give either explicit axes or a count, not both")
        return self


class Stage1(_Strict):
    K1: float
    t: float = Field(1.0, ge=0)


class Stage2(_Strict):
    K2: float
    t: float = Field(1.0, ge=0)


class SequentialModel(_Strict):
    stage1: Stage1
    stage2: Stage2


class Tolerances(_Strict):
    symplectic: float = Field(1e-10, gt=0)
    physical: float = Field(1e-10, gt=0)
    quadrature: float = Field(1e-6, gt=0)


class RunConfig(_Strict):
    params: ParamsModel = ParamsModel()
    moments: Optional[MomentsModel] = None
    psi: Optional[PsiSpec] = None
    grid: Union[Literal["auto"], GridSpec] = "auto"
    seed: int = 42
    samples: int = Field(100000, ge=1)
    regime: Literal["joint", "q-only", "p-only", "sequential"] = "joint"
    sequential: Optional[SequentialModel] = None
    output: Optional[str] = None
    curve_points: int = Field(101, ge=2)
    tolerances: Tolerances = Tolerances()

    @model_validator(mode="before")
    @classmethod
    def _default_kind(cls, data):
        if isinstance(data, dict) and isinstance(data.get("psi"), dict) and "kind" not in data["psi"]:
            data = dict(data)
            data["psi"] = {"kind": "gaussian", **data["psi"]}
        return data

    @model_validator(mode="after")
    def _consistent(self):
        if self.moments is not None and self.psi is not None:
            raise ValueError("give either 'moments' or 'psi', not both")
        if self.regime == "sequential" and self.sequential is None:
            raise ValueError("regime 'sequential' needs a 'sequential' block")
        return self

    @property
    def grid_spec(self) -> GridSpec:
        return GridSpec() if self.grid == "auto" else self.grid

    def resolved(self) -> dict:
        return self.model_dump(mode="json")


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(data: dict, assignments) -> dict:
    """Apply ``key.sub=value`` strings; values parse as JSON when possible."""
    data = json.loads(json.dumps(data))
    for item in assignments or ():
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, raw = item.split("=", 1)
        parts = [p for p in key.strip().split(".") if p]
        if not parts:
            raise ConfigError(f"empty key in {item!r}")
        node = data
        for p in parts[:-1]:
            nxt = node.get(p)
            if not isinstance(nxt, dict):
                nxt = {}
                node[p] = nxt
            node = nxt
        node[parts[-1]] = _parse_value(raw)
    return data


def load_config(path=None, overrides=None, **top_level) -> RunConfig:
    """Read, override and validate.  ``top_level`` values win over the file."""
    data = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config root must be a JSON object")
    data = apply_overrides(data, overrides)
    for k, v in top_level.items():
        if v is not None:
            data[k] = v
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc

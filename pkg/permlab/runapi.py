'''
Definitions for the run configuration and the report records written by the runner.

Every record carries schema_version "1". Complex numbers appear as [re, im] pairs.
'''

import dataclasses
import math
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from permlab.matrix_core import EnsembleSpec

SCHEMA_VERSION = "1"

Command = Literal[
    "exact", "coeffs", "roots", "cac", "curve",
    "stats.moment", "stats.rootcount", "stats.jensen", "stats.meanshift", "stats.tail", "stats.safedisk",
    "bw-demo", "sweep", "verify",
]


class RunConfig(BaseModel):
    '''Fully resolved parameters of one run'''
    model_config = ConfigDict(extra="forbid", ser_json_inf_nan="constants")

    schema_version: Literal["1"] = SCHEMA_VERSION
    command: Command
    ensemble: EnsembleSpec | None = None
    method: Literal["ryser", "naive"] = "ryser"

    # continuation
    b: float | None = None
    beta: float = math.e
    delta: float = 1e-3
    m: int = 60
    schedule_floor: int = 4
    continuation: Literal["recentred", "truncated"] = "recentred"
    allow_small_beta: bool = False
    path: str = "auto"

    # curves
    epsilon: float = 0.05
    strategy: Literal["first_clear", "best_clearance", "paper_random"] = "first_clear"
    endpoint_mode: Literal["clamp", "formula"] = "clamp"

    # statistics
    r: float = 1.0
    radii: list[float] = Field(default_factory=lambda: [0.5, 1.0, 2.0])
    trials: int = Field(default=1000, ge=1)
    quad_points: int = Field(default=4096, ge=8)
    mu: float = 0.0
    tail_m: int = 20
    tail_l: int = 5

    # reduction demo
    points: int = 21
    rate: str = "1/8"
    corruptions: int | None = None

    # orchestration
    grid: dict[str, list[float]] = Field(default_factory=dict)
    repeat: int = Field(default=1, ge=1)
    level: Literal["fast", "full"] = "fast"
    threads: int = Field(default=1, ge=1)
    output: str | None = None
    per_trial: str | None = None
    format: Literal["json", "csv"] = "json"


class RunReport(BaseModel):
    model_config = ConfigDict(extra="forbid", ser_json_inf_nan="constants")

    schema_version: Literal["1"] = SCHEMA_VERSION
    command: Command
    config: RunConfig
    result: dict[str, Any]
    elapsed_seconds: float = 0.0


class ErrorDetail(BaseModel):
    code: str
    message: str
    details: dict[str, Any] = Field(default_factory=dict)


class ErrorReport(BaseModel):
    model_config = ConfigDict(ser_json_inf_nan="constants")

    schema_version: Literal["1"] = SCHEMA_VERSION
    error: ErrorDetail


def pair(z: complex) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def jsonable(value: Any) -> Any:
    '''Convert results to JSON-native values: complex as [re, im], tuples and arrays as lists'''
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return jsonable(dataclasses.asdict(value))
    if isinstance(value, BaseModel):
        return value.model_dump(mode="json")
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, set, frozenset)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        return pair(value)
    if isinstance(value, (float, np.floating)):
        return float(value)
    if value is None or isinstance(value, str):
        return value
    return str(value)

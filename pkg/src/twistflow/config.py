"""Scenario configuration: a flat, schema-versioned JSON document.

The resolved configuration is a tree of frozen dataclasses that round-trips
losslessly through ``to_dict``/``from_dict``; unknown or ill-typed fields
fail validation with the offending field named.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .grid import SCHEMES

SCHEMA_VERSION = 1

SUITE_NAMES = ("monotonicity", "blowdown", "max_principle", "lambda",
               "harnack", "uniqueness", "steady_classify")


@dataclass(frozen=True)
class GridConfig:
    n_nodes: int = 128
    scheme: str = "spectral"


@dataclass(frozen=True)
class InitialData:
    """Band-limited initial fields: holonomy plus (mode, cos, sin) triples."""

    holonomy: float = 0.0
    k_modes: tuple = ()
    u_modes: tuple = ()
    f_modes: tuple = ()
    k_const: float = 0.0
    u_const: float = 0.0
    f_const: float = 0.0

    def max_mode(self) -> int:
        modes = [int(m) for m, _, _ in (*self.k_modes, *self.u_modes, *self.f_modes)]
        return max(modes, default=0)


@dataclass(frozen=True)
class FlowConfig:
    t_end: float = 1.0
    checkpoint_interval: float = 0.1
    c_cfl: float = 0.4
    coupled: bool = False
    blow_up_threshold: float = 1e8
    dt_fixed: float | None = None


@dataclass(frozen=True)
class MonotonicityParams:
    window: tuple = (0.15, 0.5)
    fd_interval: float = 1e-3
    tolerance: float = 1e-5


@dataclass(frozen=True)
class BlowdownParams:
    grad_band: tuple = (0.475, 0.525)
    h_cap: float = 0.05
    r_band: tuple = (-1.1, -0.9)
    zero_tol: float = 1e-10   # used when the holonomy vanishes (flat class)


@dataclass(frozen=True)
class MaxPrincipleParams:
    slack: float = 1e-6
    fit_horizon: float = 1.0


@dataclass(frozen=True)
class LambdaParams:
    t_end: float = 0.3
    interval: float = 0.01
    n_random_weights: int = 50
    slack: float = 1e-8
    rayleigh_slack: float = 1e-9


@dataclass(frozen=True)
class HarnackParams:
    window: tuple = (0.1, 0.3)
    fd_interval: float = 1e-3
    tolerance: float = 1e-4
    eval_mode_cap: int = 16


@dataclass(frozen=True)
class UniquenessParams:
    t_end: float = 1.0
    interval: float = 0.1
    alpha_exp: float = 0.5
    perturbation: float = 1e-3
    identical_tol: float = 1e-12
    max_log_slope: float = 50.0
    slope_stability: float = 0.5


@dataclass(frozen=True)
class SteadyClassifyParams:
    tol: float = 1e-8
    expected: str | None = None


@dataclass(frozen=True)
class SuiteParams:
    monotonicity: MonotonicityParams = field(default_factory=MonotonicityParams)
    blowdown: BlowdownParams = field(default_factory=BlowdownParams)
    max_principle: MaxPrincipleParams = field(default_factory=MaxPrincipleParams)
    lam: LambdaParams = field(default_factory=LambdaParams)
    harnack: HarnackParams = field(default_factory=HarnackParams)
    uniqueness: UniquenessParams = field(default_factory=UniquenessParams)
    steady_classify: SteadyClassifyParams = field(default_factory=SteadyClassifyParams)


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "custom"
    schema_version: int = SCHEMA_VERSION
    grid: GridConfig = field(default_factory=GridConfig)
    initial: InitialData = field(default_factory=InitialData)
    flow: FlowConfig = field(default_factory=FlowConfig)
    suites: tuple = ()
    params: SuiteParams = field(default_factory=SuiteParams)
    tolerance_scale: float = 1.0
    seed: int = 1234


_FIELD_ALIASES = {"lambda": "lam"}   # JSON key -> dataclass field


def _to_jsonable(obj):
    if dataclasses.is_dataclass(obj):
        out = {}
        for f in dataclasses.fields(obj):
            key = "lambda" if f.name == "lam" else f.name
            out[key] = _to_jsonable(getattr(obj, f.name))
        return out
    if isinstance(obj, (tuple, list)):
        return [_to_jsonable(x) for x in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def to_dict(config: ScenarioConfig) -> dict:
    return _to_jsonable(config)


def _build(cls, data, path):
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected an object, got {type(data).__name__}")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        name = _FIELD_ALIASES.get(key, key)
        if name not in fields:
            raise ConfigError(f"{path}.{key}: unknown field")
        ftype = fields[name].type
        sub = f"{path}.{key}"
        if dataclasses.is_dataclass(_resolve(ftype)):
            kwargs[name] = _build(_resolve(ftype), value, sub)
        elif isinstance(value, list):
            kwargs[name] = tuple(tuple(x) if isinstance(x, list) else x for x in value)
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


_DATACLASS_MAP = {
    "GridConfig": GridConfig, "InitialData": InitialData, "FlowConfig": FlowConfig,
    "MonotonicityParams": MonotonicityParams, "BlowdownParams": BlowdownParams,
    "MaxPrincipleParams": MaxPrincipleParams, "LambdaParams": LambdaParams,
    "HarnackParams": HarnackParams, "UniquenessParams": UniquenessParams,
    "SteadyClassifyParams": SteadyClassifyParams, "SuiteParams": SuiteParams,
}


def _resolve(ftype):
    if isinstance(ftype, str):
        return _DATACLASS_MAP.get(ftype, str)
    return ftype


def from_dict(data: dict) -> ScenarioConfig:
    cfg = _build(ScenarioConfig, data, "config")
    validate(cfg)
    return cfg


def validate(cfg: ScenarioConfig) -> None:
    if cfg.schema_version != SCHEMA_VERSION:
        raise ConfigError(f"config.schema_version: expected {SCHEMA_VERSION}, "
                          f"got {cfg.schema_version}")
    if cfg.grid.n_nodes < 8:
        raise ConfigError("config.grid.n_nodes: must be >= 8")
    if cfg.grid.scheme not in SCHEMES:
        raise ConfigError(f"config.grid.scheme: must be one of {SCHEMES}")
    if cfg.grid.scheme == "spectral" and cfg.grid.n_nodes % 2:
        raise ConfigError("config.grid.n_nodes: spectral scheme needs an even count")
    if cfg.flow.t_end <= 0:
        raise ConfigError("config.flow.t_end: must be positive")
    if cfg.flow.checkpoint_interval <= 0:
        raise ConfigError("config.flow.checkpoint_interval: must be positive")
    for s in cfg.suites:
        if s not in SUITE_NAMES:
            raise ConfigError(f"config.suites: unknown suite {s!r}; "
                              f"choose from {SUITE_NAMES}")
    for triple_name in ("k_modes", "u_modes", "f_modes"):
        for trip in getattr(cfg.initial, triple_name):
            if len(trip) != 3 or int(trip[0]) < 1:
                raise ConfigError(
                    f"config.initial.{triple_name}: entries are [mode>=1, cos, sin]")
            if int(trip[0]) >= cfg.grid.n_nodes // 2:
                raise ConfigError(
                    f"config.initial.{triple_name}: mode {int(trip[0])} is not "
                    f"resolved on {cfg.grid.n_nodes} nodes")
    if cfg.tolerance_scale <= 0:
        raise ConfigError("config.tolerance_scale: must be positive")
    positives = {
        "params.monotonicity.tolerance": cfg.params.monotonicity.tolerance,
        "params.harnack.tolerance": cfg.params.harnack.tolerance,
        "params.blowdown.h_cap": cfg.params.blowdown.h_cap,
        "params.blowdown.zero_tol": cfg.params.blowdown.zero_tol,
        "params.max_principle.slack": cfg.params.max_principle.slack,
        "params.lambda.slack": cfg.params.lam.slack,
        "params.lambda.rayleigh_slack": cfg.params.lam.rayleigh_slack,
        "params.uniqueness.identical_tol": cfg.params.uniqueness.identical_tol,
        "params.steady_classify.tol": cfg.params.steady_classify.tol,
    }
    for name, val in positives.items():
        if val <= 0:
            raise ConfigError(f"config.{name}: tolerance must be positive")
    if cfg.params.steady_classify.expected is not None:
        allowed = ("FlatTorus", "HyperbolicCuspNormalized", "None")
        if cfg.params.steady_classify.expected not in allowed:
            raise ConfigError(
                f"config.params.steady_classify.expected: must be one of {allowed}")


def dumps(cfg: ScenarioConfig) -> str:
    return json.dumps(to_dict(cfg), indent=2, sort_keys=True) + "\n"


def loads(text: str) -> ScenarioConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config parse error at line {exc.lineno}, "
                          f"column {exc.colno}: {exc.msg}") from exc
    return from_dict(data)


def load_file(path) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return loads(fh.read())

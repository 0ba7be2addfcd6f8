"""Named built-in scenarios mirroring the verification battery."""

from __future__ import annotations

import dataclasses

from .config import (BlowdownParams, FlowConfig, GridConfig, HarnackParams,
                     InitialData, LambdaParams, MonotonicityParams,
                     ScenarioConfig, SteadyClassifyParams, SuiteParams,
                     UniquenessParams)
from .errors import ConfigError


def _presets() -> dict[str, ScenarioConfig]:
    flat = ScenarioConfig(
        name="flat_torus",
        grid=GridConfig(n_nodes=64),
        initial=InitialData(),
        flow=FlowConfig(t_end=10.0, checkpoint_interval=0.1),
        suites=("monotonicity", "blowdown", "max_principle", "lambda",
                "harnack", "uniqueness", "steady_classify"),
        params=SuiteParams(
            monotonicity=MonotonicityParams(window=(0.1, 0.3)),
            harnack=HarnackParams(window=(0.1, 0.3), eval_mode_cap=2),
            uniqueness=UniquenessParams(),
            steady_classify=SteadyClassifyParams(expected="FlatTorus")),
    )
    cusp = ScenarioConfig(
        name="cusp",
        grid=GridConfig(n_nodes=64),
        initial=InitialData(holonomy=1.0),
        flow=FlowConfig(t_end=1.0, checkpoint_interval=0.05),
        suites=("lambda", "steady_classify"),
        params=SuiteParams(
            lam=LambdaParams(t_end=0.5, interval=0.05),
            steady_classify=SteadyClassifyParams(
                expected="HyperbolicCuspNormalized")),
    )
    twisted = ScenarioConfig(
        name="twisted_blowdown",
        grid=GridConfig(n_nodes=128),
        initial=InitialData(holonomy=1.0, k_modes=((1, 0.0, 0.3),)),
        flow=FlowConfig(t_end=200.0, checkpoint_interval=0.5),
        suites=("blowdown", "max_principle"),
        params=SuiteParams(blowdown=BlowdownParams(),
                           steady_classify=SteadyClassifyParams(expected="None")),
    )
    monotone = ScenarioConfig(
        name="monotonicity",
        grid=GridConfig(n_nodes=128),
        initial=InitialData(holonomy=0.0, k_modes=((1, 0.0, 0.2),)),
        flow=FlowConfig(t_end=0.5, checkpoint_interval=1e-3),
        suites=("monotonicity", "lambda"),
        params=SuiteParams(monotonicity=MonotonicityParams(window=(0.15, 0.5)),
                           lam=LambdaParams(t_end=0.3, interval=0.01)),
    )
    monotone_tw = dataclasses.replace(
        monotone,
        name="monotonicity_twisted",
        initial=InitialData(holonomy=1.0, k_modes=((1, 0.0, 0.2),)),
        flow=FlowConfig(t_end=2.0, checkpoint_interval=1e-3),
        suites=("monotonicity",),
        params=SuiteParams(monotonicity=MonotonicityParams(window=(0.5, 2.0))),
    )
    harnack = ScenarioConfig(
        name="harnack",
        grid=GridConfig(n_nodes=128),
        initial=InitialData(holonomy=0.0, k_modes=((1, 0.0, 0.2),)),
        flow=FlowConfig(t_end=0.3, checkpoint_interval=1e-3),
        suites=("harnack",),
        params=SuiteParams(harnack=HarnackParams(window=(0.1, 0.3),
                                                 eval_mode_cap=16)),
    )
    uniq = ScenarioConfig(
        name="uniqueness",
        grid=GridConfig(n_nodes=128),
        initial=InitialData(holonomy=0.0, k_modes=((1, 0.0, 0.2),)),
        flow=FlowConfig(t_end=1.0, checkpoint_interval=0.1),
        suites=("uniqueness",),
    )
    out = {}
    for cfg in (flat, cusp, twisted, monotone, monotone_tw, harnack, uniq):
        out[cfg.name] = cfg
    return out


PRESETS = _presets()


def preset(name: str) -> ScenarioConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; available: "
                          f"{', '.join(sorted(PRESETS))}") from None


def preset_names() -> list[str]:
    return sorted(PRESETS)

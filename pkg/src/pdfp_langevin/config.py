"""INI experiment configuration.

Grammar (``configparser`` syntax, ``#`` or ``;`` comments)::

    [model]
    kind = deblur | illposed | toy1d
    # deblur
    image = path/to/image.pgm        ; optional, else a synthetic phantom
    size = 64                        ; phantom side when no image is given
    kernel = motion:7:horizontal     ; or motion:<length>:vertical
    sigma = 0.01
    lambda_reg = 30
    ridge_eps = 0
    noise_seed = 0
    # illposed
    dim_obs = 64
    dim_param = 64
    condition = 100
    # toy1d
    toy = lasso_posterior | gaussian

    [sampler]
    kind = ula | mala | prox_ula | prox_mala | ula_pdfp | mala_pdfp
    delta = 1e-5
    rho = 1e-5                       ; defaults to delta for proximal kinds
    K = 1
    gamma =                          ; empty: 1/(M2 + 1/rho)
    lam =                            ; empty: 1/lambda_max(BB^T)
    N = 10000
    burn_in = 2000
    thin = 1
    seed = 0
    p0 = literal | prox

    [output]
    directory = out
    traces = false
    ess_coords = 64

    [experiment]                     ; experiment-deblur only
    samplers = ula_pdfp, mala_pdfp
    K = 1, 100
    tune = true                      ; bisect delta=rho for MALA kinds
    tune_steps = 2000
    tune_probes = 8
    warmup = 2000                    ; ULA-PDFP steps from the start point first

Unknown sections or keys are errors, so typos never pass silently.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace
from typing import Optional

from .samplers import SAMPLERS, SamplerConfig

__all__ = [
    "ConfigError",
    "ModelConfig",
    "OutputConfig",
    "ExperimentSpec",
    "ExperimentConfig",
    "parse_config",
    "load_config",
]

MODEL_KINDS = ("deblur", "illposed", "toy1d")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


@dataclass(frozen=True)
class ModelConfig:
    kind: str = "deblur"
    image: Optional[str] = None
    size: int = 64
    kernel: str = "motion:7:horizontal"
    sigma: float = 0.01
    lambda_reg: float = 30.0
    ridge_eps: float = 0.0
    noise_seed: int = 0
    dim_obs: int = 64
    dim_param: int = 64
    condition: float = 100.0
    toy: str = "lasso_posterior"


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "out"
    traces: bool = False
    ess_coords: int = 64


@dataclass(frozen=True)
class ExperimentSpec:
    samplers: tuple = ("ula_pdfp",)
    K: tuple = (1,)
    tune: bool = False
    tune_steps: int = 2000
    tune_probes: int = 8
    warmup: int = 0


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelConfig
    sampler_kind: str
    sampler: SamplerConfig
    output: OutputConfig = field(default_factory=OutputConfig)
    experiment: Optional[ExperimentSpec] = None

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, sampler=replace(self.sampler, seed=int(seed)))


_SCHEMA = {
    "model": {
        "kind": str, "image": str, "size": int, "kernel": str, "sigma": float,
        "lambda_reg": float, "ridge_eps": float, "noise_seed": int, "dim_obs": int,
        "dim_param": int, "condition": float, "toy": str,
    },
    "sampler": {
        "kind": str, "delta": float, "rho": float, "k": int, "gamma": float, "lam": float,
        "n": int, "burn_in": int, "thin": int, "seed": int, "p0": str,
    },
    "output": {"directory": str, "traces": bool, "ess_coords": int},
    "experiment": {"samplers": tuple, "k": tuple, "tune": bool, "tune_steps": int, "tune_probes": int,
                   "warmup": int},
}
_REQUIRED = {"model": ("kind",), "sampler": ("kind", "delta")}


def _convert(section: str, key: str, raw: str, kind):
    where = f"[{section}] {key}"
    raw = raw.strip()
    try:
        if kind is bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind is int:
            return int(raw)
        if kind is float:
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError(raw)
            return v
        if kind is tuple:
            items = tuple(s.strip() for s in raw.split(",") if s.strip())
            return tuple(int(s) for s in items) if key == "k" else items
        return raw
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {raw!r} as {kind.__name__}") from None


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate config text; raises :class:`ConfigError`."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None

    values: dict = {}
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        values[section] = {}
        for key, raw in cp.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"[{section}] unknown key {key!r}")
            if raw.strip() == "" and _SCHEMA[section][key] is not tuple:
                continue  # empty scalar: keep the default
            values[section][key] = _convert(section, key, raw, _SCHEMA[section][key])
    for section, keys in _REQUIRED.items():
        for key in keys:
            if key not in values.get(section, {}):
                raise ConfigError(f"[{section}] {key} is required")

    m = values["model"]
    if m["kind"] not in MODEL_KINDS:
        raise ConfigError(f"[model] kind must be one of {MODEL_KINDS}, got {m['kind']!r}")
    model = ModelConfig(**m)
    if not model.sigma > 0:
        raise ConfigError("[model] sigma must be positive")
    if model.lambda_reg < 0 or model.ridge_eps < 0:
        raise ConfigError("[model] lambda_reg and ridge_eps must be >= 0")

    s = dict(values["sampler"])
    kind = s.pop("kind")
    if kind not in SAMPLERS:
        raise ConfigError(f"[sampler] kind must be one of {SAMPLERS}, got {kind!r}")
    renamed = {"k": "K", "n": "N"}
    s = {renamed.get(k, k): v for k, v in s.items()}
    if kind not in ("ula", "mala") and "rho" not in s:
        s["rho"] = s["delta"]
    try:
        sampler = SamplerConfig(**s)
    except ValueError as exc:
        raise ConfigError(f"[sampler] {exc}") from None

    out = OutputConfig(**values.get("output", {}))
    if out.ess_coords < 1:
        raise ConfigError("[output] ess_coords must be >= 1")

    exp = None
    if "experiment" in values:
        e = {("K" if k == "k" else k): v for k, v in values["experiment"].items()}
        exp = ExperimentSpec(**e)
        if not exp.samplers:
            raise ConfigError("[experiment] samplers must list at least one sampler")
        for name in exp.samplers:
            if name not in SAMPLERS:
                raise ConfigError(f"[experiment] samplers: unknown sampler {name!r}")
        if not exp.K or any(k < 1 for k in exp.K):
            raise ConfigError("[experiment] K must list integers >= 1")
        if exp.tune_probes < 1 or exp.tune_steps < 2:
            raise ConfigError("[experiment] tune_probes >= 1 and tune_steps >= 2 required")
        if exp.warmup < 0:
            raise ConfigError("[experiment] warmup must be >= 0")
    return ExperimentConfig(model, kind, sampler, out, exp)


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())

"""Experiment configuration: dataclass defaults, INI sections, CLI overrides."""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any

import numpy as np

from ..errors import DomainError, PreconditionError
from ..solver import VectorField, constant_field, linear_field, sine_field

COMMANDS = ("gen-fbm", "integrate", "solve", "bound-sweep", "moments", "exp-moments", "crossval")

# default coefficient per bound kind when ``field`` is left empty
KIND_FIELDS = {"bounded_24": "bounded_sine", "linear_growth_25": "linear", "stability_32": "linear"}


@dataclass(frozen=True)
class ExperimentConfig:
    # driver
    hurst: float = 0.75
    beta: float = 0.6
    n_steps: int = 1024
    horizon: float = 1.0
    fbm_method: str = "auto"
    seed: int = 12345
    # equation
    field: str = ""
    x0: float = 1.0
    # Monte Carlo
    n_paths: int = 1000
    p: tuple[float, ...] = (2.0, 4.0)
    gamma: float = 1.0
    lambda_exp: float = 1.0
    n_boot: int = 1000
    chunk: int = 250
    # bound sweeps
    kind: str = "bounded_24"
    n_train: int = 100
    n_holdout: int = 100
    horizon_range: tuple[float, ...] = (0.5, 2.0)
    scale_range: tuple[float, ...] = (0.5, 2.0)
    x0_range: tuple[float, ...] = (-2.0, 2.0)
    gap_range: tuple[float, ...] = (0.1, 1.0)
    # cross-validation and single integrals
    hursts: tuple[float, ...] = (0.6, 0.75, 0.9)
    n_pairs: int = 50
    alpha: float = 0.0
    oversample: int = 8
    # path generation
    gen_paths: int = 1
    # runtime
    threads: int = 1
    out: str = "out"
    format: str = "csv"

    def __post_init__(self) -> None:
        if not 0.5 < self.hurst < 1.0:
            raise PreconditionError(f"hurst must lie in (1/2, 1), got {self.hurst}")
        if not 0.5 < self.beta < self.hurst:
            raise PreconditionError(f"beta must lie in (1/2, hurst), got {self.beta}")
        if self.n_steps < 2 or self.n_steps & (self.n_steps - 1):
            raise PreconditionError(f"n_steps must be a power of two, got {self.n_steps}")
        if self.horizon <= 0 or self.n_paths < 1 or self.n_boot < 1 or self.chunk < 1:
            raise PreconditionError("horizon, n_paths, n_boot and chunk must be positive")
        if self.gamma <= 0 or self.lambda_exp < 0:
            raise PreconditionError("gamma must be positive and lambda_exp nonnegative")
        if any(q < 1 for q in self.p) or not self.p:
            raise PreconditionError("moment orders must be >= 1")
        if self.kind not in KIND_FIELDS:
            raise PreconditionError(f"unknown bound kind {self.kind!r}")
        if self.n_train < 1 or self.n_holdout < 0 or self.n_pairs < 1 or self.gen_paths < 1:
            raise PreconditionError("sweep sizes must be positive")
        for name in ("horizon_range", "scale_range", "x0_range", "gap_range"):
            lo, hi = _range(self, name)
            if lo > hi:
                raise PreconditionError(f"{name} must be (low, high) with low <= high")
        if _range(self, "horizon_range")[0] <= 0 or _range(self, "scale_range")[0] < 0:
            raise PreconditionError("horizons must be positive and driver scales nonnegative")
        if any(not 0.5 < h < 1.0 for h in self.hursts):
            raise PreconditionError("crossval hursts must lie in (1/2, 1)")
        if not (self.alpha == 0.0 or 0.0 < self.alpha < 1.0) or self.oversample < 1:
            raise PreconditionError("alpha must be 0 (automatic) or in (0, 1); oversample >= 1")
        if self.threads < 1 or self.format not in ("csv", "json"):
            raise PreconditionError("threads must be >= 1 and format one of csv, json")

    @property
    def n_points(self) -> int:
        return self.n_steps + 1

    def require_exp_order(self) -> None:
        if not self.gamma < 2.0 * self.beta:
            raise PreconditionError(
                f"exponential moments need gamma < 2 beta, got {self.gamma} >= {2 * self.beta}"
            )

    def field_name(self) -> str:
        return self.field or KIND_FIELDS[self.kind]

    def to_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _range(cfg: ExperimentConfig, name: str) -> tuple[float, float]:
    r = getattr(cfg, name)
    if len(r) != 2:
        raise PreconditionError(f"{name} needs exactly two values")
    return float(r[0]), float(r[1])


def parse_value(name: str, text: str) -> Any:
    """Convert a text value to the type of the matching config field."""
    defaults = {f.name: f.default for f in fields(ExperimentConfig)}
    if name not in defaults:
        raise PreconditionError(f"unknown config key {name!r}")
    default = defaults[name]
    text = text.strip()
    try:
        if isinstance(default, bool):
            return text.lower() in ("1", "true", "yes", "on")
        if isinstance(default, int):
            return int(text, 0)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            return tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())
    except ValueError as exc:
        raise PreconditionError(f"bad value for {name}: {text!r}") from exc
    return text


def format_value(value: Any) -> str:
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def load_config(
    command: str, path: str | Path | None = None, overrides: dict[str, Any] | None = None
) -> ExperimentConfig:
    """Defaults, then ``[common]``, then ``[<command>]``, then explicit overrides."""
    values: dict[str, Any] = {}
    if path is not None:
        parser = configparser.ConfigParser()
        if not parser.read(path):
            raise PreconditionError(f"cannot read config file {path}")
        for section in ("common", command):
            if parser.has_section(section):
                for key, text in parser.items(section):
                    values[key] = parse_value(key, text)
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return replace(ExperimentConfig(), **values)


def write_config(cfg: ExperimentConfig, command: str, path: str | Path) -> None:
    parser = configparser.ConfigParser()
    parser[command] = {k: format_value(v) for k, v in cfg.to_dict().items()}
    with open(path, "w") as fh:
        parser.write(fh)


def make_field(name: str) -> VectorField:
    """Coefficient by name: ``bounded_sine`` ((2 + sin x)/3), ``sine`` (2 + sin x),
    ``linear`` (x), ``linear:a:b`` (a x + b), ``constant:c``, ``zero``."""
    head, *args = name.split(":")
    try:
        nums = [float(a) for a in args]
    except ValueError as exc:
        raise PreconditionError(f"bad field parameters in {name!r}") from exc
    if head == "bounded_sine" and not nums:
        return sine_field(2.0, 1.0 / 3.0)
    if head == "sine" and len(nums) <= 2:
        return sine_field(*(nums or [2.0]))
    if head == "linear" and len(nums) <= 2:
        return linear_field(*nums)
    if head == "constant" and len(nums) == 1:
        return constant_field(nums[0])
    if head == "zero" and not nums:
        return constant_field(0.0)
    raise PreconditionError(f"unknown field {name!r}")


def linear_slope(name: str) -> float | None:
    """Slope a when the named field is f(x) = a x (so the solution is explicit)."""
    head, *args = name.split(":")
    if head != "linear" or len(args) > 2 or (len(args) == 2 and float(args[1]) != 0.0):
        return None
    return float(args[0]) if args else 1.0


def config_fields() -> list[dataclasses.Field]:
    return list(fields(ExperimentConfig))


def rng_uniform(rng: np.random.Generator, bounds: tuple[float, ...]) -> float:
    lo, hi = float(bounds[0]), float(bounds[1])
    return lo if lo == hi else float(rng.uniform(lo, hi))

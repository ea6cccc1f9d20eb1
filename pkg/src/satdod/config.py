"""Experiment configuration: a YAML tree mapped onto the parameter dataclasses."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import yaml

from .baselines import SolverOptions
from .dynamics import PowerParams
from .environment import EnvParams
from .oco import OcoParams
from .scheduler import PatternPartition, SchedulerOptions

POLICIES = ("ours", "pattern", "dynamic", "greedy")
# config sections and the dataclass each one fills
SECTIONS = {
    "env": EnvParams,
    "power": PowerParams,
    "partition": PatternPartition,
    "scheduler": SchedulerOptions,
    "solver": SolverOptions,
}
_TOP = ("horizon", "seeds", "policies", "out_dir", "theory_mode", "jobs")
# fields that accept null
_NULLABLE = {"oco": ("alpha", "gamma", "eta"), "scheduler": ("grad_clip_factor",)}
# scheduler fields that cannot come from a text file
_CODE_ONLY = {"pattern"}


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` holds ``field: message`` strings."""

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = list(errors)


@dataclass(frozen=True)
class OcoSpec:
    """Learner parameters; ``None`` entries follow the horizon-based schedule."""

    beta: float = 14.0
    alpha: float | None = None
    gamma: float | None = None
    eta: float | None = None

    def resolve(self, horizon: int) -> OcoParams:
        base = OcoParams.from_horizon(horizon, self.beta)
        return OcoParams(
            alpha=base.alpha if self.alpha is None else self.alpha,
            gamma=base.gamma if self.gamma is None else self.gamma,
            beta=self.beta,
            eta=base.eta if self.eta is None else self.eta,
        )


@dataclass(frozen=True)
class SweepSpec:
    param: str | None = None
    values: tuple = ()


@dataclass
class ExperimentConfig:
    env: EnvParams = field(default_factory=EnvParams)
    power: PowerParams = field(default_factory=PowerParams)
    oco: OcoSpec = field(default_factory=OcoSpec)
    partition: PatternPartition = field(default_factory=PatternPartition)
    scheduler: SchedulerOptions = field(default_factory=SchedulerOptions)
    solver: SolverOptions = field(default_factory=SolverOptions)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    horizon: int = 1440
    seeds: tuple[int, ...] = (0,)
    policies: tuple[str, ...] = POLICIES
    out_dir: str = "results"
    theory_mode: bool = False
    jobs: int = 1

    def oco_params(self) -> OcoParams:
        return self.oco.resolve(self.horizon)

    def with_value(self, param: str, value) -> "ExperimentConfig":
        """Copy with one (possibly dotted) parameter replaced."""
        section, name = resolve_param(param)
        if section is None:
            return dataclasses.replace(self, **{name: value})
        part = getattr(self, section)
        if not (value is None and name in _NULLABLE.get(section, ())):
            try:
                value = _coerce(type(part), name, value)
            except ValueError as exc:
                raise ConfigError([f"{section}.{exc}"]) from None
        return dataclasses.replace(self, **{section: dataclasses.replace(part, **{name: value})})

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return dataclasses.replace(self, env=dataclasses.replace(self.env, seed=int(seed)))


def _sections() -> dict[str, type]:
    return {**SECTIONS, "oco": OcoSpec}


def _field_names(cls) -> list[str]:
    return [f.name for f in dataclasses.fields(cls) if f.name not in _CODE_ONLY]


def resolve_param(param: str) -> tuple[str | None, str]:
    """Map ``section.field`` or a bare field name to (section, field).

    Bare names must be unambiguous across sections; top-level keys such as
    ``horizon`` resolve to section ``None``.
    """
    secs = _sections()
    if "." in param:
        section, name = param.split(".", 1)
        if section not in secs or name not in _field_names(secs[section]):
            raise ConfigError([f"sweep.param: no config field named {param!r}"])
        return section, name
    if param in ("horizon",):
        return None, param
    hits = [s for s, cls in secs.items() if param in _field_names(cls)]
    if len(hits) != 1:
        why = "ambiguous" if hits else "unknown"
        raise ConfigError([f"sweep.param: {why} field name {param!r}"])
    return hits[0], param


def _coerce(cls, name: str, value):
    """Match ``value`` to the field's default type; raises ValueError on mismatch."""
    default = next(f for f in dataclasses.fields(cls) if f.name == name).default
    if isinstance(default, tuple) and isinstance(value, list):
        return tuple(_number(v, name) for v in value)
    if isinstance(default, float) and not isinstance(value, bool):
        # YAML 1.1 reads exponents without a sign ("8e7") as strings
        return _number(value, name)
    if isinstance(default, bool) and not isinstance(value, bool):
        raise ValueError(f"{name}: expected true or false")
    if isinstance(default, int) and not isinstance(default, bool) and not isinstance(value, int):
        raise ValueError(f"{name}: expected an integer")
    return value


def _number(value, name: str) -> float:
    if isinstance(value, bool):
        raise ValueError(f"{name}: expected a number")
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ValueError(f"{name}: expected a number, got {value!r}") from None


def _build(cls, section: str, raw: Any, errors: list[str]):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        errors.append(f"{section}: expected a mapping")
        return cls()
    names = _field_names(cls)
    kw = {}
    for key, value in raw.items():
        if key not in names:
            errors.append(f"{section}.{key}: unknown field")
            continue
        if value is None and key in _NULLABLE.get(section, ()):
            kw[key] = None
            continue
        try:
            kw[key] = _coerce(cls, key, value)
        except ValueError as exc:
            errors.append(f"{section}.{exc}")
    try:
        return cls(**kw)
    except (TypeError, ValueError) as exc:
        errors.append(f"{section}: {exc}")
        return cls()


def from_dict(data: dict | None) -> ExperimentConfig:
    data = dict(data or {})
    errors: list[str] = []
    kw: dict[str, Any] = {}
    for section, cls in _sections().items():
        kw[section] = _build(cls, section, data.pop(section, None), errors)
    sweep = data.pop("sweep", None) or {}
    if not isinstance(sweep, dict) or set(sweep) - {"param", "values"}:
        errors.append("sweep: expected keys 'param' and 'values'")
    else:
        kw["sweep"] = SweepSpec(sweep.get("param"), tuple(sweep.get("values") or ()))
    for key in list(data):
        if key not in _TOP:
            errors.append(f"{key}: unknown field")
            data.pop(key)
    if "seeds" in data:
        seeds = data.pop("seeds")
        kw["seeds"] = tuple(seeds) if isinstance(seeds, (list, tuple)) else (seeds,)
    if "policies" in data:
        kw["policies"] = tuple(data.pop("policies") or ())
    kw.update(data)
    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(**kw)


def to_dict(cfg: ExperimentConfig) -> dict:
    out: dict[str, Any] = {}
    for section in _sections():
        obj = getattr(cfg, section)
        out[section] = {n: _plain(getattr(obj, n)) for n in _field_names(type(obj))}
    out["sweep"] = {"param": cfg.sweep.param, "values": list(cfg.sweep.values)}
    for key in _TOP:
        out[key] = _plain(getattr(cfg, key))
    return out


def _plain(v):
    return list(v) if isinstance(v, tuple) else v


def load_config(path: str | Path | None = None) -> ExperimentConfig:
    """Read a YAML config; ``None`` loads the packaged default."""
    if path is None:
        text = resources.files("satdod").joinpath("default_config.yaml").read_text()
    else:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError([f"config: cannot read {path}: {exc.strerror}"]) from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([f"config: not valid YAML ({exc})"]) from exc
    if data is not None and not isinstance(data, dict):
        raise ConfigError(["config: top level must be a mapping"])
    return from_dict(data)


def validate_config(cfg: ExperimentConfig, theory_mode: bool | None = None) -> tuple[list[str], list[str]]:
    """Return (errors, warnings) as ``field: message`` strings."""
    theory = cfg.theory_mode if theory_mode is None else theory_mode
    errors: list[str] = []
    warns: list[str] = []
    for section in ("env", "power", "partition"):
        errors += [f"{section}.{e}" for e in getattr(cfg, section).validate()]
    if cfg.env.slot_duration != cfg.power.slot_duration:
        errors.append("power.slot_duration: must equal env.slot_duration")
    if not isinstance(cfg.horizon, int) or cfg.horizon < 1:
        errors.append("horizon: must be a positive integer")
    if len(cfg.seeds) < 1:
        errors.append("seeds: need at least one seed")
    if any(not isinstance(s, int) or isinstance(s, bool) for s in cfg.seeds):
        errors.append("seeds: must be integers")
    if not cfg.policies:
        errors.append("policies: need at least one policy")
    for p in cfg.policies:
        if p not in POLICIES:
            errors.append(f"policies: unknown policy {p!r}")
    if not isinstance(cfg.jobs, int) or cfg.jobs < 1:
        errors.append("jobs: must be a positive integer")
    errors += _scheduler_errors(cfg.scheduler)
    if cfg.solver.tolerance <= 0:
        errors.append("solver.tolerance: must be positive")
    if cfg.solver.max_iters < 1:
        errors.append("solver.max_iters: must be positive")
    if cfg.sweep.param is not None:
        try:
            resolve_param(cfg.sweep.param)
        except ConfigError as exc:
            errors += exc.errors
        if not cfg.sweep.values:
            errors.append("sweep.values: need at least one value")
    if isinstance(cfg.horizon, int) and cfg.horizon >= 1:
        e, w = cfg.oco_params().validate(theory)
        errors += [f"oco.{m}" for m in e]
        warns += [f"oco.{m}" for m in w]
    return errors, warns


def _scheduler_errors(opts: SchedulerOptions) -> list[str]:
    errs = []
    choices = {
        "scaling": ("normalized", "native"),
        "vq_scope": ("global", "window"),
        "init": ("midpoint", "previous", "origin"),
        "queue": ("max", "banked"),
    }
    for name, allowed in choices.items():
        if getattr(opts, name) not in allowed:
            errs.append(f"scheduler.{name}: must be one of {', '.join(allowed)}")
    if opts.g_scale <= 0:
        errs.append("scheduler.g_scale: must be positive")
    if opts.obj_scale <= 0:
        errs.append("scheduler.obj_scale: must be positive")
    if opts.snr_min <= 0:
        errs.append("scheduler.snr_min: must be positive")
    if opts.grad_clip_factor is not None and opts.grad_clip_factor <= 0:
        errs.append("scheduler.grad_clip_factor: must be positive or null")
    return errs

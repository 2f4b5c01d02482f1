"""Flat ``key = value`` experiment configuration files.

Blank lines and ``#`` comments are ignored. Unset keys take the defaults of
the selected source (the standard Lorenz values, or the slower-sampling preset
for Roessler). Unknown or repeated keys are errors. See ``docs/config.md``.
"""

from __future__ import annotations

from dataclasses import replace
from pathlib import Path

from .dynamics import LORENZ_PARAMS, ROESSLER_PARAMS, SourceSpec
from .experiments import ExperimentConfig, lorenz_config, roessler_config


class ConfigError(ValueError):
    pass


def _pair(text: str):
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise ValueError(f"expected two comma-separated numbers, got {text!r}")
    return (float(parts[0]), float(parts[1]))


def _choice(*options):
    def conv(text: str) -> str:
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return text

    return conv


def _positive(conv):
    def wrapped(text):
        v = conv(text)
        if not v > 0:
            raise ValueError(f"must be > 0, got {text}")
        return v

    return wrapped


def _non_negative(conv):
    def wrapped(text):
        v = conv(text)
        if v < 0:
            raise ValueError(f"must be >= 0, got {text}")
        return v

    return wrapped


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return v


# key -> converter, in canonical output order
SCHEMA = {
    "source": _choice("lorenz", "roessler"),
    "task": _choice("observer", "forecast"),
    "horizon_steps": _non_negative(int),
    "reservoir_dim": _positive(int),
    "spectral_radius": _positive(float),
    "input_scaling": _non_negative(float),
    "bias": float,
    "avg_degree": _positive(int),
    "tau": _positive(float),
    "substeps": _positive(int),
    "t_train": _pair,
    "t_test": _pair,
    "washout_fraction": _non_negative(float),
    "lambda": _non_negative(float),
    "repetitions": _positive(int),
    "root_seed": _seed,
    "source_washout": _non_negative(float),
    "theiler_window": _non_negative(int),
    "mfnn_subsample": _positive(int),
    "replica_threshold": _positive(float),
    "lorenz.sigma": float,
    "lorenz.rho": float,
    "lorenz.beta": float,
    "roessler.a": float,
    "roessler.b": float,
    "roessler.c": float,
}

_RESERVOIR_KEYS = {
    "reservoir_dim": "d_r",
    "spectral_radius": "spectral_radius",
    "input_scaling": "input_scaling",
    "bias": "bias",
    "avg_degree": "avg_degree",
}
_PLAIN_KEYS = {
    "task": "task",
    "horizon_steps": "horizon_steps",
    "tau": "tau",
    "substeps": "substeps",
    "t_train": "t_train",
    "t_test": "t_test",
    "washout_fraction": "washout_fraction",
    "lambda": "lam",
    "repetitions": "repetitions",
    "root_seed": "root_seed",
    "source_washout": "source_washout",
    "theiler_window": "theiler_window",
    "mfnn_subsample": "mfnn_subsample",
    "replica_threshold": "replica_threshold",
}


def parse_text(text: str, origin: str = "<config>") -> ExperimentConfig:
    values: dict = {}
    lines: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, _, value = (p.strip() for p in line.partition("="))
        if key not in SCHEMA:
            raise ConfigError(f"{origin}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{origin}:{lineno}: duplicate key {key!r} (first set on line {lines[key]})")
        try:
            values[key] = SCHEMA[key](value)
        except ValueError as exc:
            raise ConfigError(f"{origin}:{lineno}: bad value for {key}: {exc}") from None
        lines[key] = lineno

    kind = values.get("source", "lorenz")
    for key in values:
        prefix = key.split(".", 1)[0] if "." in key else None
        if prefix is not None and prefix != kind:
            raise ConfigError(f"{origin}:{lines[key]}: {key} does not apply to source {kind!r}")

    cfg = roessler_config() if kind == "roessler" else lorenz_config()
    defaults = ROESSLER_PARAMS if kind == "roessler" else LORENZ_PARAMS
    params = {k: values.get(f"{kind}.{k}", v) for k, v in defaults.items()}
    try:
        source = SourceSpec(kind, params)
        res = replace(cfg.reservoir, **{f: values[k] for k, f in _RESERVOIR_KEYS.items() if k in values})
        cfg = replace(
            cfg,
            source=source,
            reservoir=res,
            **{f: values[k] for k, f in _PLAIN_KEYS.items() if k in values},
        )
    except ValueError as exc:
        raise ConfigError(f"{origin}: invalid configuration: {exc}") from None
    return cfg


def parse_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_text(path.read_text(), str(path))


def _fmt(v) -> str:
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def to_mapping(cfg: ExperimentConfig) -> dict:
    """Every schema key that applies to ``cfg``, resolved, in canonical order."""
    out = {"source": cfg.source.kind}
    out["task"] = cfg.task
    out["horizon_steps"] = cfg.horizon_steps
    for key, attr in _RESERVOIR_KEYS.items():
        out[key] = getattr(cfg.reservoir, attr)
    for key, attr in _PLAIN_KEYS.items():
        if key not in out:
            out[key] = getattr(cfg, attr)
    for k, v in cfg.source.params.items():
        out[f"{cfg.source.kind}.{k}"] = float(v)
    return {k: out[k] for k in SCHEMA if k in out}


def serialize(cfg: ExperimentConfig) -> str:
    return "".join(f"{k} = {_fmt(v)}\n" for k, v in to_mapping(cfg).items())

"""Experiment configuration: JSON in, validated dataclass out.

A config file is a single JSON object.  Unknown keys are rejected rather
than ignored so a typo cannot silently fall back to a default.  Every
validation error carries a location: either ``file:line:col`` for syntax
errors or a ``$.key.path`` for semantic ones.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, fields
from typing import Any

from ..errors import ConfigError

KINDS = (
    "uv-timescale",
    "matrix-sensing",
    "spectral-report",
    "drift-compare",
    "beta-star-protocol",
)

# Full-size matrix sensing is expensive; it hides behind an explicit flag.
PAPER_SCALE_SENSING = {"d": 100, "rank": 5, "n_samples": 2500}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    model: dict = field(default_factory=dict)
    gammas: tuple = ()
    scaling_constant: float = 0.2
    eta: float = 0.01
    eta_grid: tuple = ()
    betas: tuple = ()
    epsilon: float = 0.5
    noise: str = "gaussian"
    flip_probability: float = 0.2
    seeds: int = 3
    max_steps: int = 2_000_000
    record_every: int = 0  # 0 means: choose per cell from the expected timescale
    stop_norm_factor: float = 0.1
    segment_steps: int = 200
    phase_steps: int = 20_000
    paper_scale: bool = False

    def hashable(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out


def config_hash(cfg: ExperimentConfig) -> str:
    blob = json.dumps(cfg.hashable(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def default_config(kind: str) -> dict:
    """Baseline settings for each experiment kind, as a plain dict."""
    if kind not in KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r}; expected one of {', '.join(KINDS)}", location="$.kind")
    base: dict[str, Any] = {"kind": kind}
    if kind == "uv-timescale":
        base.update(
            model={"n": 10, "n_samples": 5},
            gammas=[0.3, 0.5, 2.0 / 3.0, 0.8],
            scaling_constant=0.2,
            eta_grid=_log_grid(1e-3, 1e-1, 6),
            epsilon=0.5,
            seeds=3,
            max_steps=2_000_000,
        )
    elif kind == "matrix-sensing":
        base.update(
            model={"d": 20, "rank": 2, "n_samples": 200},
            eta=0.1,
            epsilon=math.sqrt(0.1),
            betas=[0.0, 0.5, 0.8, 0.9, 0.95, 0.97, 0.99],
            seeds=1,
            phase_steps=30_000,
        )
    elif kind == "spectral-report":
        base.update(
            model={"n": 10, "n_samples": 5},
            eta=0.01,
            gammas=[2.0 / 3.0],
            scaling_constant=0.2,
            seeds=1,
        )
    elif kind == "drift-compare":
        base.update(
            model={"n": 10, "n_samples": 5},
            eta=0.01,
            gammas=[0.5],
            scaling_constant=0.2,
            epsilon=0.5,
            seeds=1,
            max_steps=150_000,
            segment_steps=200,
        )
    else:  # beta-star-protocol
        base.update(
            model={"d_in": 16, "width": 32, "d_out": 1, "n_train": 256, "n_test": 2048},
            eta_grid=[0.025, 0.05, 0.1],
            betas=[0.8, 0.9, 0.93, 0.95, 0.97, 0.98, 0.99],
            noise="sign-resample",
            flip_probability=0.2,
            seeds=3,
            phase_steps=20_000,
        )
    return base


_FIELD_TYPES = {
    "kind": str,
    "model": dict,
    "gammas": list,
    "scaling_constant": (int, float),
    "eta": (int, float),
    "eta_grid": list,
    "betas": list,
    "epsilon": (int, float),
    "noise": str,
    "flip_probability": (int, float),
    "seeds": int,
    "max_steps": int,
    "record_every": int,
    "stop_norm_factor": (int, float),
    "segment_steps": int,
    "phase_steps": int,
    "paper_scale": bool,
}

_POSITIVE = ("scaling_constant", "eta", "seeds", "max_steps", "stop_norm_factor", "segment_steps", "phase_steps")
_NONNEGATIVE = ("epsilon", "record_every")


def _log_grid(lo: float, hi: float, num: int) -> list:
    step = (math.log(hi) - math.log(lo)) / (num - 1)
    return [math.exp(math.log(lo) + i * step) for i in range(num)]


def _check_numbers(path: str, seq, lo=None, hi=None) -> tuple:
    vals = []
    for i, v in enumerate(seq):
        here = f"{path}[{i}]"
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"expected a number, got {type(v).__name__}", location=here)
        v = float(v)
        if not math.isfinite(v):
            raise ConfigError("value must be finite", location=here)
        if lo is not None and v <= lo:
            raise ConfigError(f"value must be greater than {lo}", location=here)
        if hi is not None and v >= hi:
            raise ConfigError(f"value must be less than {hi}", location=here)
        vals.append(v)
    return tuple(vals)


def from_mapping(raw: dict, where: str = "config") -> ExperimentConfig:
    """Validate a plain mapping (already parsed JSON) into a config."""
    if not isinstance(raw, dict):
        raise ConfigError(f"top level must be a JSON object, got {type(raw).__name__}", location=where)
    kind = raw.get("kind")
    if kind is None:
        raise ConfigError("missing required key", location="$.kind")
    if kind not in KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r}; expected one of {', '.join(KINDS)}", location="$.kind")

    merged = default_config(kind)
    for key, value in raw.items():
        if key not in _FIELD_TYPES:
            raise ConfigError("unknown key", location=f"$.{key}")
        want = _FIELD_TYPES[key]
        if isinstance(value, bool) and want is not bool:
            raise ConfigError("expected a number, got bool", location=f"$.{key}")
        if not isinstance(value, want):
            name = want.__name__ if isinstance(want, type) else "number"
            raise ConfigError(f"expected {name}, got {type(value).__name__}", location=f"$.{key}")
        if key == "model":
            merged["model"] = {**merged.get("model", {}), **value}
        else:
            merged[key] = value

    for key in _POSITIVE:
        if key in merged and isinstance(merged[key], (int, float)) and merged[key] <= 0:
            raise ConfigError("value must be positive", location=f"$.{key}")
    for key in _NONNEGATIVE:
        if key in merged and isinstance(merged[key], (int, float)) and merged[key] < 0:
            raise ConfigError("value must not be negative", location=f"$.{key}")

    gammas = _check_numbers("$.gammas", merged.get("gammas", []), lo=0.0, hi=1.0)
    eta_grid = _check_numbers("$.eta_grid", merged.get("eta_grid", []), lo=0.0)
    betas = _check_numbers("$.betas", merged.get("betas", []), hi=1.0)
    for i, b in enumerate(betas):
        if b < 0.0:
            raise ConfigError("momentum must not be negative", location=f"$.betas[{i}]")
    if merged.get("noise", "gaussian") not in ("gaussian", "sign-resample"):
        raise ConfigError("noise must be 'gaussian' or 'sign-resample'", location="$.noise")
    p = merged.get("flip_probability", 0.2)
    if not 0.0 <= p <= 0.5:
        raise ConfigError("flip probability must lie in [0, 0.5]", location="$.flip_probability")

    model = dict(merged.get("model", {}))
    for mk, mv in model.items():
        if isinstance(mv, bool) or not isinstance(mv, int):
            raise ConfigError("model sizes must be integers", location=f"$.model.{mk}")
        if mv <= 0:
            raise ConfigError("model sizes must be positive", location=f"$.model.{mk}")

    merged.update(gammas=gammas, eta_grid=eta_grid, betas=betas, model=model)
    return ExperimentConfig(**merged)


def load_config(path: str) -> ExperimentConfig:
    """Read and validate a JSON config file."""
    try:
        with open(path, "r") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(str(exc), location=path) from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(exc.msg, location=f"{path}:{exc.lineno}:{exc.colno}") from exc
    return from_mapping(raw, where=path)

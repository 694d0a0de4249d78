"""Run configuration: flat sectioned key = value text, exhaustively validated.

The format is deliberately dependency-free: `[section]` headers, one
`key = value` per line, `#` comments, UTF-8.  Unknown sections or keys are
hard errors with line numbers, as are type and constraint violations.
`render_config` produces the canonical text whose SHA-256 prefix is the
config fingerprint embedded in every output file.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace

_FORMATS = ("csv", "json")
_SIGNS = ("plus", "minus")


class ConfigError(ValueError):
    """Parse or validation failure; message carries the line number."""


@dataclass(frozen=True)
class RunConfig:
    # [beam]
    l: int = 1
    k_rho: float = 1.0
    k_rho_out: float = 1.25
    # [transition]
    a: float = 1.0
    n_initial: int = 0
    m_initial: int = 0
    n_final: int = 0
    alpha: int = 1
    # [geometry]
    R0: tuple = (2.0, 1.0, 0.5, 0.25, 0.0)
    cluster_radii: tuple = (0.0, 1.0, 2.0, 4.0)
    n_samples: int = 16
    # [window]
    l_min: int = -6
    l_max: int = 8
    window_tail_tol: float = 5e-3
    # [tolerances]
    quad_tol: float = 1e-6
    direct_tol: float = 1e-4
    tail_tol: float = 1e-12
    # [truncation]
    P: int | None = None
    r_max: float | None = None
    # [run]
    selection_sign: str = "plus"
    # [output]
    format: str = "csv"

    @property
    def sign(self) -> int:
        return 1 if self.selection_sign == "plus" else -1

    def validate(self) -> None:
        err = _validation_error(self)
        if err:
            raise ConfigError(err)


_SCHEMA = {
    "beam": {"l": int, "k_rho": float, "k_rho_out": float},
    "transition": {"a": float, "n_initial": int, "m_initial": int,
                   "n_final": int, "alpha": int},
    "geometry": {"R0": "floats", "cluster_radii": "floats", "n_samples": int},
    "window": {"l_min": int, "l_max": int, "window_tail_tol": float},
    "tolerances": {"quad_tol": float, "direct_tol": float, "tail_tol": float},
    "truncation": {"P": int, "r_max": float},
    "run": {"selection_sign": str},
    "output": {"format": str},
}

_OPTIONAL = {("truncation", "P"), ("truncation", "r_max")}


def _validation_error(cfg: RunConfig) -> str | None:
    if cfg.k_rho <= 0:
        return f"beam.k_rho must be > 0, got {cfg.k_rho}"
    if cfg.k_rho_out <= 0:
        return f"beam.k_rho_out must be > 0, got {cfg.k_rho_out}"
    if cfg.a <= 0:
        return f"transition.a must be > 0, got {cfg.a}"
    if cfg.n_initial < 0 or cfg.n_final < 0:
        return "transition radial indices must be >= 0"
    if cfg.alpha == 0:
        return "transition.alpha must be a nonzero integer"
    for name, vals in (("R0", cfg.R0), ("cluster_radii", cfg.cluster_radii)):
        if not vals:
            return f"geometry.{name} must list at least one radius"
        if any(v < 0 for v in vals):
            return f"geometry.{name} values must be >= 0"
    if cfg.n_samples < 1:
        return f"geometry.n_samples must be >= 1, got {cfg.n_samples}"
    if cfg.l_min > cfg.l_max:
        return f"window [{cfg.l_min}, {cfg.l_max}] is empty"
    for name in ("window_tail_tol", "quad_tol", "direct_tol", "tail_tol"):
        if getattr(cfg, name) <= 0:
            return f"tolerance {name} must be > 0, got {getattr(cfg, name)}"
    if cfg.selection_sign not in _SIGNS:
        return f"run.selection_sign must be one of {_SIGNS}, got {cfg.selection_sign!r}"
    if cfg.format not in _FORMATS:
        return f"output.format must be one of {_FORMATS}, got {cfg.format!r}"
    if cfg.P is not None and cfg.P < 0:
        return f"truncation.P must be >= 0, got {cfg.P}"
    if cfg.r_max is not None and cfg.r_max <= 0:
        return f"truncation.r_max must be > 0, got {cfg.r_max}"
    allowed = cfg.l + cfg.sign * cfg.alpha
    if not (cfg.l_min <= allowed <= cfg.l_max):
        return (f"window [{cfg.l_min}, {cfg.l_max}] must contain the allowed "
                f"channel l + alpha = {allowed}")
    return None


def _parse_scalar(raw: str, kind, where: str):
    raw = raw.strip()
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind == "floats":
            parts = [p for p in raw.split(",") if p.strip()]
            if not parts:
                raise ValueError("empty list")
            return tuple(float(p) for p in parts)
        return raw
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot parse {raw!r} ({exc})") from None


def parse_config(text: str) -> RunConfig:
    """Parse and validate; unknown keys and sections are hard errors."""
    values: dict[str, object] = {}
    section = None
    for ln, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            section = stripped[1:-1].strip()
            if section not in _SCHEMA:
                raise ConfigError(f"line {ln}: unknown section [{section}]")
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {ln}: expected 'key = value', got {stripped!r}")
        if section is None:
            raise ConfigError(f"line {ln}: key outside any [section]")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in _SCHEMA[section]:
            raise ConfigError(f"line {ln}: unknown key {key!r} in section [{section}]")
        if key in values:
            raise ConfigError(f"line {ln}: duplicate key {key!r}")
        values[key] = _parse_scalar(raw, _SCHEMA[section][key], f"line {ln}: {key}")
    cfg = replace(RunConfig(), **values)
    err = _validation_error(cfg)
    if err:
        raise ConfigError(f"validation: {err}")
    return cfg


def render_config(cfg: RunConfig) -> str:
    """Canonical text round-tripping through parse_config."""
    def fmt(v):
        if isinstance(v, tuple):
            return ", ".join(repr(float(x)) for x in v)
        if isinstance(v, float):
            return repr(v)
        return str(v)

    lines = []
    for section, keys in _SCHEMA.items():
        body = []
        for key in keys:
            val = getattr(cfg, key)
            if val is None and (section, key) in _OPTIONAL:
                continue
            body.append(f"{key} = {fmt(val)}")
        if body:
            lines.append(f"[{section}]")
            lines.extend(body)
            lines.append("")
    return "\n".join(lines)


def config_hash(cfg: RunConfig) -> str:
    return hashlib.sha256(render_config(cfg).encode()).hexdigest()[:16]

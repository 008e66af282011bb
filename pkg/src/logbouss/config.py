"""
Run configuration: a TOML file plus command-line overrides.

Top-level keys apply to every subcommand; a table named after the
subcommand (``[kernel]``, ``[verify]``, ...) overrides them. Validation
happens before any computation and names the offending field.
"""

import math
import sys
from dataclasses import asdict, dataclass, field, fields
from typing import Optional, Tuple

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SUBCOMMANDS = ("kernel", "askey", "simulate", "verify", "bernstein", "commutator")

# keys that only steer where and how artifacts are written
OUTPUT_KEYS = ("out", "plots", "json_only")


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class RunConfig:
    subcommand: str
    alphas: Tuple[float, ...] = (0.0, 0.5, 1.0)
    betas: Tuple[float, ...] = (0.5, 1.0)
    lambdas: Tuple[float, ...] = ()
    p_list: Tuple[float, ...] = (1.5, 2.0, 4.0)
    dims: Tuple[int, ...] = (1, 2, 3)
    times: Tuple[float, ...] = (0.5, 1.0, 2.0)
    grid: int = 256
    seed: int = 0
    out: str = "out"
    plots: bool = False
    json_only: bool = False
    preset: str = "maxprinciple"
    preset_options: dict = field(default_factory=dict)
    ceiling: float = 1e3
    eps_list: Tuple[float, ...] = (0.1, 0.3, 0.5)
    refine_check: bool = True
    kernel_radii: int = 121
    askey_radii: int = 200

    def validate(self) -> "RunConfig":
        if self.subcommand not in SUBCOMMANDS:
            raise ConfigError("subcommand", f"must be one of {', '.join(SUBCOMMANDS)}")
        for name in ("alphas", "betas", "p_list", "dims", "times", "eps_list"):
            if len(getattr(self, name)) == 0:
                raise ConfigError(name, "empty parameter range")
        for a in self.alphas:
            _require("alphas", a >= 0 and math.isfinite(a), f"alpha must be finite and >= 0, got {a}")
        for b in self.betas:
            _require("betas", 0 < b <= 2, f"beta must lie in (0, 2], got {b}")
        for lam in self.lambdas:
            _require("lambdas", lam > 1 and math.isfinite(lam), f"lambda must be finite and > 1, got {lam}")
        for p in self.p_list:
            _require("p_list", p > 1, f"p must exceed 1, got {p}")
        for d in self.dims:
            _require("dims", d in (1, 2, 3), f"dimension must be 1, 2 or 3, got {d}")
        for t in self.times:
            _require("times", t > 0 and math.isfinite(t), f"t must be positive, got {t}")
        for e in self.eps_list:
            _require("eps_list", e > 0, f"eps must be positive, got {e}")
        _require("grid", self.grid >= 16 and self.grid & (self.grid - 1) == 0,
                 f"grid must be a power of two >= 16, got {self.grid}")
        _require("seed", self.seed >= 0, f"seed must be >= 0, got {self.seed}")
        _require("ceiling", self.ceiling >= 0, f"ceiling must be >= 0, got {self.ceiling}")
        _require("kernel_radii", self.kernel_radii >= 2, "need at least 2 radii")
        _require("askey_radii", self.askey_radii >= 1, "need at least 1 radius")
        if self.subcommand == "simulate":
            from .presets import PRESETS
            if self.preset not in PRESETS:
                raise ConfigError("preset", f"unknown preset {self.preset!r}; available presets: "
                                  f"{', '.join(sorted(PRESETS))}")
        return self

    def hashed_fields(self) -> dict:
        d = asdict(self)
        for k in OUTPUT_KEYS:
            d.pop(k)
        return d

    def config_hash(self) -> str:
        from .io import config_hash
        return config_hash(self.hashed_fields())


def _require(name, ok, msg):
    if not ok:
        raise ConfigError(name, msg)


_TUPLE_KEYS = {"alphas", "betas", "lambdas", "p_list", "dims", "times", "eps_list"}


def _coerce(key, value):
    names = {f.name: f for f in fields(RunConfig)}
    if key not in names:
        raise ConfigError(key, "unknown configuration key")
    if key in _TUPLE_KEYS:
        if isinstance(value, (int, float)):
            value = [value]
        if not isinstance(value, (list, tuple)):
            raise ConfigError(key, f"expected a list, got {type(value).__name__}")
        conv = int if key == "dims" else float
        try:
            return tuple(conv(v) if v != "inf" else math.inf for v in value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(key, f"invalid entry ({exc})") from None
    if key in ("grid", "seed", "kernel_radii", "askey_radii"):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(key, f"expected an integer, got {value!r}")
        return value
    if key == "ceiling":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(key, f"expected a number, got {value!r}")
        return float(value)
    if key in ("plots", "json_only", "refine_check"):
        if not isinstance(value, bool):
            raise ConfigError(key, f"expected true/false, got {value!r}")
        return value
    if key == "preset_options":
        if not isinstance(value, dict):
            raise ConfigError(key, "expected a table")
        return dict(value)
    return str(value)


def load_config(subcommand: str, path: Optional[str] = None, overrides: Optional[dict] = None) -> RunConfig:
    """Merge defaults, the TOML file (top level, then ``[subcommand]``) and overrides."""
    raw = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                doc = tomllib.load(fh)
        except FileNotFoundError:
            raise ConfigError("config", f"file not found: {path}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError("config", f"cannot parse {path}: {exc}") from None
        for k, v in doc.items():
            if k in SUBCOMMANDS and isinstance(v, dict):
                continue
            raw[k] = v
        raw.update(doc.get(subcommand, {}))
    for k, v in (overrides or {}).items():
        if v is not None:
            raw[k] = v
    kwargs = {k: _coerce(k, v) for k, v in raw.items() if k != "subcommand"}
    return RunConfig(subcommand=subcommand, **kwargs).validate()

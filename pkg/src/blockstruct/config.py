"""Run configuration: defaults, a flat ``key = value`` file, then CLI overrides."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

from .annealing import TestConfig
from .linalg import NONLINEARITIES
from .structure import StructuralPredicate


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    # annealing
    alpha: float = 0.05
    delta0: float | None = None  # None -> 1/(10 n)
    tau: float | None = None  # None -> 1/(10 n)
    bins: int = 10
    sigma: float | None = None  # None -> robust estimate from the weights
    k_channels: int = 8
    retain_suppressed: bool = False
    # structure
    epsilon: float = 0.0
    predicate: str = "abs-threshold"
    edge_convention: str = "standard"  # m[i, j] != 0: edge from j into i
    isolated_last: bool = False
    # runtime
    nonlinearity: str = "identity"
    eta: float = 1.0
    trials: int = 10
    tolerance: float = 0.0
    # simulation
    seed: int = 0
    n: int = 64
    k_blocks: int = 4
    steps: int = 2000
    init_sigma: float = 0.1
    p_active: float = 0.5
    bridge_prob: float = 0.0

    def validate(self) -> "RunConfig":
        try:
            self.test_config()
            StructuralPredicate(self.predicate, self.epsilon)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.sigma is not None and not self.sigma > 0:
            raise ConfigError("sigma must be positive")
        if self.k_channels < 2 or self.k_channels % 2:
            raise ConfigError("k_channels must be a positive even number")
        if self.edge_convention not in ("standard", "transposed"):
            raise ConfigError("edge_convention must be 'standard' or 'transposed'")
        if self.nonlinearity not in NONLINEARITIES:
            raise ConfigError(f"nonlinearity must be one of {sorted(NONLINEARITIES)}")
        if not self.eta > 0 or self.trials < 1 or self.tolerance < 0:
            raise ConfigError("eta must be positive, trials at least 1, tolerance non-negative")
        return self

    def test_config(self) -> TestConfig:
        return TestConfig(self.alpha, self.delta0, self.tau, self.bins, self.k_channels, self.retain_suppressed)

    def dump(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name} = {'none' if v is None else str(v).lower() if isinstance(v, bool) else v}")
        return "\n".join(lines) + "\n"


def _field_types() -> dict[str, type]:
    out = {}
    for f in fields(RunConfig):
        t = f.type if isinstance(f.type, str) else f.type.__name__
        base = t.split("|")[0].strip()
        out[f.name] = {"float": float, "int": int, "bool": bool, "str": str}[base]
    return out


_TYPES = _field_types()


def parse_value(key: str, raw: str):
    if key not in _TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    raw = raw.strip()
    if raw.lower() in ("none", ""):
        default = RunConfig.__dataclass_fields__[key].default
        if default is not None:
            raise ConfigError(f"{key} cannot be empty")
        return None
    t = _TYPES[key]
    if t is bool:
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    try:
        return t(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected {t.__name__}, got {raw!r}") from None


def read_config_file(path) -> dict:
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        values[key.replace("-", "_")] = parse_value(key.replace("-", "_"), raw)
    return values


def resolve(file_values: dict | None = None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then file values, then CLI overrides (``None`` overrides are skipped)."""
    merged = dict(file_values or {})
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return dataclasses.replace(RunConfig(), **merged).validate()

"""Run configuration: one YAML document drives a full bound/simulate/verify run."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np
import yaml

from .errors import ChainboundError

__all__ = ["ConfigError", "ChainSpec", "BoundSpec", "SimSpec", "RunConfig", "parse_grid"]


class ConfigError(ChainboundError, ValueError):
    """Invalid configuration; ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


def parse_grid(text, name: str = "grid") -> list[float]:
    """``"1,2,3"``, ``"lo:hi:n"`` (inclusive linspace) or a list of numbers."""
    if isinstance(text, (list, tuple)):
        vals = [float(v) for v in text]
    elif isinstance(text, (int, float)):
        vals = [float(text)]
    else:
        s = str(text).strip()
        try:
            if s.count(":") == 2:
                lo, hi, n = s.split(":")
                vals = np.linspace(float(lo), float(hi), int(n)).tolist()
            else:
                vals = [float(v) for v in s.split(",") if v.strip()]
        except ValueError:
            raise ConfigError(name, f"cannot parse grid {s!r}") from None
    if not vals:
        raise ConfigError(name, "grid is empty")
    if any(not math.isfinite(v) for v in vals):
        raise ConfigError(name, "grid has non-finite entries")
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise ConfigError(name, "grid must be strictly increasing")
    return vals


@dataclass
class ChainSpec:
    strategies: list = field(default_factory=lambda: ["dyadic", "refine"])
    rhos: list = field(default_factory=lambda: [0.70, 0.75, 0.80, 0.85, 0.90])
    delta_grid: list | None = None
    max_depth: int | None = None


@dataclass
class BoundSpec:
    u: list = field(default_factory=lambda: [3.0])
    C: list = field(default_factory=lambda: [1.0])
    mode: str = "t1"
    optimize: bool = False
    C_doob: float = 0.5
    Q: int = 2
    n_max: int = 65536


@dataclass
class SimSpec:
    kind: str
    replicates: int
    seed: int
    u: list | None = None
    two_sided: bool = False


@dataclass
class RunConfig:
    experiment: str = "run"
    phi: str = "subgaussian"
    space: str | None = None
    chaining: ChainSpec = field(default_factory=ChainSpec)
    bound: BoundSpec = field(default_factory=BoundSpec)
    sim: SimSpec | None = None
    output: str | None = None

    def validate(self) -> "RunConfig":
        self.bound.u = parse_grid(self.bound.u, "bound.u")
        self.bound.C = parse_grid(self.bound.C, "bound.C")
        if any(c <= 0 for c in self.bound.C):
            raise ConfigError("bound.C", "constants must be positive")
        if not self.chaining.strategies:
            raise ConfigError("chaining.strategies", "need at least one strategy")
        for s in self.chaining.strategies:
            if s not in ("dyadic", "refine"):
                raise ConfigError("chaining.strategies", f"unknown strategy {s!r}")
        self.chaining.rhos = parse_grid(self.chaining.rhos, "chaining.rhos")
        if any(not 2 / 3 < r < 1 for r in self.chaining.rhos):
            raise ConfigError("chaining.rhos", "every rho must lie in (2/3, 1)")
        if self.chaining.delta_grid is not None:
            self.chaining.delta_grid = parse_grid(self.chaining.delta_grid, "chaining.delta_grid")
            if self.chaining.delta_grid[0] <= 0 or self.chaining.delta_grid[-1] > 1:
                raise ConfigError("chaining.delta_grid", "entries must lie in (0, 1]")
        if self.sim is not None:
            if self.sim.seed is None:
                raise ConfigError("sim.seed", "a seed is required")
            if int(self.sim.replicates) < 1:
                raise ConfigError("sim.replicates", "must be >= 1")
            if self.sim.u is not None:
                self.sim.u = parse_grid(self.sim.u, "sim.u")
        return self

    def to_yaml(self) -> str:
        return yaml.safe_dump(asdict(self), sort_keys=False)

    @classmethod
    def from_dict(cls, obj: dict) -> "RunConfig":
        if not isinstance(obj, dict):
            raise ConfigError("<root>", "expected a mapping")
        known = {f.name for f in fields(cls)}
        extra = set(obj) - known
        if extra:
            raise ConfigError(sorted(extra)[0], "unknown key")
        kw = dict(obj)
        for key, sub in (("chaining", ChainSpec), ("bound", BoundSpec), ("sim", SimSpec)):
            if kw.get(key) is not None:
                val = kw[key]
                if not isinstance(val, dict):
                    raise ConfigError(key, "expected a mapping")
                allowed = {f.name for f in fields(sub)}
                bad = set(val) - allowed
                if bad:
                    raise ConfigError(f"{key}.{sorted(bad)[0]}", "unknown key")
                try:
                    kw[key] = sub(**val)
                except TypeError as e:
                    raise ConfigError(key, str(e)) from None
        return cls(**kw).validate()

    @classmethod
    def from_yaml(cls, text: str) -> "RunConfig":
        try:
            obj = yaml.safe_load(text)
        except yaml.YAMLError as e:
            mark = getattr(e, "problem_mark", None)
            where = f"line {mark.line + 1}" if mark is not None else "<yaml>"
            raise ConfigError(where, "malformed YAML") from None
        return cls.from_dict(obj or {})

    @classmethod
    def load(cls, path: str) -> "RunConfig":
        with open(path) as fh:
            return cls.from_yaml(fh.read())

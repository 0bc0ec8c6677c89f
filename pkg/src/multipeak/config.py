"""Run configuration as line-oriented ``key = value`` text.

Blank lines and text after ``#`` are ignored, unknown keys are errors and
``emit`` writes every key in a fixed order so that parse(emit(c)) == c.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

from .ground_state import ProblemParams


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    N: int = 2
    p: float = 3.0
    a1: float = 2.0
    a2: float = 2.0
    b1: float = 2.5
    b2: float = 2.0
    # explicit triplet; k is also the polygon order used by "auto"
    m: int = 5
    n: int = 3
    k: int = 8
    triplets: str = "explicit"      # "explicit" or "auto"
    count: int = 3
    # exactly one of Lambda and ell is used: Lambda > 0 wins
    Lambda: float = 0.0
    ell: float = 10.0
    # "projection" balances pΨ0(ell) against ΛΨ1(ellbar); "literal" drops p
    balance: str = "projection"
    R_max: float = 50.0
    h: float = 0.5
    L: float = 0.0                  # 0 picks outer radius + 12
    ground_tol: float = 2e-3
    newton_tol: float = 1e-8
    max_iter: int = 30
    eta: float = 0.05
    delta: float = 0.02
    continuation: bool = False

    def __post_init__(self):
        for name in ("ground_tol", "newton_tol", "h", "R_max", "delta", "eta"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.triplets not in ("explicit", "auto"):
            raise ConfigError("triplets must be 'explicit' or 'auto'")
        if self.balance not in ("projection", "literal"):
            raise ConfigError("balance must be 'projection' or 'literal'")
        if self.Lambda < 0 or (self.Lambda == 0 and not self.ell > 0):
            raise ConfigError("set Lambda > 0 or ell > 0")

    @property
    def params(self):
        return ProblemParams(self.N, self.p, self.a1, self.a2, self.b1, self.b2,
                             self.Lambda if self.Lambda > 0 else 1.0)

    def replace(self, **changes):
        return replace(self, **changes)


_FIELDS = {f.name: f for f in fields(RunConfig)}


def _convert(name, text):
    kind = type(getattr(RunConfig(), name))
    try:
        if kind is bool:
            low = text.lower()
            if low not in ("true", "false"):
                raise ValueError(text)
            return low == "true"
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        return text
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {text!r}") from exc


def parse(text):
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _convert(key, value)
    return RunConfig(**values)


def emit(config):
    lines = []
    for name in _FIELDS:
        value = getattr(config, name)
        if isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, float):
            text = repr(value)
        else:
            text = str(value)
        lines.append(f"{name} = {text}")
    return "\n".join(lines) + "\n"


def load(path):
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())

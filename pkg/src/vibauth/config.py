"""Run settings shared by the CLI subcommands.

A settings file is plain `key = value` lines; # starts a comment and blank
lines are skipped. Every key maps 1:1 to a CLI flag, and an unknown key is
an error rather than a silent ignore.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .errors import ConfigError


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    n_users: int = 10
    n_impostors: int = 10
    per_gesture: int = 20
    sample_rate_hz: float = 2000.0
    duration_ms: float = 1000.0
    train_fraction: float = 0.6
    learning_rate: float = 0.001
    batch_size: int = 32
    n_epochs: int = 50
    alpha: float = 0.9
    beta: float = 0.8

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0 or not 0.0 < self.beta < 1.0:
            raise ConfigError("alpha and beta must lie strictly between 0 and 1")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("train_fraction must lie strictly between 0 and 1")
        if self.duration_ms <= 0 or self.sample_rate_hz <= 0:
            raise ConfigError("duration_ms and sample_rate_hz must be positive")
        if self.n_users < 0 or self.n_impostors < 0 or self.per_gesture < 1:
            raise ConfigError("subject and recording counts must be sensible")
        if self.learning_rate <= 0 or self.batch_size < 2 or self.n_epochs < 1:
            raise ConfigError("training settings out of range")

    @classmethod
    def parse(cls, text: str, source: str = "<config>") -> "RunConfig":
        """Parse settings text; unknown keys and bad values raise ConfigError."""
        types = _TYPES
        values: dict = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key not in types:
                raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
            try:
                values[key] = types[key](value)
            except ValueError as exc:
                raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from exc
        return cls(**values)

    @classmethod
    def load(cls, path: Path) -> "RunConfig":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.parse(text, source=str(path))

    def replaced(self, **overrides) -> "RunConfig":
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def fingerprint(self) -> str:
        """Short stable digest of all settings, for provenance records."""
        canonical = json.dumps(self.as_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.blake2b(canonical.encode(), digest_size=8).hexdigest()

    def render(self) -> str:
        """Settings in the same key = value syntax parse() accepts."""
        return "\n".join(f"{k} = {v}" for k, v in self.as_dict().items()) + "\n"


_TYPES: dict[str, type] = {
    "seed": int,
    "n_users": int,
    "n_impostors": int,
    "per_gesture": int,
    "sample_rate_hz": float,
    "duration_ms": float,
    "train_fraction": float,
    "learning_rate": float,
    "batch_size": int,
    "n_epochs": int,
    "alpha": float,
    "beta": float,
}

assert set(_TYPES) == {f.name for f in fields(RunConfig)}

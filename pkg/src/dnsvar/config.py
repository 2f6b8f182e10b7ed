"""Flat key-value run configuration.

Grammar: one `key = value` pair per line; keys are dot-namespaced
lowercase identifiers; blank lines and lines starting with '#' are
ignored; later duplicate keys are an error. Values are strings until a
typed accessor parses them.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


@dataclass
class RunConfig:
    values: dict[str, str] = field(default_factory=dict)
    source: str = "<config>"
    base_dir: Path = Path(".")

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file does not exist: {path}")
        text = path.read_text(encoding="utf-8")
        return cls(parse_config_text(text, str(path)), str(path), path.parent)

    def config_hash(self) -> str:
        canonical = "\n".join(f"{k}={self.values[k]}" for k in sorted(self.values))
        return hashlib.sha256(canonical.encode()).hexdigest()[:16]

    def get(self, key: str, default: str | None = None) -> str | None:
        return self.values.get(key, default)

    def require(self, key: str) -> str:
        if key not in self.values:
            raise ConfigError(f"{self.source}: missing required key {key!r}")
        return self.values[key]

    def get_float(self, key: str, default: float | None = None) -> float | None:
        raw = self.values.get(key)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{self.source}: key {key!r} is not a number: {raw!r}")

    def get_int(self, key: str, default: int | None = None) -> int | None:
        raw = self.values.get(key)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{self.source}: key {key!r} is not an integer: {raw!r}")

    def get_bool(self, key: str, default: bool = False) -> bool:
        raw = self.values.get(key)
        if raw is None:
            return default
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{self.source}: key {key!r} is not a boolean: {raw!r}")

    def get_int_list(self, key: str, default: tuple[int, ...] = ()) -> tuple[int, ...]:
        raw = self.values.get(key)
        if raw is None:
            return default
        try:
            return tuple(int(tok.strip()) for tok in raw.split(",") if tok.strip())
        except ValueError:
            raise ConfigError(f"{self.source}: key {key!r} is not an integer list: {raw!r}")

    def get_str_list(self, key: str, default: tuple[str, ...] = ()) -> tuple[str, ...]:
        raw = self.values.get(key)
        if raw is None:
            return default
        return tuple(tok.strip() for tok in raw.split(",") if tok.strip())

    def get_path(self, key: str, default: str | None = None) -> Path | None:
        raw = self.values.get(key, default)
        if raw is None:
            return None
        path = Path(raw)
        return path if path.is_absolute() else self.base_dir / path

    def subsection(self, prefix: str) -> dict[str, str]:
        """Keys under `prefix.` with the prefix stripped."""
        dot = prefix + "."
        return {k[len(dot):]: v for k, v in self.values.items() if k.startswith(dot)}

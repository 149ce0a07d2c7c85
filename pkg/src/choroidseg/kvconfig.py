"""Flat key-value configuration files.

One ``key = value`` pair per line, ``#`` comments, blank lines ignored.
Keys are dotted lowercase identifiers (``pipeline.vesselness_weight``).
Values stay strings here; callers coerce.
"""

from __future__ import annotations

import re
from pathlib import Path

__all__ = ["ConfigError", "parse_kv", "format_kv", "read_kv", "write_kv"]

_KEY_RE = re.compile(r"^[a-z0-9_]+(\.[a-z0-9_]+)*$")


class ConfigError(ValueError):
    """Malformed configuration text (bad line syntax, bad key, duplicate)."""


def parse_kv(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse flat dotted key-value text into an ordered dict of strings."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not _KEY_RE.match(key):
            raise ConfigError(f"{source}:{lineno}: invalid key {key!r}")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def read_kv(path: str | Path) -> dict[str, str]:
    path = Path(path)
    return parse_kv(path.read_text(), source=str(path))


def format_kv(pairs: dict[str, str]) -> str:
    lines = [f"{key} = {value}" for key, value in pairs.items()]
    return "\n".join(lines) + "\n"


def write_kv(path: str | Path, pairs: dict[str, str]) -> None:
    Path(path).write_text(format_kv(pairs))

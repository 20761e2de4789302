"""Flat key=value config files used for run configs and synth configs."""

from __future__ import annotations

from pathlib import Path
from typing import Dict, Union

from fieldbt.errors import ConfigError


def parse_flat_text(text: str, label: str = "config") -> Dict[str, str]:
    """Parse ``key = value`` lines; '#' starts a comment, blank lines ignored."""
    out: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{label} line {lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"{label} line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"{label} line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def parse_flat_file(path: Union[str, Path]) -> Dict[str, str]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return parse_flat_text(path.read_text(), label=str(path))

"""Flat key = value configuration with CLI overrides and provenance echoing."""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

ENV_SEED = "DIIP_SEED"
ECHO_NAME = "config_used.cfg"


def parse_bool(text: str) -> bool:
    val = text.strip().lower()
    if val in ("1", "true", "yes", "on"):
        return True
    if val in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


@dataclass(frozen=True)
class Param:
    name: str
    parse: Callable[[str], Any]
    default: Any
    help: str = ""
    is_seed: bool = False
    required: bool = False


def load_config_file(path: str | Path) -> dict[str, str]:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, val = line.split("=", 1)
        values[key.strip()] = val.strip()
    return values


def resolve(schema: list[Param], file_values: dict[str, str], cli_values: dict[str, str],
            env: dict[str, str] | None = None) -> dict[str, Any]:
    """Typed parameter resolution: defaults < DIIP_SEED < config file < CLI."""
    env = os.environ if env is None else env
    known = {p.name for p in schema}
    for src_name, src in (("config file", file_values), ("command line", cli_values)):
        unknown = set(src) - known
        if unknown:
            raise ValueError(f"unknown {src_name} keys: {', '.join(sorted(unknown))}")
    out: dict[str, Any] = {}
    for p in schema:
        if p.name in cli_values:
            out[p.name] = p.parse(cli_values[p.name])
        elif p.name in file_values:
            out[p.name] = p.parse(file_values[p.name])
        elif p.is_seed and ENV_SEED in env:
            out[p.name] = p.parse(env[ENV_SEED])
        elif p.required:
            raise ValueError(f"missing required parameter {p.name!r}")
        else:
            out[p.name] = p.default
    return out


def format_config(cfg: dict[str, Any], version: str) -> str:
    lines = [f"tool_version = {version}"]
    for key in sorted(cfg):
        lines.append(f"{key} = {cfg[key]}")
    return "\n".join(lines) + "\n"


def echo_config(cfg: dict[str, Any], out_dir: str | Path, version: str) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / ECHO_NAME
    path.write_text(format_config(cfg, version))
    return path


def config_hash(cfg: dict[str, Any]) -> str:
    blob = "\n".join(f"{k}={cfg[k]}" for k in sorted(cfg)).encode()
    return hashlib.sha256(blob).hexdigest()[:12]

"""Plain-text ``key = value`` configuration files.

Lines are ``key = value``; ``#`` starts a comment.  Keys before the first
``[section]`` header live in the root section, so rig and BEV files need no
header at all while training configs can group keys under ``[stgan]``,
``[train]`` or ``[synth]``.
"""
from __future__ import annotations

import configparser
from pathlib import Path

ROOT = "__root__"


class ConfigError(ValueError):
    pass


def parse_config(text: str) -> dict[str, dict[str, str]]:
    parser = configparser.ConfigParser(
        delimiters=("=",),
        comment_prefixes=("#",),
        inline_comment_prefixes=("#",),
        interpolation=None,
        strict=True,
    )
    parser.optionxform = str  # keep key case
    try:
        parser.read_string(f"[{ROOT}]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    return {name: dict(parser[name]) for name in parser.sections()}


def read_config(path: str | Path) -> dict[str, dict[str, str]]:
    return parse_config(Path(path).read_text())


def section(cfg: dict[str, dict[str, str]], name: str = ROOT) -> dict[str, str]:
    return cfg.get(name, {})


def coerce(value: str):
    """Best-effort conversion of a config string to int, float, bool or str."""
    low = value.strip().lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    for kind in (int, float):
        try:
            return kind(value)
        except ValueError:
            pass
    return value.strip()


def format_config(values: dict, header: str | None = None) -> str:
    lines = [f"[{header}]"] if header else []
    lines += [f"{k} = {v!r}" if isinstance(v, float) else f"{k} = {v}" for k, v in values.items()]
    return "\n".join(lines) + "\n"

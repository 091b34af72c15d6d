"""Flat `key = value` text config files.

Lines starting with '#' and blank lines are ignored. Values are kept as
strings; consumers parse them. Keys are written in sorted order so a
config file is a deterministic function of its contents.
"""

from pathlib import Path


def read_kv(path) -> dict:
    """Parse a key/value text file into a dict of strings."""
    text = Path(path).read_text(encoding="utf-8")
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        out[key.strip()] = value.strip()
    return out


def write_kv(path, values: dict) -> None:
    lines = [f"{key} = {values[key]}" for key in sorted(values)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def parse_floats(text: str) -> tuple:
    return tuple(float(part) for part in text.split(",") if part.strip() != "")


def format_floats(values) -> str:
    return ",".join(f"{v:g}" for v in values)

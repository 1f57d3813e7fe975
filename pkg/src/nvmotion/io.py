"""Deterministic CSV/JSON artifact writers.

All writers produce byte-identical output for identical inputs: fixed
float formatting, sorted JSON keys, LF newlines, no timestamps.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Iterable, Sequence

FLOAT_FMT = "%.12g"


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return FLOAT_FMT % v
    return str(v)


def write_csv(path: Path | str, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_value(v) for v in row))
    path.write_text("\n".join(lines) + "\n", newline="\n")
    return path


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=True) + "\n"


def write_json(path: Path | str, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_json(obj), newline="\n")
    return path


def sha256_of(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def derive_seed(master: int, tag: str) -> int:
    """Per-purpose seed: master XOR (first 8 bytes of sha256 of the tag)."""
    h = int.from_bytes(hashlib.sha256(tag.encode()).digest()[:8], "little")
    return (master ^ h) & 0xFFFFFFFFFFFFFFFF

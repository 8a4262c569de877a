"""Canonical JSON encoding shared by every file the pipeline writes.

Golden-file tests compare bytes, so all writers funnel through these
helpers: sorted keys, fixed separators, UTF-8 text. Stores keep exact
float reprs (lossless round trips); the analysis report additionally
rounds floats to 9 significant digits via `round_floats`.
"""

from __future__ import annotations

import hashlib
import json
import math
from typing import Any

FLOAT_SIG_DIGITS = 9


def round_floats(value: Any, sig: int = FLOAT_SIG_DIGITS) -> Any:
    """Recursively round every float to `sig` significant digits."""
    if isinstance(value, bool):
        return value
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite number not representable: {value!r}")
        return float(f"{value:.{sig}g}")
    if isinstance(value, dict):
        return {k: round_floats(v, sig) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [round_floats(v, sig) for v in value]
    return value


def dumps_line(obj: Any) -> str:
    """One-line canonical JSON (for .jsonl files), no trailing newline."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def dumps_pretty(obj: Any) -> str:
    """Indented canonical JSON with trailing newline (standalone files)."""
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def sha256_hex(data: bytes | str) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()


def digest(obj: Any, length: int = 16) -> str:
    """Short content digest of an object's canonical JSON form."""
    return sha256_hex(dumps_line(obj))[:length]

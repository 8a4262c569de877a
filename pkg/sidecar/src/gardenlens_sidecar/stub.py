"""Stub engine: deterministic answers per docs/protocol.md.

Everything is derived from SHA-256 byte streams keyed on the request
id, with the `~key=value` hint grammar taking precedence field by
field. This must stay bit-compatible with the pipeline's in-process
stub; the compatibility test compares serialized responses byte for
byte, so any change here is a protocol change.
"""

from __future__ import annotations

import hashlib
import math
from functools import lru_cache
from importlib import resources

N_ELEMENT_CLASSES = 150
N_SCENE_LABELS = 365


@lru_cache(maxsize=None)
def _table(name: str) -> tuple[str, ...]:
    text = resources.files("gardenlens_sidecar").joinpath("data").joinpath(name) \
        .read_text(encoding="utf-8")
    return tuple(line.strip() for line in text.splitlines()
                 if line.strip() and not line.startswith("#"))


def scene_labels() -> tuple[str, ...]:
    labels = _table("scene_labels.txt")
    assert len(labels) == N_SCENE_LABELS, f"label table has {len(labels)} entries"
    return labels


def scene_attributes() -> tuple[str, ...]:
    return _table("scene_attributes.txt")


def _stream(tag: str, ident: str):
    counter = 0
    while True:
        yield from hashlib.sha256(f"{tag}:{ident}:{counter}".encode("utf-8")).digest()
        counter += 1


def _hints(ident: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for chunk in ident.split("~")[1:]:
        if "=" in chunk:
            key, _, value = chunk.partition("=")
            out[key] = value
    return out


def segment(ident: str) -> dict:
    hint = _hints(ident).get("seg")
    if hint is not None:
        runs = [[int(c), int(n)] for c, n in (pair.split(":") for pair in hint.split(","))]
        total = sum(n for _c, n in runs)
        width = int(math.isqrt(total))
        while total % width:
            width -= 1
        return {"rle": runs, "w": width, "h": total // width}

    byte = _stream("segment", ident)
    width = 16 + next(byte) % 33
    height = 16 + next(byte) % 33
    palette_size = 3 + next(byte) % 4
    palette = [((next(byte) << 8 | next(byte)) % N_ELEMENT_CLASSES)
               for _ in range(palette_size)]
    runs: list[list[int]] = []
    remaining = width * height
    while remaining:
        class_id = palette[next(byte) % palette_size]
        run = min(1 + next(byte) % 31, remaining)
        if runs and runs[-1][0] == class_id:
            runs[-1][1] += run
        else:
            runs.append([class_id, run])
        remaining -= run
    return {"rle": runs, "w": width, "h": height}


def classify(ident: str) -> dict:
    hints = _hints(ident)
    byte = _stream("classify", ident)

    if "lbl" in hints:
        labels = []
        for pair in hints["lbl"].split(","):
            name, _, weight = pair.rpartition(":")
            labels.append([name, float(weight)])
    else:
        table = scene_labels()
        picked: list[int] = []
        while len(picked) < 4:
            index = (next(byte) << 8 | next(byte)) % N_SCENE_LABELS
            if index not in picked:
                picked.append(index)
        mass = (70 + next(byte) % 30) / 100
        units = [1 + next(byte) for _ in range(4)]
        total = sum(units)
        labels = sorted(
            ([table[i], round(u * mass / total, 6)] for i, u in zip(picked, units)),
            key=lambda pair: (-pair[1], pair[0]))

    if "kw" in hints:
        keywords = [part.replace("_", " ") for part in hints["kw"].split("+") if part]
    else:
        vocab = scene_attributes()
        count = 2 + next(byte) % 3
        chosen: list[int] = []
        while len(chosen) < count:
            index = next(byte) % len(vocab)
            if index not in chosen:
                chosen.append(index)
        keywords = [vocab[i] for i in chosen]
    return {"labels": labels, "keywords": keywords}


def sentiment(ident: str) -> float:
    hint = _hints(ident).get("sent")
    if hint is not None:
        return float(hint)
    byte = _stream("sentiment", ident)
    value = next(byte) << 24 | next(byte) << 16 | next(byte) << 8 | next(byte)
    return round(value / 2**32, 6)


class StubEngine:
    """Engine interface the server dispatches to; stub mode needs no models."""

    def segment(self, ident: str, image: str) -> dict:
        return segment(ident)

    def classify(self, ident: str, image: str) -> dict:
        return classify(ident)

    def sentiment(self, ident: str, text: str) -> float:
        return sentiment(ident)

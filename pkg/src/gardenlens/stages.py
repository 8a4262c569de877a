"""File formats for the pipeline stages.

Stages talk through files, never memory, so each one can be re-run and
inspected on its own. Every derived file opens with a meta line that
names its kind and the corpus snapshot it came from; `report` refuses
to mix files from different snapshots.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import DataError, SnapshotMismatch
from .jsonutil import dumps_line
from .sentiment import SentimentScore
from .taxonomy import ImageAssignment
from .vision import EnrichedRecord


def _write_jsonl(path: Path | str, meta: dict, rows: list[dict]) -> None:
    lines = [dumps_line({"meta": meta})]
    lines.extend(dumps_line(row) for row in rows)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _read_jsonl(path: Path | str, kind: str) -> tuple[dict, list[dict]]:
    text = Path(path).read_text(encoding="utf-8")
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise DataError(f"{path}: empty stage file")
    head = json.loads(lines[0])
    meta = head.get("meta")
    if not isinstance(meta, dict) or meta.get("kind") != kind:
        raise DataError(f"{path}: expected a {kind!r} stage file")
    return meta, [json.loads(line) for line in lines[1:]]


@dataclass
class EnrichedSet:
    snapshot: str
    records: list[EnrichedRecord]
    params: dict


def write_enriched(path: Path | str, snapshot: str, records: list[EnrichedRecord],
                   params: dict | None = None) -> None:
    meta = {"kind": "enriched", "snapshot": snapshot, "n": len(records),
            "params": params or {}}
    _write_jsonl(path, meta, [r.to_json_dict() for r in records])


def read_enriched(path: Path | str) -> EnrichedSet:
    meta, rows = _read_jsonl(path, "enriched")
    return EnrichedSet(
        snapshot=meta.get("snapshot", ""),
        records=[EnrichedRecord.from_json_dict(r) for r in rows],
        params=meta.get("params", {}),
    )


@dataclass
class AssignmentSet:
    snapshot: str
    taxonomy_checksum: str
    rows: list[ImageAssignment]


def write_assignments(path: Path | str, snapshot: str, taxonomy_checksum: str,
                      rows: list[ImageAssignment]) -> None:
    meta = {"kind": "assignments", "snapshot": snapshot, "n": len(rows),
            "taxonomy_checksum": taxonomy_checksum}
    _write_jsonl(path, meta, [r.to_json_dict() for r in rows])


def read_assignments(path: Path | str) -> AssignmentSet:
    meta, rows = _read_jsonl(path, "assignments")
    return AssignmentSet(
        snapshot=meta.get("snapshot", ""),
        taxonomy_checksum=meta.get("taxonomy_checksum", ""),
        rows=[ImageAssignment.from_json_dict(r) for r in rows],
    )


@dataclass
class ScoreSet:
    snapshot: str
    scores: dict[str, SentimentScore]
    params: dict


def write_scores(path: Path | str, snapshot: str, scores: dict[str, SentimentScore],
                 params: dict | None = None) -> None:
    meta = {"kind": "scores", "snapshot": snapshot, "n": len(scores), "params": params or {}}
    rows = [{"id": rid, **score.to_json_dict()} for rid, score in sorted(scores.items())]
    _write_jsonl(path, meta, rows)


def read_scores(path: Path | str) -> ScoreSet:
    meta, rows = _read_jsonl(path, "scores")
    scores = {row["id"]: SentimentScore.from_json_dict(row) for row in rows}
    return ScoreSet(snapshot=meta.get("snapshot", ""), scores=scores,
                    params=meta.get("params", {}))


def check_same_snapshot(*sets) -> str:
    snapshots = {s.snapshot for s in sets}
    if len(snapshots) != 1:
        raise SnapshotMismatch(f"stage files come from different snapshots: {sorted(snapshots)}")
    return snapshots.pop()

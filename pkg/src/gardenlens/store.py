"""Append-only record store: JSONL shards plus a sidecar id index.

Layout on disk:

    <root>/records-000.jsonl     one record per line, canonical JSON
    <root>/index.json            id -> (shard, byte offset), counts, checksum

Records are never rewritten in place. One process writes, any number
read. The ``checksum`` in the index is a digest over the sorted id set
and identifies a corpus snapshot for downstream stages.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Iterator

from .corpus import Record
from .errors import DataError, DuplicateId, NotFound
from .jsonutil import dumps_line, dumps_pretty, sha256_hex

INDEX_NAME = "index.json"
SHARD_TEMPLATE = "records-{:03d}.jsonl"
DEFAULT_SHARD_MAX_RECORDS = 100_000


def snapshot_checksum(ids: Iterable[str]) -> str:
    return "sha256:" + sha256_hex("\n".join(sorted(ids)))


class RecordStore:
    """Record persistence keyed by unique string ids."""

    def __init__(self, root: Path | str, shard_max_records: int = DEFAULT_SHARD_MAX_RECORDS):
        self.root = Path(root)
        self.shard_max_records = shard_max_records
        self._index: dict[str, tuple[int, int]] = {}
        self._shards: list[str] = []
        self._write_handle = None
        self._write_count = 0
        self._dirty = False

    # --- lifecycle -----------------------------------------------------------

    @classmethod
    def create(cls, root: Path | str, **kwargs) -> "RecordStore":
        store = cls(root, **kwargs)
        store.root.mkdir(parents=True, exist_ok=True)
        if (store.root / INDEX_NAME).exists():
            raise DataError(f"store already exists at {store.root}")
        return store

    @classmethod
    def open(cls, root: Path | str) -> "RecordStore":
        store = cls(root)
        index_path = store.root / INDEX_NAME
        if not index_path.exists():
            raise NotFound(f"no store index at {index_path}")
        data = json.loads(index_path.read_text(encoding="utf-8"))
        store._shards = list(data["shards"])
        store._index = {rid: (pos[0], pos[1]) for rid, pos in data["ids"].items()}
        return store

    def close(self) -> None:
        if self._write_handle is not None:
            self._write_handle.close()
            self._write_handle = None
        if self._dirty:
            self._write_index()
            self._dirty = False

    def __enter__(self) -> "RecordStore":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # --- writing ---------------------------------------------------------------

    def put(self, record: Record) -> Record:
        if record.id in self._index:
            raise DuplicateId(record.id)
        if self._write_handle is None or self._write_count >= self.shard_max_records:
            self._open_next_shard()
        offset = self._write_handle.tell()
        self._write_handle.write(dumps_line(record.to_json_dict()) + "\n")
        self._index[record.id] = (len(self._shards) - 1, offset)
        self._write_count += 1
        self._dirty = True
        return record

    def put_all(self, records: Iterable[Record]) -> int:
        n = 0
        for record in records:
            self.put(record)
            n += 1
        return n

    def _open_next_shard(self) -> None:
        if self._write_handle is not None:
            self._write_handle.close()
        name = SHARD_TEMPLATE.format(len(self._shards))
        self._shards.append(name)
        self.root.mkdir(parents=True, exist_ok=True)
        self._write_handle = (self.root / name).open("a", encoding="utf-8")
        self._write_count = 0

    def _write_index(self) -> None:
        index = {
            "version": 1,
            "count": len(self._index),
            "checksum": self.checksum(),
            "shards": self._shards,
            "ids": {rid: list(pos) for rid, pos in sorted(self._index.items())},
        }
        (self.root / INDEX_NAME).write_text(dumps_pretty(index), encoding="utf-8")

    # --- reading ---------------------------------------------------------------

    def get(self, record_id: str) -> Record:
        if record_id not in self._index:
            raise NotFound(record_id)
        if self._write_handle is not None:
            self._write_handle.flush()
        shard_idx, offset = self._index[record_id]
        with (self.root / self._shards[shard_idx]).open("r", encoding="utf-8") as fh:
            fh.seek(offset)
            line = fh.readline()
        return Record.from_json_dict(json.loads(line))

    def ids(self) -> list[str]:
        return sorted(self._index)

    def iter_records(self) -> Iterator[Record]:
        """Records in id order, independent of insertion order."""
        for rid in self.ids():
            yield self.get(rid)

    def checksum(self) -> str:
        return snapshot_checksum(self._index)

    def __contains__(self, record_id: str) -> bool:
        return record_id in self._index

    def __len__(self) -> int:
        return len(self._index)


def write_sorted(root: Path | str, records: Iterable[Record]) -> RecordStore:
    """Write a fresh store with records ordered by id (canonical layout)."""
    store = RecordStore.create(root)
    store.put_all(sorted(records, key=lambda r: r.id))
    store.close()
    return store

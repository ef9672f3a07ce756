"""Append-only chronological record of every plot node a run produces."""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from plotnode.core import Node, NodeKind
from plotnode.errors import OutOfOrderChapter


@dataclass(frozen=True)
class StorylineEntry:
    time_stamp: int
    chapter_index: int
    node: Node
    kind: NodeKind

    def to_dict(self) -> dict:
        return {
            "time_stamp": self.time_stamp,
            "chapter_index": self.chapter_index,
            "node": self.node.to_dict(),
            "kind": self.kind.value,
        }

    @classmethod
    def from_dict(cls, data: dict) -> StorylineEntry:
        return cls(
            time_stamp=int(data["time_stamp"]),
            chapter_index=int(data["chapter_index"]),
            node=Node.from_dict(data["node"]),
            kind=NodeKind(data["kind"]),
        )


class Storyline:
    """Logical-clock event log. Stamps start at 1 and never skip.

    Appends are serialized by a lock; readers get a copy of the entry list
    taken under the same lock, so they never see a half-applied append.
    """

    def __init__(self) -> None:
        self._entries: list[StorylineEntry] = []
        self._next_stamp = 1
        self._lock = threading.Lock()

    @property
    def next_stamp(self) -> int:
        return self._next_stamp

    @property
    def entries(self) -> list[StorylineEntry]:
        with self._lock:
            return list(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self):
        return iter(self.entries)

    def append(self, node: Node, kind: NodeKind, chapter_index: int) -> StorylineEntry:
        if chapter_index < 0:
            raise OutOfOrderChapter(f"chapter_index must be >= 0, got {chapter_index}")
        with self._lock:
            if self._entries and chapter_index < self._entries[-1].chapter_index:
                raise OutOfOrderChapter(
                    f"chapter {chapter_index} after an entry in chapter "
                    f"{self._entries[-1].chapter_index}"
                )
            entry = StorylineEntry(self._next_stamp, chapter_index, node, NodeKind(kind))
            self._entries.append(entry)
            self._next_stamp += 1
        return entry

    def entries_for_chapter(self, chapter_index: int) -> list[StorylineEntry]:
        return [e for e in self.entries if e.chapter_index == chapter_index]

    def latest(self, k: int) -> list[StorylineEntry]:
        if k < 0:
            raise ValueError("k must be >= 0")
        if k == 0:
            return []
        # entries are already in stamp order
        return self.entries[-k:]

    def chapter_indices(self) -> list[int]:
        return sorted({e.chapter_index for e in self.entries})

    # --- persistence ------------------------------------------------------

    def to_records(self) -> list[dict]:
        return [e.to_dict() for e in self.entries]

    @classmethod
    def from_records(cls, records: Iterable[dict]) -> Storyline:
        line = cls()
        for rec in records:
            entry = StorylineEntry.from_dict(rec)
            if entry.time_stamp != line._next_stamp:
                raise ValueError(
                    f"storyline record has stamp {entry.time_stamp}, expected {line._next_stamp}"
                )
            line.append(entry.node, entry.kind, entry.chapter_index)
        return line

    def to_ndjson(self) -> str:
        return "".join(json.dumps(rec, sort_keys=True) + "\n" for rec in self.to_records())

    def export_ndjson(self, path: str | Path) -> None:
        Path(path).write_text(self.to_ndjson(), encoding="utf-8")

    @classmethod
    def read_ndjson(cls, path: str | Path) -> Storyline:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls.from_records(json.loads(line) for line in lines if line.strip())

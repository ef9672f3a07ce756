"""StoryProject: the persisted unit of work for one pipeline run."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from plotnode.core import ChapterPlan, Node, NodeKind, ReviewRecord, validate_chapter_nodes
from plotnode.nekg import NekgGraph
from plotnode.storyline import Storyline

PROJECT_SCHEMA_VERSION = 1


@dataclass
class StoryProject:
    user_input: str
    premise: str = ""
    synopsis: str = ""
    chapters: list[ChapterPlan] = field(default_factory=list)
    chapter_nodes: list[list[tuple[Node, NodeKind]]] = field(default_factory=list)
    text_blocks: list[str] = field(default_factory=list)
    review_log: list[ReviewRecord] = field(default_factory=list)
    config_snapshot: dict[str, Any] = field(default_factory=dict)
    storyline: Storyline = field(default_factory=Storyline)
    graph: Optional[NekgGraph] = None
    budget_exhausted: list[int] = field(default_factory=list)
    status: str = "complete"
    error: Optional[str] = None

    def problems(self) -> list[str]:
        """Invariant violations; an empty list means the project is consistent."""
        out = []
        for i, plan in enumerate(self.chapters):
            if plan.index != i:
                out.append(f"chapter plan {i} has index {plan.index}")
        for i, nodes in enumerate(self.chapter_nodes):
            result = validate_chapter_nodes(nodes)
            if not result.ok:
                out.append(f"chapter {i}: {result.reason}")
        if self.text_blocks and len(self.text_blocks) != len(self.chapters):
            out.append(
                f"{len(self.text_blocks)} text blocks for {len(self.chapters)} chapters"
            )
        return out

    # --- serialization ----------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": PROJECT_SCHEMA_VERSION,
            "status": self.status,
            "error": self.error,
            "user_input": self.user_input,
            "premise": self.premise,
            "synopsis": self.synopsis,
            "chapters": [c.to_dict() for c in self.chapters],
            "chapter_nodes": [
                [{"node": n.to_dict(), "kind": k.value} for n, k in nodes]
                for nodes in self.chapter_nodes
            ],
            "text_blocks": list(self.text_blocks),
            "review_log": [r.to_dict() for r in self.review_log],
            "config_snapshot": self.config_snapshot,
            "storyline": self.storyline.to_records(),
            "graph": self.graph.to_dict() if self.graph is not None else None,
            "budget_exhausted": list(self.budget_exhausted),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> StoryProject:
        version = data.get("schema_version")
        if version != PROJECT_SCHEMA_VERSION:
            raise ValueError(f"unsupported project schema_version {version!r}")
        return cls(
            user_input=data["user_input"],
            premise=data.get("premise", ""),
            synopsis=data.get("synopsis", ""),
            chapters=[ChapterPlan.from_dict(c) for c in data.get("chapters", [])],
            chapter_nodes=[
                [(Node.from_dict(item["node"]), NodeKind(item["kind"])) for item in nodes]
                for nodes in data.get("chapter_nodes", [])
            ],
            text_blocks=list(data.get("text_blocks", [])),
            review_log=[ReviewRecord.from_dict(r) for r in data.get("review_log", [])],
            config_snapshot=dict(data.get("config_snapshot", {})),
            storyline=Storyline.from_records(data.get("storyline", [])),
            graph=NekgGraph.from_dict(data["graph"]) if data.get("graph") else None,
            budget_exhausted=list(data.get("budget_exhausted", [])),
            status=data.get("status", "complete"),
            error=data.get("error"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> StoryProject:
        return cls.from_dict(json.loads(text))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> StoryProject:
        return cls.from_json(Path(path).read_text(encoding="utf-8"))

    def story_text(self) -> str:
        parts = []
        for plan, block in zip(self.chapters, self.text_blocks):
            parts.append(f"Chapter {plan.index + 1}: {plan.title}\n\n{block.strip()}\n")
        return "\n".join(parts)

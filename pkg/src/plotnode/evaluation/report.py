"""EvalReport: the versioned JSON document written by the evaluation commands."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

REPORT_SCHEMA_VERSION = 1


@dataclass
class EvalReport:
    kind: str  # metrics | arena | kappa | stats
    config: dict[str, Any] = field(default_factory=dict)
    per_text: dict[str, dict[str, Any]] = field(default_factory=dict)
    corpus: dict[str, Any] = field(default_factory=dict)
    arena: dict[str, Any] = field(default_factory=dict)
    bootstrap: dict[str, Any] = field(default_factory=dict)
    brier: Optional[float] = None
    kappa: Optional[float] = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "kind": self.kind,
            "config": self.config,
            "per_text": self.per_text,
            "corpus": self.corpus,
            "arena": self.arena,
            "bootstrap": self.bootstrap,
            "brier": self.brier,
            "kappa": self.kappa,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> EvalReport:
        if data.get("schema_version") != REPORT_SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema_version {data.get('schema_version')!r}")
        return cls(
            kind=data["kind"],
            config=data.get("config", {}),
            per_text=data.get("per_text", {}),
            corpus=data.get("corpus", {}),
            arena=data.get("arena", {}),
            bootstrap=data.get("bootstrap", {}),
            brier=data.get("brier"),
            kappa=data.get("kappa"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")


def format_table(rows: list[dict[str, Any]], columns: list[str]) -> str:
    """Plain fixed-width table; floats get six decimals."""

    def cell(v: Any) -> str:
        if isinstance(v, float):
            return f"{v:.6f}"
        return "" if v is None else str(v)

    body = [[cell(r.get(c)) for c in columns] for r in rows]
    widths = [max([len(c)] + [len(b[i]) for b in body]) for i, c in enumerate(columns)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines.extend("  ".join(v.ljust(w) for v, w in zip(b, widths)) for b in body)
    return "\n".join(lines)

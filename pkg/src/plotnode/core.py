"""Plot-node data model: SVO triplets, node roles and chapter structure checks."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from plotnode.errors import EmptySubject, EmptyVerb, NodeError


class NodeKind(str, enum.Enum):
    """Positional role of a node inside its chapter."""

    CBN = "CBN"  # chapter begin
    CPN = "CPN"  # chapter plot
    CEN = "CEN"  # chapter end

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Node:
    """A subject-verb-object event.

    ``sv_normalized`` records that the object was absent and copied from the
    subject. It is provenance only and does not take part in equality, so a
    normalized node compares equal to the same triple written out in full.
    """

    subject: str
    verb: str
    object: str
    sv_normalized: bool = field(default=False, compare=False)

    def __post_init__(self) -> None:
        if not self.subject.strip():
            raise EmptySubject("node subject is empty")
        if not self.verb.strip():
            raise EmptyVerb("node verb is empty")
        if not self.object:
            raise NodeError("node object is empty; use normalize_node for SV pairs")
        if self.sv_normalized and self.object != self.subject:
            raise NodeError("sv_normalized node must have object == subject")

    @property
    def triple(self) -> tuple[str, str, str]:
        return (self.subject, self.verb, self.object)

    def as_block(self) -> str:
        """Single-quoted key/value block, the shape plot-node prompts use."""
        return repr({"subject": self.subject, "verb": self.verb, "object": self.object})

    def __str__(self) -> str:
        if self.sv_normalized:
            return f"{self.subject} {self.verb}"
        return f"{self.subject} {self.verb} {self.object}"

    def to_dict(self) -> dict:
        return {
            "subject": self.subject,
            "verb": self.verb,
            "object": self.object,
            "sv_normalized": self.sv_normalized,
        }

    @classmethod
    def from_dict(cls, data: dict) -> Node:
        return cls(
            subject=data["subject"],
            verb=data["verb"],
            object=data["object"],
            sv_normalized=bool(data.get("sv_normalized", False)),
        )


def normalize_node(subject: str, verb: str, object: Optional[str] = None) -> Node:
    """Build a Node from raw strings, turning an SV pair into an SVS triple."""
    subject = (subject or "").strip()
    verb = (verb or "").strip()
    if not subject:
        raise EmptySubject("subject is empty after trimming")
    if not verb:
        raise EmptyVerb("verb is empty after trimming")
    obj = (object or "").strip()
    if not obj:
        return Node(subject, verb, subject, sv_normalized=True)
    return Node(subject, verb, obj)


@dataclass(frozen=True)
class ChapterPlan:
    index: int
    title: str
    abstract: str

    def __post_init__(self) -> None:
        if self.index < 0:
            raise ValueError("chapter index must be >= 0")
        if not self.title.strip():
            raise ValueError("chapter title is empty")
        if not self.abstract.strip():
            raise ValueError("chapter abstract is empty")

    def to_dict(self) -> dict:
        return {"index": self.index, "title": self.title, "abstract": self.abstract}

    @classmethod
    def from_dict(cls, data: dict) -> ChapterPlan:
        return cls(int(data["index"]), data["title"], data["abstract"])


@dataclass(frozen=True)
class ValidationResult:
    ok: bool
    violation_index: Optional[int] = None
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok


def _expected_kind(i: int, n: int) -> NodeKind:
    if i == 0:
        return NodeKind.CBN
    if i == n - 1:
        return NodeKind.CEN
    return NodeKind.CPN


def validate_chapter_nodes(
    nodes: Sequence[tuple[Node, NodeKind]] | Iterable[NodeKind],
) -> ValidationResult:
    """Check that a chapter's kinds read CBN CPN* CEN.

    Accepts either (node, kind) pairs or bare kinds. An empty chapter is
    valid. On failure the index of the first offending position is returned.
    """
    kinds = [item[1] if isinstance(item, tuple) else item for item in nodes]
    n = len(kinds)
    if n == 0:
        return ValidationResult(True)
    if n == 1:
        return ValidationResult(False, 0, "a chapter needs both a CBN and a CEN")
    for i, kind in enumerate(kinds):
        want = _expected_kind(i, n)
        if NodeKind(kind) is not want:
            return ValidationResult(False, i, f"position {i} is {kind}, expected {want}")
    return ValidationResult(True)


class ReviewType(str, enum.Enum):
    """Closed taxonomy of review modifications."""

    ThemeEnhancement = "ThemeEnhancement"
    LogicAdjustment = "LogicAdjustment"
    EmotionDeepening = "EmotionDeepening"
    MysteryEnhancement = "MysteryEnhancement"
    PlotResolution = "PlotResolution"
    LanguageOptimization = "LanguageOptimization"
    RedundancyOptimization = "RedundancyOptimization"

    @property
    def label(self) -> str:
        return REVIEW_TYPE_INFO[self][0]

    @property
    def description(self) -> str:
        return REVIEW_TYPE_INFO[self][1]

    @classmethod
    def parse(cls, text: str) -> ReviewType:
        """Accept "Logic Adjustment", "[ Logic Adjustment ]", "LogicAdjustment", etc."""
        key = "".join(ch for ch in text if ch.isalnum()).lower()
        for member in cls:
            if member.value.lower() == key:
                return member
        raise ValueError(f"unknown review type {text!r}")


REVIEW_TYPE_INFO: dict[ReviewType, tuple[str, str]] = {
    ReviewType.ThemeEnhancement: (
        "Theme Enhancement",
        "Explore deeper philosophical meanings and core themes through plot or dialogue.",
    ),
    ReviewType.LogicAdjustment: (
        "Logic Adjustment",
        "Optimize the causal relationships and pacing of the plot to ensure smooth "
        "and natural story progression.",
    ),
    ReviewType.EmotionDeepening: (
        "Emotion Deepening",
        "Show authentic emotional changes and growth in characters to make them "
        "more vivid and relatable.",
    ),
    ReviewType.MysteryEnhancement: (
        "Mystery Enhancement",
        "Create a sense of mystery and the supernatural through detailed descriptions "
        "and suspenseful setups.",
    ),
    ReviewType.PlotResolution: (
        "Plot Resolution",
        "Craft compelling chapter endings that both summarize the current plot and "
        "set up future developments.",
    ),
    ReviewType.LanguageOptimization: (
        "Language Optimization",
        "Polish the narrative to make the language more vivid, elegant, and aligned "
        "with the story's tone.",
    ),
    ReviewType.RedundancyOptimization: (
        "Redundancy Optimization",
        "Ensure consistency in timelines, settings, and character behavior while "
        "removing redundant or repetitive information.",
    ),
}


class ReviewOutcome(str, enum.Enum):
    Accepted = "Accepted"
    Modified = "Modified"


@dataclass(frozen=True)
class ReviewRecord:
    chapter_index: int
    pseudo: Node
    outcome: ReviewOutcome
    final: Optional[Node] = None
    review_type: Optional[ReviewType] = None
    explanation: str = ""

    def __post_init__(self) -> None:
        modified = self.outcome is ReviewOutcome.Modified
        if modified != (self.review_type is not None):
            raise ValueError("review_type must be present iff the outcome is Modified")
        if modified != (self.final is not None):
            raise ValueError("final node must be present iff the outcome is Modified")

    @property
    def accepted_node(self) -> Node:
        return self.final if self.final is not None else self.pseudo

    def to_dict(self) -> dict:
        return {
            "chapter_index": self.chapter_index,
            "pseudo": self.pseudo.to_dict(),
            "outcome": self.outcome.value,
            "final": self.final.to_dict() if self.final else None,
            "review_type": self.review_type.value if self.review_type else None,
            "explanation": self.explanation,
        }

    @classmethod
    def from_dict(cls, data: dict) -> ReviewRecord:
        return cls(
            chapter_index=int(data["chapter_index"]),
            pseudo=Node.from_dict(data["pseudo"]),
            outcome=ReviewOutcome(data["outcome"]),
            final=Node.from_dict(data["final"]) if data.get("final") else None,
            review_type=ReviewType(data["review_type"]) if data.get("review_type") else None,
            explanation=data.get("explanation", ""),
        )

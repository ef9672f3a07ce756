"""Loader for tagged writing-prompt files (one prompt per line)."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from plotnode.errors import FileUnreadable

logger = logging.getLogger(__name__)

PROMPT_TAGS = {
    "WP": "Writing Prompt",
    "SP": "Simple Prompt",
    "EU": "Established Universe",
    "CW": "Constrained Writing",
    "TT": "Theme Thursday",
    "PM": "Prompt Me",
    "MP": "Media Prompt",
    "IP": "Image Prompt",
    "PI": "Prompt Inspired",
    "OT": "Off Topic",
    "RF": "Reality Fiction",
}

_TAGGED = re.compile(r"^\s*\[\s*([A-Za-z]{2})\s*\]\s*(.*)$")


@dataclass(frozen=True)
class PromptRecord:
    line_no: int
    tag: str
    prompt_text: str

    @property
    def prompt_id(self) -> str:
        return f"line{self.line_no:05d}"


@dataclass
class PromptDataset:
    prompts: list[PromptRecord] = field(default_factory=list)
    skipped: list[tuple[int, str]] = field(default_factory=list)  # (line number, reason)

    def __len__(self) -> int:
        return len(self.prompts)

    def __iter__(self):
        return iter(self.prompts)


def parse_prompt_line(line: str) -> Optional[tuple[str, str]]:
    """``(tag, text)`` for a line starting with a known bracketed tag, else None."""
    m = _TAGGED.match(line)
    if not m:
        return None
    tag = m.group(1).upper()
    if tag not in PROMPT_TAGS:
        return None
    return tag, m.group(2).strip()


def load_prompt_dataset(path: str | Path, tag_filter: Optional[str] = None) -> PromptDataset:
    """Read prompts, keeping those whose tag equals ``tag_filter`` when it is given.

    Lines without a recognised tag are skipped and listed in ``skipped``;
    lines filtered out by tag are dropped silently. Blank lines are ignored.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise FileUnreadable(f"cannot read prompt file {path}: {exc}") from exc
    wanted = tag_filter.strip().strip("[]").strip().upper() if tag_filter else None
    dataset = PromptDataset()
    for line_no, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        parsed = parse_prompt_line(line)
        if parsed is None:
            reason = "unknown tag" if _TAGGED.match(line) else "no tag"
            dataset.skipped.append((line_no, reason))
            continue
        tag, prompt = parsed
        if wanted is not None and tag != wanted:
            continue
        dataset.prompts.append(PromptRecord(line_no, tag, prompt))
    if dataset.skipped:
        logger.info("%s: skipped %d untagged lines", path, len(dataset.skipped))
    return dataset

"""Extraction of structured blocks from free-form model output.

Blocks are brace- or bracket-delimited literals in either the single-quoted
key/value style (``{'subject': 'Ethan', 'verb': 'walk', 'object': ''}``)
or standard JSON. Candidates are tried in order of their opening position;
the first one that parses and fits the schema wins.
"""

from __future__ import annotations

import ast
import re
from dataclasses import dataclass
from typing import Any, Callable, Iterator, Optional

from plotnode.core import ReviewType
from plotnode.errors import ParseFailure

SCHEMA_IDS = (
    "node_triplet",
    "node_list",
    "chapter_plan_list",
    "review_outcome",
    "alignment_verdict",
    "premise_synopsis",
)

_SPAN_LIMIT = 400
_NAMES = {"true": True, "false": False, "null": None, "True": True, "False": False, "None": None}


@dataclass(frozen=True)
class ReviewDecision:
    passed: bool
    review_type: Optional[ReviewType] = None
    node: Optional[tuple[str, str, Optional[str]]] = None
    explanation: str = ""


def _span(text: str) -> str:
    return text if len(text) <= _SPAN_LIMIT else text[:_SPAN_LIMIT] + "..."


def _closing(text: str, start: int) -> Optional[int]:
    """Index of the bracket closing the one at ``start``, skipping quoted strings."""
    pairs = {"{": "}", "[": "]"}
    stack = [pairs[text[start]]]
    quote = None
    i = start + 1
    while i < len(text):
        ch = text[i]
        if quote:
            if ch == "\\":
                i += 2
                continue
            if ch == quote:
                quote = None
        elif ch in ("'", '"'):
            quote = ch
        elif ch in pairs:
            stack.append(pairs[ch])
        elif ch in "}]":
            if ch != stack[-1]:
                return None
            stack.pop()
            if not stack:
                return i
        i += 1
    return None


def _literal(source: str) -> Any:
    """Evaluate a literal in Python or JSON syntax; rejects anything executable."""
    tree = ast.parse(source.strip(), mode="eval")

    def ev(node: ast.AST) -> Any:
        if isinstance(node, ast.Constant) and isinstance(node.value, (str, int, float, bool, type(None))):
            return node.value
        if isinstance(node, ast.Dict):
            if any(k is None for k in node.keys):
                raise ValueError("dict unpacking is not a literal")
            return {ev(k): ev(v) for k, v in zip(node.keys, node.values)}
        if isinstance(node, (ast.List, ast.Tuple)):
            return [ev(el) for el in node.elts]
        if isinstance(node, ast.Name) and node.id in _NAMES:
            return _NAMES[node.id]
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            value = ev(node.operand)
            if isinstance(value, (int, float)) and not isinstance(value, bool):
                return -value if isinstance(node.op, ast.USub) else value
        if isinstance(node, ast.JoinedStr):
            raise ValueError("f-strings are not literals")
        raise ValueError(f"unsupported syntax: {type(node).__name__}")

    return ev(tree.body)


def iter_blocks(text: str, openers: str = "{[") -> Iterator[tuple[Any, str]]:
    """Yield (value, source) for every parseable bracketed literal, by start position."""
    for i, ch in enumerate(text):
        if ch not in openers:
            continue
        end = _closing(text, i)
        if end is None:
            continue
        source = text[i : end + 1]
        try:
            yield _literal(source), source
        except (SyntaxError, ValueError, TypeError, RecursionError):
            continue


# --- schema checks: return the converted value or raise ValueError --------


def _str_field(d: dict, key: str, required: bool = True) -> Optional[str]:
    if key not in d or d[key] is None:
        if required:
            raise ValueError(f"missing {key!r}")
        return None
    value = d[key]
    if not isinstance(value, str):
        raise ValueError(f"{key!r} must be a string")
    return value


def _triplet(value: Any) -> tuple[str, str, Optional[str]]:
    if not isinstance(value, dict):
        raise ValueError("not a mapping")
    subject = _str_field(value, "subject")
    verb = _str_field(value, "verb")
    if not subject.strip() or not verb.strip():
        raise ValueError("subject and verb must be non-empty")
    return (subject, verb, _str_field(value, "object", required=False))


def _node_list(value: Any) -> list[tuple[str, str, Optional[str]]]:
    if isinstance(value, dict) and "nodes" in value:
        value = value["nodes"]
    if not isinstance(value, list) or not value:
        raise ValueError("not a non-empty list")
    return [_triplet(v) for v in value]


def _plan_list(value: Any) -> list[tuple[str, str]]:
    if isinstance(value, dict) and "chapters" in value:
        value = value["chapters"]
    if not isinstance(value, list) or not value:
        raise ValueError("not a non-empty list")
    plans = []
    for item in value:
        if not isinstance(item, dict):
            raise ValueError("chapter entry is not a mapping")
        title = _str_field(item, "title")
        abstract = _str_field(item, "abstract")
        if not title.strip() or not abstract.strip():
            raise ValueError("chapter title and abstract must be non-empty")
        plans.append((title, abstract))
    return plans


def _review(value: Any) -> ReviewDecision:
    if not isinstance(value, dict) or "passed" not in value:
        raise ValueError("review block needs a 'passed' field")
    passed = value["passed"]
    if isinstance(passed, str) and passed.strip().lower() in ("true", "false", "yes", "no"):
        passed = passed.strip().lower() in ("true", "yes")
    if not isinstance(passed, bool):
        raise ValueError("'passed' must be a boolean")
    if passed:
        return ReviewDecision(True, explanation=str(value.get("explanation") or ""))
    raw_type = _str_field(value, "type")
    review_type = ReviewType.parse(raw_type)
    node = _triplet(value.get("node"))
    explanation = _str_field(value, "explanation", required=False) or ""
    return ReviewDecision(False, review_type, node, explanation)


def _premise(value: Any) -> tuple[str, str]:
    if not isinstance(value, dict):
        raise ValueError("not a mapping")
    return (_str_field(value, "premise"), _str_field(value, "synopsis"))


_YES_NO = re.compile(r"^\W*(yes|no)\b", re.IGNORECASE)


def _parse_alignment(text: str) -> bool:
    for value, _ in iter_blocks(text, "{"):
        if isinstance(value, dict) and isinstance(value.get("aligned"), bool):
            return value["aligned"]
    m = _YES_NO.match(text)
    if m:
        return m.group(1).lower() == "yes"
    raise ParseFailure("expected a yes/no verdict", _span(text))


_CHECKS: dict[str, tuple[str, Callable[[Any], Any]]] = {
    "node_triplet": ("{", _triplet),
    "node_list": ("[{", _node_list),
    "chapter_plan_list": ("[{", _plan_list),
    "review_outcome": ("{", _review),
    "premise_synopsis": ("{", _premise),
}


def parse_structured(text: str, schema_id: str) -> Any:
    """Extract and validate the first block in ``text`` matching ``schema_id``.

    Returns a (subject, verb, object) tuple for ``node_triplet``, a list of
    those for ``node_list``, (title, abstract) pairs for
    ``chapter_plan_list``, a ReviewDecision for ``review_outcome``, a bool
    for ``alignment_verdict`` and (premise, synopsis) for
    ``premise_synopsis``.
    """
    if schema_id not in SCHEMA_IDS:
        raise ValueError(f"unknown schema {schema_id!r}")
    if not text or not text.strip():
        raise ParseFailure(f"empty response for {schema_id}", text or "")
    if schema_id == "alignment_verdict":
        return _parse_alignment(text)
    openers, check = _CHECKS[schema_id]
    last_error = "no block found"
    for value, _source in iter_blocks(text, openers):
        try:
            return check(value)
        except ValueError as exc:
            last_error = str(exc)
    raise ParseFailure(f"no valid {schema_id} block ({last_error})", _span(text))

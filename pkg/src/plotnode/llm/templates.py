"""Plain-text prompt templates with ``{NAME}`` placeholders.

Placeholder names are upper-case identifiers. Any other brace is literal,
so templates can show example blocks such as ``{'subject': '...'}``
without escaping. Substitution is a single pass: text inside a binding is
never re-scanned.
"""

from __future__ import annotations

import re
from importlib import resources
from pathlib import Path
from typing import Mapping, Optional

from plotnode.errors import MissingBinding, UnknownTemplate, UnusedBinding

PLACEHOLDER = re.compile(r"\{([A-Z][A-Z0-9_]*)\}")


def placeholders(text: str) -> list[str]:
    """Placeholder names in order of first appearance."""
    seen: dict[str, None] = {}
    for m in PLACEHOLDER.finditer(text):
        seen.setdefault(m.group(1), None)
    return list(seen)


def substitute(text: str, bindings: Mapping[str, str], strict: bool = True) -> str:
    names = placeholders(text)
    for name in names:
        if name not in bindings:
            raise MissingBinding(name)
    if strict:
        unused = sorted(set(bindings) - set(names))
        if unused:
            raise UnusedBinding(unused)
    return PLACEHOLDER.sub(lambda m: str(bindings[m.group(1)]), text)


class TemplateLibrary:
    """Templates loaded from the shipped directory, optionally overlaid by a user directory."""

    def __init__(self, directory: Optional[str | Path] = None, include_builtin: bool = True):
        self._templates: dict[str, str] = {}
        if include_builtin:
            pkg = resources.files("plotnode") / "templates"
            for item in sorted(pkg.iterdir(), key=lambda p: p.name):
                if item.name.endswith(".txt"):
                    self._templates[item.name[:-4]] = _load(item.read_text(encoding="utf-8"))
        if directory is not None:
            for path in sorted(Path(directory).glob("*.txt")):
                self._templates[path.stem] = _load(path.read_text(encoding="utf-8"))

    def __contains__(self, template_id: str) -> bool:
        return template_id in self._templates

    def ids(self) -> list[str]:
        return sorted(self._templates)

    def add(self, template_id: str, text: str) -> None:
        self._templates[template_id] = text

    def get(self, template_id: str) -> str:
        try:
            return self._templates[template_id]
        except KeyError:
            raise UnknownTemplate(template_id) from None

    def render(self, template_id: str, bindings: Mapping[str, str]) -> str:
        return substitute(self.get(template_id), bindings)


def _load(text: str) -> str:
    # files end with one newline that is not part of the template
    return text[:-1] if text.endswith("\n") else text


_default_library: Optional[TemplateLibrary] = None


def default_library() -> TemplateLibrary:
    global _default_library
    if _default_library is None:
        _default_library = TemplateLibrary()
    return _default_library


def render_template(
    template_id: str,
    bindings: Mapping[str, str],
    library: Optional[TemplateLibrary] = None,
) -> str:
    return (library or default_library()).render(template_id, bindings)

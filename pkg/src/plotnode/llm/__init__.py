"""Prompt templating, backends and structured-output parsing."""

from plotnode.llm.gateway import (
    ANY,
    Backend,
    Completion,
    Decoding,
    Gateway,
    OpenAIChatBackend,
    PromptRequest,
    ScriptedBackend,
    complete,
)
from plotnode.llm.parsing import ReviewDecision, parse_structured
from plotnode.llm.templates import TemplateLibrary, render_template

__all__ = [
    "ANY",
    "Backend",
    "Completion",
    "Decoding",
    "Gateway",
    "OpenAIChatBackend",
    "PromptRequest",
    "ReviewDecision",
    "ScriptedBackend",
    "TemplateLibrary",
    "complete",
    "parse_structured",
    "render_template",
]

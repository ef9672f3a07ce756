"""Text-generation backends and the gateway that renders, sends and logs prompts."""

from __future__ import annotations

import json
import logging
import os
import random
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Optional, Protocol, Sequence

import httpx

from plotnode.errors import (
    BackendExhausted,
    GatewayError,
    MissingBinding,
    NoVerdictFound,
    ParseFailure,
    ScriptUnderrun,
    UnusedBinding,
)
from plotnode.llm.templates import TemplateLibrary, default_library, placeholders

logger = logging.getLogger(__name__)

DEFAULT_TEMPERATURE = 0.0
DEFAULT_MAX_TOKENS = 16384
DEFAULT_RETRY_LIMIT = 3
DEFAULT_BACKOFF = (1.0, 2.0, 4.0)
DEFAULT_JITTER = 0.25  # fraction of each backoff step
API_KEY_ENV = "PLOTNODE_API_KEY"
ANY = "any"

_TRANSIENT_STATUS = {408, 409, 425, 429, 500, 502, 503, 504}


@dataclass(frozen=True)
class Decoding:
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: int = DEFAULT_MAX_TOKENS
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")


@dataclass(frozen=True)
class PromptRequest:
    template_id: str
    bindings: Mapping[str, str] = field(default_factory=dict)
    decoding: Decoding = field(default_factory=Decoding)

    def check(self, library: TemplateLibrary) -> None:
        names = placeholders(library.get(self.template_id))
        for name in names:
            if name not in self.bindings:
                raise MissingBinding(name)
        unused = sorted(set(self.bindings) - set(names))
        if unused:
            raise UnusedBinding(unused)

    def render(self, library: Optional[TemplateLibrary] = None) -> str:
        return (library or default_library()).render(self.template_id, self.bindings)


@dataclass(frozen=True)
class Completion:
    text: str
    backend_id: str
    attempt_count: int = 1


class Backend(Protocol):
    backend_id: str

    def complete(self, request: PromptRequest, prompt: str) -> Completion: ...


# --- scripted backend -----------------------------------------------------


class ScriptedBackend:
    """Replays canned responses for hermetic runs.

    Each script entry is ``(matcher, response)`` where matcher is a
    template id or ``"any"``. A request consumes the first entry at or after
    the cursor whose matcher fits; entries passed over on the way are
    skipped for good. This lets one script serve ablation runs that make
    a subset of the calls. With ``cycle`` the script restarts when used up.
    """

    backend_id = "scripted"

    def __init__(self, script: Iterable[tuple[str, str]], cycle: bool = False):
        self.script: list[tuple[str, str]] = [(str(m), str(r)) for m, r in script]
        self.cycle = cycle
        self.cursor = 0
        self.skipped = 0
        self._lock = threading.Lock()

    def _find(self, template_id: str, start: int) -> Optional[int]:
        for i in range(start, len(self.script)):
            matcher = self.script[i][0]
            if matcher == ANY or matcher == template_id:
                return i
        return None

    def complete(self, request: PromptRequest, prompt: str) -> Completion:
        with self._lock:
            idx = self._find(request.template_id, self.cursor)
            if idx is None and self.cycle and self.script:
                self.cursor = 0
                idx = self._find(request.template_id, 0)
            if idx is None:
                raise ScriptUnderrun(
                    f"script has no remaining entry for template {request.template_id!r} "
                    f"(cursor {self.cursor} of {len(self.script)})"
                )
            self.skipped += idx - self.cursor
            self.cursor = idx + 1
            return Completion(self.script[idx][1], self.backend_id, 1)

    @classmethod
    def from_replay(cls, path: str | Path, cycle: bool = False) -> ScriptedBackend:
        """Load a replay/script file.

        JSON-lines, one object per call with ``response`` plus either
        ``match`` or ``template_id``. A transcript written by
        :class:`Gateway` is a valid replay file.
        """
        entries = []
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            rec = json.loads(line)
            if "response" not in rec:
                raise ValueError(f"{path}:{lineno}: replay record has no 'response'")
            matcher = rec.get("match", rec.get("template_id", ANY))
            entries.append((matcher, rec["response"]))
        return cls(entries, cycle=cycle)


# --- remote backend -------------------------------------------------------


class TransientError(Exception):
    pass


class OpenAIChatBackend:
    """Client for any OpenAI-compatible ``/chat/completions`` endpoint.

    The API key is read from the environment only. Transport errors and
    429/5xx responses are retried with exponential backoff and jitter.
    """

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key_env: str = API_KEY_ENV,
        retry_limit: int = DEFAULT_RETRY_LIMIT,
        backoff: Sequence[float] = DEFAULT_BACKOFF,
        jitter: float = DEFAULT_JITTER,
        rng: Optional[random.Random] = None,
        sleep: Callable[[float], None] = time.sleep,
        transport: Optional[httpx.BaseTransport] = None,
        timeout: float = 600.0,
    ):
        if retry_limit < 0:
            raise ValueError("retry_limit must be >= 0")
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key_env = api_key_env
        self.retry_limit = retry_limit
        self.backoff = tuple(backoff) or (1.0,)
        self.jitter = jitter
        self.rng = rng or random.Random(0)
        self.sleep = sleep
        self.backend_id = f"openai-chat:{model}"
        self._client = httpx.Client(transport=transport, timeout=timeout)

    def _delay(self, attempt: int) -> float:
        base = self.backoff[min(attempt - 1, len(self.backoff) - 1)]
        return base * (1.0 + self.jitter * self.rng.random())

    def _payload(self, request: PromptRequest, prompt: str) -> dict[str, Any]:
        body: dict[str, Any] = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": request.decoding.temperature,
            "max_tokens": request.decoding.max_tokens,
        }
        if request.decoding.seed is not None:
            body["seed"] = request.decoding.seed
        return body

    def _send(self, body: dict[str, Any]) -> str:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        try:
            resp = self._client.post(f"{self.base_url}/chat/completions", json=body, headers=headers)
        except httpx.TransportError as exc:
            raise TransientError(str(exc)) from exc
        if resp.status_code in _TRANSIENT_STATUS:
            raise TransientError(f"HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise GatewayError(f"HTTP {resp.status_code}: {resp.text[:300]}")
        try:
            return resp.json()["choices"][0]["message"]["content"] or ""
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise GatewayError(f"malformed completion response: {resp.text[:300]}") from exc

    def complete(self, request: PromptRequest, prompt: str) -> Completion:
        body = self._payload(request, prompt)
        attempts = 0
        while True:
            attempts += 1
            try:
                text = self._send(body)
                return Completion(text, self.backend_id, attempts)
            except TransientError as exc:
                if attempts > self.retry_limit:
                    raise BackendExhausted(
                        f"{self.backend_id}: gave up after {attempts} attempts ({exc})"
                    ) from exc
                delay = self._delay(attempts)
                logger.warning("transient failure (%s), retry %d in %.2fs", exc, attempts, delay)
                self.sleep(delay)

    def close(self) -> None:
        self._client.close()


# --- gateway --------------------------------------------------------------


class Gateway:
    """Renders templates, calls the backend and reports one event per call.

    ``listeners`` receive a dict per call; ``transcript`` (a path) collects a
    replay file that can seed a ScriptedBackend later.
    """

    def __init__(
        self,
        backend: Backend,
        templates: Optional[TemplateLibrary] = None,
        decoding: Optional[Decoding] = None,
        transcript: Optional[str | Path] = None,
    ):
        self.backend = backend
        self.templates = templates or default_library()
        self.decoding = decoding or Decoding()
        self.transcript = Path(transcript) if transcript else None
        self.listeners: list[Callable[[dict], None]] = []
        self.call_count = 0
        self._lock = threading.Lock()

    def _emit(self, event: dict) -> None:
        for fn in self.listeners:
            fn(event)

    def request(self, template_id: str, bindings: Mapping[str, str]) -> PromptRequest:
        return PromptRequest(template_id, dict(bindings), self.decoding)

    def complete(self, request: PromptRequest) -> Completion:
        prompt = request.render(self.templates)
        with self._lock:
            self.call_count += 1
        try:
            completion = self.backend.complete(request, prompt)
        except GatewayError as exc:
            self._emit({"event": "llm_call", "template_id": request.template_id,
                        "outcome": type(exc).__name__})
            raise
        self._emit({"event": "llm_call", "template_id": request.template_id, "outcome": "ok",
                    "attempts": completion.attempt_count})
        if self.transcript is not None:
            rec = {"template_id": request.template_id, "prompt": prompt,
                   "response": completion.text, "backend_id": completion.backend_id}
            with self._lock, self.transcript.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
        return completion

    def ask(self, template_id: str, **bindings: str) -> Completion:
        return self.complete(self.request(template_id, bindings))

    def ask_parsed(
        self,
        template_id: str,
        bindings: Mapping[str, str],
        parse: Callable[[str], Any],
        retry_on: tuple[type[Exception], ...] = (ParseFailure, NoVerdictFound),
    ) -> Any:
        """Call, parse, and on a parse error re-prompt once quoting the error.

        A second failure propagates the parser's exception.
        """
        request = self.request(template_id, bindings)
        completion = self.complete(request)
        try:
            return parse(completion.text)
        except retry_on as exc:
            self._emit({"event": "parse_error", "template_id": template_id, "error": str(exc)})
            repair = self.request(
                "repair",
                {"ERROR": str(exc), "PROMPT": request.render(self.templates),
                 "RESPONSE": completion.text},
            )
            second = self.complete(repair)
            return parse(second.text)


def complete(backend: Backend, request: PromptRequest,
             templates: Optional[TemplateLibrary] = None) -> Completion:
    """Render ``request`` and send it to ``backend`` without a gateway."""
    return backend.complete(request, request.render(templates))

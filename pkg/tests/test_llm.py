import json

import httpx
import pytest
from hypothesis import given
from hypothesis import strategies as st

from plotnode.errors import (
    BackendExhausted,
    GatewayError,
    MissingBinding,
    ParseFailure,
    ScriptUnderrun,
    UnknownTemplate,
    UnusedBinding,
)
from plotnode.llm import (
    Gateway,
    OpenAIChatBackend,
    PromptRequest,
    ScriptedBackend,
    TemplateLibrary,
    complete,
    parse_structured,
    render_template,
)
from plotnode.llm.templates import placeholders, substitute

# --- templates ------------------------------------------------------------


def test_chat_template_ends_with_prompt():
    text = render_template("chat", {"WP": "A dragon's last day"})
    assert text.endswith("[Writing Prompts]:A dragon's last day")
    assert "at least 3,000 words long" in text


def test_chat_template_requirement_list():
    text = render_template("chat", {"WP": "x"})
    for i in range(1, 9):
        assert f"\n{i}. " in text


def test_no_placeholder_template_is_verbatim():
    lib = TemplateLibrary(include_builtin=False)
    lib.add("plain", "Nothing to fill in {here}.")
    assert lib.render("plain", {}) == "Nothing to fill in {here}."


def test_missing_and_unused_binding():
    with pytest.raises(MissingBinding) as exc:
        render_template("chat", {})
    assert exc.value.name == "WP"
    with pytest.raises(UnusedBinding):
        render_template("chat", {"WP": "x", "EXTRA": "y"})
    with pytest.raises(UnknownTemplate):
        render_template("nope", {})


def test_substitution_is_single_pass():
    assert substitute("{A}{B}", {"A": "{B}", "B": "b"}) == "{B}b"


def test_templates_dir_override(tmp_path):
    (tmp_path / "chat.txt").write_text("custom {WP}\n")
    lib = TemplateLibrary(tmp_path)
    assert lib.render("chat", {"WP": "x"}) == "custom x"
    assert "judge" in lib.ids()


def test_builtin_placeholders():
    assert placeholders(TemplateLibrary().get("alignment")) == ["CPN", "CEN"]
    for tid in TemplateLibrary().ids():
        assert tid  # every builtin template loads


@given(st.text(alphabet=st.characters(blacklist_characters="{}"), max_size=80))
def test_rerender_identity(text):
    lib = TemplateLibrary(include_builtin=False)
    lib.add("t", "{X}")
    out = lib.render("t", {"X": text})
    lib.add("u", out)
    assert lib.render("u", {}) == out


def test_premise_prompt_wording():
    text = render_template("premise_synopsis", {"USER_INPUT": "x"})
    assert "era, setting, and societal context" in text
    assert "main plot, character dynamics, and key narrative twists" in text


# --- parsing --------------------------------------------------------------


def test_parse_triplet_single_quoted():
    assert parse_structured("{'subject': 'Ethan', 'verb': 'walk', 'object': ''}",
                            "node_triplet") == ("Ethan", "walk", "")


def test_parse_triplet_json_and_first_wins():
    text = 'a {"subject": "A", "verb": "b", "object": "C"} then {"subject": "X", "verb": "y"}'
    assert parse_structured(text, "node_triplet") == ("A", "b", "C")


def test_parse_skips_invalid_blocks():
    text = "{'note': 1} {'subject': 'S', 'verb': 'v', 'object': 'O'}"
    assert parse_structured(text, "node_triplet") == ("S", "v", "O")


def test_parse_braces_inside_strings():
    text = "{'subject': 'A }', 'verb': 'says {hi}', 'object': 'B'}"
    assert parse_structured(text, "node_triplet") == ("A }", "says {hi}", "B")


@pytest.mark.parametrize("text", ["", "   ", "no block", "{'subject': ''}", "{broken"])
def test_parse_failure(text):
    with pytest.raises(ParseFailure):
        parse_structured(text, "node_triplet")


def test_parse_never_evaluates_code():
    with pytest.raises(ParseFailure):
        parse_structured("{'subject': __import__('os').getcwd(), 'verb': 'v'}", "node_triplet")


def test_parse_review_and_alignment():
    ok = parse_structured("{'passed': True}", "review_outcome")
    assert ok.passed
    bad = parse_structured(
        "{'passed': False, 'type': 'Redundancy Optimization', "
        "'node': {'subject': 'Ethan and Lily', 'verb': 'continue', 'object': 'walk'}, "
        "'explanation': 'is redundant because it repeats'}",
        "review_outcome",
    )
    assert not bad.passed and bad.review_type.value == "RedundancyOptimization"
    with pytest.raises(ParseFailure):
        parse_structured("{'passed': False, 'type': 'Plot Twist', 'node': "
                         "{'subject': 'a', 'verb': 'b'}}", "review_outcome")
    assert parse_structured("Yes, it does.", "alignment_verdict") is True
    assert parse_structured('{"aligned": false}', "alignment_verdict") is False
    with pytest.raises(ParseFailure):
        parse_structured("maybe", "alignment_verdict")


def test_parse_plans_and_lists():
    plans = parse_structured("[{'title': 'T', 'abstract': 'A'}, {'title': 'U', 'abstract': 'B'}]",
                             "chapter_plan_list")
    assert plans == [("T", "A"), ("U", "B")]
    nodes = parse_structured('[{"subject": "a", "verb": "b", "object": null}]', "node_list")
    assert nodes == [("a", "b", None)]
    with pytest.raises(ValueError):
        parse_structured("x", "unknown_schema")


# --- backends -------------------------------------------------------------


def test_scripted_basic_and_underrun():
    req = PromptRequest("chat", {"WP": "x"})
    c = complete(ScriptedBackend([("any", "hello")]), req)
    assert (c.text, c.attempt_count) == ("hello", 1)
    with pytest.raises(ScriptUnderrun):
        complete(ScriptedBackend([]), req)


def test_scripted_skip_forward_and_cycle():
    b = ScriptedBackend([("review", "r1"), ("alignment", "yes"), ("alignment", "no")])
    req = PromptRequest("alignment", {"CPN": "a", "CEN": "b"})
    assert complete(b, req).text == "yes"
    assert b.skipped == 1 and b.cursor == 2
    assert complete(b, req).text == "no"
    with pytest.raises(ScriptUnderrun):
        complete(b, req)
    cyc = ScriptedBackend([("any", "a"), ("any", "b")], cycle=True)
    assert [complete(cyc, req).text for _ in range(5)] == ["a", "b", "a", "b", "a"]


def test_replay_roundtrip(tmp_path):
    path = tmp_path / "t.jsonl"
    gw = Gateway(ScriptedBackend([("any", "one"), ("any", "two")]), transcript=path)
    gw.ask("chat", WP="a")
    gw.ask("alignment", CPN="x", CEN="y")
    replay = ScriptedBackend.from_replay(path)
    assert replay.script == [("chat", "one"), ("alignment", "two")]


def _mock_backend(responses, **kw):
    calls = []

    def handler(request: httpx.Request) -> httpx.Response:
        calls.append(json.loads(request.content))
        item = responses[len(calls) - 1]
        if isinstance(item, Exception):
            raise item
        if isinstance(item, int):
            return httpx.Response(item, text="err")
        return httpx.Response(200, json={"choices": [{"message": {"content": item}}]})

    sleeps = []
    backend = OpenAIChatBackend("http://llm.test/v1", "m", transport=httpx.MockTransport(handler),
                                sleep=sleeps.append, **kw)
    return backend, calls, sleeps


def test_remote_retries_then_succeeds():
    backend, calls, sleeps = _mock_backend(
        [httpx.ConnectError("down"), 503, "story"])
    c = complete(backend, PromptRequest("chat", {"WP": "x"}))
    assert c.text == "story" and c.attempt_count == 3
    assert len(sleeps) == 2
    assert 1.0 <= sleeps[0] <= 1.25 and 2.0 <= sleeps[1] <= 2.5
    assert calls[0]["temperature"] == 0 and calls[0]["max_tokens"] == 16384


def test_remote_exhausted():
    backend, calls, sleeps = _mock_backend([500, 500, 500, 500, "late"])
    with pytest.raises(BackendExhausted):
        complete(backend, PromptRequest("chat", {"WP": "x"}))
    assert len(calls) == 4
    assert [round(s) for s in sleeps] == [1, 2, 4]


def test_remote_client_error_not_retried():
    backend, calls, _ = _mock_backend([400])
    with pytest.raises(GatewayError):
        complete(backend, PromptRequest("chat", {"WP": "x"}))
    assert len(calls) == 1


def test_remote_api_key_from_env(monkeypatch):
    seen = {}

    def handler(request):
        seen["auth"] = request.headers.get("authorization")
        return httpx.Response(200, json={"choices": [{"message": {"content": "ok"}}]})

    monkeypatch.setenv("PLOTNODE_API_KEY", "sekrit")
    b = OpenAIChatBackend("http://x", "m", transport=httpx.MockTransport(handler))
    complete(b, PromptRequest("chat", {"WP": "x"}))
    assert seen["auth"] == "Bearer sekrit"


# --- gateway --------------------------------------------------------------


def test_gateway_events_and_repair():
    gw = Gateway(ScriptedBackend([("alignment", "maybe"), ("repair", "yes")]))
    events = []
    gw.listeners.append(events.append)
    assert gw.ask_parsed("alignment", {"CPN": "a", "CEN": "b"},
                         lambda t: parse_structured(t, "alignment_verdict")) is True
    assert [e["event"] for e in events] == ["llm_call", "parse_error", "llm_call"]
    assert events[2]["template_id"] == "repair"
    assert gw.call_count == 2


def test_gateway_second_failure_propagates():
    gw = Gateway(ScriptedBackend([("any", "maybe"), ("any", "perhaps")]))
    with pytest.raises(ParseFailure):
        gw.ask_parsed("alignment", {"CPN": "a", "CEN": "b"},
                      lambda t: parse_structured(t, "alignment_verdict"))


def test_gateway_failure_event():
    gw = Gateway(ScriptedBackend([]))
    events = []
    gw.listeners.append(events.append)
    with pytest.raises(ScriptUnderrun):
        gw.ask("chat", WP="x")
    assert events == [{"event": "llm_call", "template_id": "chat", "outcome": "ScriptUnderrun"}]

import json
import random
from collections import Counter

import pytest

from conftest import RUN1, USER_INPUT, scripted
from plotnode.core import ChapterPlan, Node, NodeKind, ReviewOutcome, ReviewRecord, ReviewType
from plotnode.errors import EmptyGeneration, ParseFailure, PipelineAborted, PlanCountMismatch
from plotnode.llm.gateway import Gateway, ScriptedBackend
from plotnode.nekg import NekgGraph
from plotnode.pipeline import (
    LOOP_BUDGET_EXHAUSTED,
    ChapterContext,
    PipelineConfig,
    RunLog,
    commit_node,
    max_llm_calls_per_chapter,
    review_type_stats,
    run_pipeline,
    stage1_chapter_plans,
    stage1_premise_synopsis,
    stage2_alignment_check,
    stage2_boundary_nodes,
    stage2_generate_chapter,
    stage3_text_block,
)
from plotnode.project import StoryProject
from plotnode.storyline import Storyline

PLAN = ChapterPlan(0, "Return to Shadows", "Elias comes home.")
CTX = ChapterContext(PLAN, premise="After the war.")


def node(s, v, o=""):
    return repr({"subject": s, "verb": v, "object": o})


def recorder(gw):
    prompts = []
    inner = gw.backend.complete

    def spy(request, prompt):
        prompts.append((request.template_id, prompt))
        return inner(request, prompt)

    gw.backend.complete = spy
    return prompts


def run1(**overrides):
    config = PipelineConfig(n_chapters=3, **overrides)
    log = RunLog()
    project = run_pipeline(USER_INPUT, config, Gateway(ScriptedBackend.from_replay(RUN1)), log)
    return project, log


# --- stage 1 --------------------------------------------------------------


def test_premise_passthrough_and_blank():
    gw = scripted([("any", "{'premise': 'P', 'synopsis': 'S'}")])
    assert stage1_premise_synopsis("x", gw) == ("P", "S")
    with pytest.raises(EmptyGeneration):
        stage1_premise_synopsis("x", scripted([("any", "  ")]))
    with pytest.raises(EmptyGeneration):
        stage1_premise_synopsis("x", scripted([("any", "{'premise': '', 'synopsis': 'S'}")]))


def test_chapter_plans_count_and_retry():
    three = repr([{"title": f"T{i}", "abstract": "A"} for i in range(3)])
    two = repr([{"title": f"T{i}", "abstract": "A"} for i in range(2)])
    plans = stage1_chapter_plans("p", "s", 3, scripted([("any", three)]))
    assert [p.index for p in plans] == [0, 1, 2]
    gw = scripted([("any", two), ("repair", three)])
    assert len(stage1_chapter_plans("p", "s", 3, gw)) == 3
    with pytest.raises(PlanCountMismatch):
        stage1_chapter_plans("p", "s", 3, scripted([("any", two), ("repair", two)]))


def test_paper_length_plan_list():
    titles = ["Return to Shadows", "Graves and Memories", "A Child's Light", "Voices in the Hall",
              "Teaching Tomorrow", "Rebuilding Together", "Seeds of Hope"]
    resp = repr([{"title": t, "abstract": "..."} for t in titles])
    plans = stage1_chapter_plans("p", "s", 7, scripted([("any", resp)]))
    assert [p.title for p in plans] == titles


# --- stage 2 --------------------------------------------------------------


def test_boundary_nodes_and_sections():
    gw = scripted([("cbn", node("Elias", "return", "home")), ("cen", node("Elias", "sleep"))])
    prompts = recorder(gw)
    cbn, cen = stage2_boundary_nodes(
        ChapterContext(PLAN, None, ChapterPlan(1, "Graves", "Cemetery."), "P"), gw)
    assert cbn.triple == ("Elias", "return", "home")
    assert cen.sv_normalized and cen.object == "Elias"
    assert "[Preceding Chapter]" not in prompts[0][1]
    assert "[Following Chapter]" in prompts[0][1] and "Graves" in prompts[0][1]

    gw = scripted([("cbn", node("a", "b", "c")), ("cen", node("a", "b", "d"))])
    prompts = recorder(gw)
    stage2_boundary_nodes(ChapterContext(ChapterPlan(1, "Graves", "x"), PLAN, None, "P"), gw)
    assert "[Preceding Chapter]" in prompts[0][1] and "Return to Shadows" in prompts[0][1]
    assert "[Following Chapter]" not in prompts[0][1]


def test_alignment_check():
    n = Node("a", "b", "c")
    gw = scripted([])
    assert stage2_alignment_check(n, n, gw) is True and gw.call_count == 0
    assert stage2_alignment_check(n, Node("x", "y", "z"), scripted([("any", "yes")])) is True
    with pytest.raises(ParseFailure):
        stage2_alignment_check(n, Node("x", "y", "z"), scripted([("any", "maybe")] * 2))


def _chapter_setup(entries, **cfg):
    config = PipelineConfig(n_chapters=1, **cfg)
    storyline, graph = Storyline(), NekgGraph()
    cbn, cen = Node("Ethan", "walk", "Ethan", True), Node("Ethan", "reach", "lighthouse")
    commit_node(cbn, NodeKind.CBN, 0, storyline, graph)
    log = RunLog()
    gw = scripted(entries)
    gw.listeners.append(log)
    result = stage2_generate_chapter(CTX, cbn, cen, storyline, graph, config, gw, log)
    return result, storyline, graph, log, gw


def test_two_cpns_accepted():
    result, storyline, graph, log, _ = _chapter_setup([
        ("pseudo_cpn", node("Ethan", "meet", "Lily")), ("review", "{'passed': True}"),
        ("alignment", "no"),
        ("pseudo_cpn", node("Ethan and Lily", "walk", "shore")), ("review", "{'passed': True}"),
        ("alignment", "yes"),
    ])
    assert [k for _, k in result.nodes] == [NodeKind.CBN, NodeKind.CPN, NodeKind.CPN, NodeKind.CEN]
    assert [r.outcome for r in result.reviews] == [ReviewOutcome.Accepted] * 2
    assert result.aligned and not result.budget_exhausted
    assert [e.time_stamp for e in storyline] == [1, 2, 3, 4]
    assert len(graph.edges) == 4


def test_review_modification():
    result, storyline, *_ = _chapter_setup([
        ("pseudo_cpn", node("Ethan and Lily", "walk", "shoreline")),
        ("review", repr({"passed": False, "type": "RedundancyOptimization",
                         "node": {"subject": "Ethan and Lily", "verb": "continue",
                                  "object": "walk"},
                         "explanation": "is redundant because it repeats the walk"})),
        ("alignment", "yes"),
    ])
    rec = result.reviews[0]
    assert rec.outcome is ReviewOutcome.Modified
    assert rec.review_type is ReviewType.RedundancyOptimization
    assert result.nodes[1][0].triple == ("Ethan and Lily", "continue", "walk")
    assert storyline.entries[1].node == rec.final


def test_review_prompt_carries_graph_context():
    storyline, graph = Storyline(), NekgGraph()
    commit_node(Node("Ethan", "meet", "Lily"), NodeKind.CBN, 0, storyline, graph)
    cbn, cen = Node("Ethan", "greet", "Lily"), Node("Ethan", "leave", "Lily")
    commit_node(cbn, NodeKind.CBN, 1, storyline, graph)
    gw = scripted([("pseudo_cpn", node("Ethan", "call", "Lily")), ("review", "{'passed': True}"),
                   ("alignment", "yes")])
    prompts = recorder(gw)
    stage2_generate_chapter(ChapterContext(ChapterPlan(1, "T", "A")), cbn, cen, storyline, graph,
                            PipelineConfig(), gw)
    review = dict(prompts)["review"]
    assert "Recent events between Ethan and Lily" in review
    assert "Ethan meet Lily" in review


def test_loop_budget():
    entries = []
    for i in range(3):
        entries += [("pseudo_cpn", node("Ethan", f"wander{i}", "dunes")),
                    ("review", "{'passed': True}"), ("alignment", "no")]
    result, storyline, _, log, _ = _chapter_setup(entries, max_cpn_per_chapter=3)
    kinds = [k for _, k in result.nodes]
    assert kinds == [NodeKind.CBN] + [NodeKind.CPN] * 3 + [NodeKind.CEN]
    assert result.budget_exhausted
    assert log.count("marker", name=LOOP_BUDGET_EXHAUSTED) == 1
    assert storyline.entries[-1].kind is NodeKind.CEN


def test_cbn_must_be_committed():
    with pytest.raises(ValueError):
        stage2_generate_chapter(CTX, Node("a", "b", "c"), Node("a", "b", "d"), Storyline(),
                                None, PipelineConfig(), scripted([]))


def test_call_bound():
    config = PipelineConfig(max_cpn_per_chapter=4)
    assert max_llm_calls_per_chapter(config, with_repairs=False) == 2 + 4 * 3
    # every structured call fails once: the worst case stays under the bound
    entries = [("cbn", "?"), ("repair", node("a", "b", "c")), ("cen", "?"),
               ("repair", node("a", "z", "c"))]
    for i in range(4):
        entries += [("pseudo_cpn", "?"), ("repair", node("a", f"v{i}", "c")),
                    ("review", "?"), ("repair", "{'passed': True}"),
                    ("alignment", "?"), ("repair", "no")]
    gw = scripted(entries)
    storyline = Storyline()
    cbn, cen = stage2_boundary_nodes(CTX, gw)
    commit_node(cbn, NodeKind.CBN, 0, storyline, None)
    stage2_generate_chapter(CTX, cbn, cen, storyline, NekgGraph(), config, gw)
    assert gw.call_count == max_llm_calls_per_chapter(config)


# --- stage 3 --------------------------------------------------------------


def test_text_block():
    nodes = [(Node("a", "b", "c"), NodeKind.CBN), (Node("a", "d", "e"), NodeKind.CEN)]
    gw = scripted([("text_block", "Once."), ("text_block", "Twice.")])
    prompts = recorder(gw)
    assert stage3_text_block(CTX, nodes, None, gw) == "Once."
    assert "[Text Block From The Preceding Chapter]" not in prompts[0][1]
    stage3_text_block(CTX, nodes, "Once.", gw)
    assert "[Text Block From The Preceding Chapter]:\nOnce." in prompts[1][1]
    assert prompts[0][1].index("'verb': 'b'") < prompts[0][1].index("'verb': 'd'")
    with pytest.raises(EmptyGeneration):
        stage3_text_block(CTX, nodes, None, scripted([("any", " \n")]))
    with pytest.raises(ValueError):
        stage3_text_block(CTX, nodes[:1], None, scripted([("any", "x")]))


# --- full runs ------------------------------------------------------------


def _multiset_storyline(project):
    return Counter((e.node.subject, e.node.verb, e.node.object, e.time_stamp)
                   for e in project.storyline)


def _multiset_graph(project):
    return Counter((e.subject, e.verb, e.object, e.time_stamp) for e in project.graph.edges)


def test_fixture_run():
    project, log = run1()
    assert project.status == "complete" and project.problems() == []
    assert len(project.chapters) == 3 and len(project.text_blocks) == 3
    assert _multiset_storyline(project) == _multiset_graph(project)
    flat = [n for nodes in project.chapter_nodes for n, _ in nodes]
    assert [e.node for e in project.storyline] == flat
    chapters = [e.chapter_index for e in project.storyline]
    assert chapters == sorted(chapters)
    assert log.count("llm_call") == 27
    assert log.count("parse_error") == 1
    stats = review_type_stats(project)
    assert stats[ReviewType.LogicAdjustment] == 0.5
    assert stats[ReviewType.RedundancyOptimization] == 0.5


def test_rerun_byte_identical():
    assert run1()[0].to_json() == run1()[0].to_json()


def test_ablations():
    full, _ = run1()
    no_graph, log = run1(use_nekg=False)
    assert log.count("graph_op") == 0 and no_graph.graph is None
    kinds = lambda p: [[k for _, k in nodes] for nodes in p.chapter_nodes]
    assert kinds(no_graph) == kinds(full)
    no_review, log = run1(use_review=False)
    assert kinds(no_review) == kinds(full)
    assert not any(r.outcome is ReviewOutcome.Modified for r in no_review.review_log)
    assert log.count("llm_call", template_id="review") == 0


def test_abort_keeps_partial_project():
    lines = RUN1.read_text().splitlines()[:6]
    records = [json.loads(line) for line in lines]
    gw = scripted([(r["match"], r["response"]) for r in records])
    with pytest.raises(PipelineAborted) as exc:
        run_pipeline(USER_INPUT, PipelineConfig(n_chapters=3), gw)
    partial = exc.value.project
    assert partial.status == "aborted" and "ScriptUnderrun" in partial.error
    assert len(partial.chapters) == 3 and partial.premise
    assert StoryProject.from_json(partial.to_json()).to_json() == partial.to_json()


def test_review_type_stats_examples():
    assert all(v == 0 for v in review_type_stats([]).values())
    n = Node("a", "b", "c")
    project = StoryProject("x")
    for t in [ReviewType.LogicAdjustment, ReviewType.LogicAdjustment, ReviewType.ThemeEnhancement,
              ReviewType.RedundancyOptimization]:
        project.review_log.append(ReviewRecord(0, n, ReviewOutcome.Modified, n, t))
    project.review_log.append(ReviewRecord(0, n, ReviewOutcome.Accepted))
    stats = review_type_stats(project)
    assert stats[ReviewType.LogicAdjustment] == 0.5
    assert stats[ReviewType.ThemeEnhancement] == 0.25
    assert sum(stats.values()) == 1.0


def test_review_type_stats_tally_oracle():
    rng = random.Random(2)
    n = Node("a", "b", "c")
    projects, tally = [], Counter()
    for _ in range(50):
        p = StoryProject("x")
        for _ in range(rng.randrange(5)):
            t = rng.choice(list(ReviewType))
            tally[t] += 1
            p.review_log.append(ReviewRecord(0, n, ReviewOutcome.Modified, n, t))
        projects.append(p)
    total = sum(tally.values())
    stats = review_type_stats(projects)
    for t in ReviewType:
        assert stats[t] == tally[t] / total


def test_project_roundtrip_and_invariants():
    project, _ = run1()
    back = StoryProject.from_json(project.to_json())
    assert back.to_json() == project.to_json()
    assert back.chapter_nodes == project.chapter_nodes
    bad = StoryProject("x", chapter_nodes=[[(Node("a", "b", "c"), NodeKind.CPN)]])
    assert bad.problems()


def test_config_validation():
    with pytest.raises(ValueError):
        PipelineConfig(max_cpn_per_chapter=0)
    with pytest.raises(ValueError):
        PipelineConfig(n_chapters=0)

"""Three-stage story pipeline.

Stage 1 turns the user input into a premise, a synopsis and chapter plans.
Stage 2 lays out plot nodes per chapter: begin and end nodes first, then
plot nodes one at a time through a propose / retrieve / review / align loop.
Stage 3 writes one text block per chapter from its nodes.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

from plotnode.core import (
    ChapterPlan,
    Node,
    NodeKind,
    ReviewOutcome,
    ReviewRecord,
    ReviewType,
    normalize_node,
    validate_chapter_nodes,
)
from plotnode.errors import (
    EmptyGeneration,
    ParseFailure,
    PipelineAborted,
    PlanCountMismatch,
    PlotnodeError,
)
from plotnode.llm.gateway import Gateway
from plotnode.llm.parsing import ReviewDecision, parse_structured
from plotnode.nekg import DEFAULT_ENTITY_LIMIT, DEFAULT_PAIR_LIMIT, EventEdge, NekgGraph
from plotnode.project import StoryProject
from plotnode.storyline import Storyline, StorylineEntry

logger = logging.getLogger(__name__)

LOOP_BUDGET_EXHAUSTED = "LoopBudgetExhausted"


@dataclass
class PipelineConfig:
    n_chapters: int = 7
    max_cpn_per_chapter: int = 12
    pair_limit: int = DEFAULT_PAIR_LIMIT
    entity_limit: int = DEFAULT_ENTITY_LIMIT
    storyline_window: int = 6
    use_nekg: bool = True
    use_review: bool = True
    split_conjunctions: bool = False
    rng_seed: int = 0
    backend: str = "scripted"
    model: str = ""
    base_url: str = ""

    def __post_init__(self) -> None:
        if self.n_chapters < 1:
            raise ValueError("n_chapters must be >= 1")
        if self.max_cpn_per_chapter < 1:
            raise ValueError("max_cpn_per_chapter must be >= 1")
        if self.pair_limit < 1 or self.entity_limit < 1:
            raise ValueError("retrieval limits must be >= 1")
        if self.storyline_window < 0:
            raise ValueError("storyline_window must be >= 0")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def max_llm_calls_per_chapter(config: PipelineConfig, with_repairs: bool = True) -> int:
    """Upper bound on Stage 2 calls for one chapter.

    Two boundary nodes, then per plot node one proposal, one review and one
    alignment verdict. Every structured call may add one corrective re-prompt.
    """
    base = 2 + config.max_cpn_per_chapter * 3
    return base * 2 if with_repairs else base


class RunLog:
    """Ordered record of LLM calls, graph operations and loop markers."""

    def __init__(self) -> None:
        self.events: list[dict[str, Any]] = []

    def __call__(self, event: dict[str, Any]) -> None:
        self.record(**event)

    def record(self, **event: Any) -> None:
        event = {"seq": len(self.events) + 1, **event}
        self.events.append(event)

    def count(self, event: str, **match: Any) -> int:
        return sum(
            1
            for e in self.events
            if e.get("event") == event and all(e.get(k) == v for k, v in match.items())
        )

    def to_jsonl(self) -> str:
        return "".join(json.dumps(e, sort_keys=True) + "\n" for e in self.events)

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_jsonl(), encoding="utf-8")


@dataclass(frozen=True)
class ChapterContext:
    plan: ChapterPlan
    previous: Optional[ChapterPlan] = None
    next: Optional[ChapterPlan] = None
    premise: str = ""


@dataclass
class ContextBundle:
    pair_events: list[EventEdge] = field(default_factory=list)
    subject_events: list[EventEdge] = field(default_factory=list)
    object_events: list[EventEdge] = field(default_factory=list)

    def is_empty(self) -> bool:
        return not (self.pair_events or self.subject_events or self.object_events)

    def render(self, pseudo: Node) -> str:
        if self.is_empty():
            return "(none)"
        sections = [
            (f"Recent events between {pseudo.subject} and {pseudo.object}", self.pair_events),
            (f"Recent events involving {pseudo.subject}", self.subject_events),
            (f"Recent events involving {pseudo.object}", self.object_events),
        ]
        lines = []
        for title, edges in sections:
            if edges:
                lines.append(f"{title}:")
                lines.extend(f"- {e}" for e in edges)
        return "\n".join(lines)


@dataclass
class ChapterResult:
    nodes: list[tuple[Node, NodeKind]]
    reviews: list[ReviewRecord]
    aligned: bool
    budget_exhausted: bool


# --- graph access (every op is logged) ------------------------------------


def _graph_op(log: Optional[RunLog], graph: NekgGraph, op: str, *args):
    if log is not None:
        log.record(event="graph_op", op=op)
    return getattr(graph, op)(*args)


def build_context(
    pseudo: Node, graph: NekgGraph, config: PipelineConfig, log: Optional[RunLog] = None
) -> ContextBundle:
    bundle = ContextBundle(
        pair_events=_graph_op(log, graph, "events_between", pseudo.subject, pseudo.object,
                              config.pair_limit),
        subject_events=_graph_op(log, graph, "events_involving", pseudo.subject,
                                 config.entity_limit),
    )
    if pseudo.object != pseudo.subject:
        bundle.object_events = _graph_op(log, graph, "events_involving", pseudo.object,
                                         config.entity_limit)
    return bundle


# --- formatting helpers ---------------------------------------------------


def _node_lines(nodes: Sequence[Node]) -> str:
    if not nodes:
        return "(none yet)"
    return "\n".join(f"{i}. {n.as_block()}" for i, n in enumerate(nodes, 1))


def _recent(storyline: Storyline, k: int) -> str:
    entries = storyline.latest(k)
    if not entries:
        return "(empty)"
    return "\n".join(
        f"[t={e.time_stamp}, chapter {e.chapter_index + 1}, {e.kind}] {e.node}" for e in entries
    )


def _chapter_section(plan: ChapterPlan) -> str:
    return f"Chapter {plan.index + 1}: {plan.title}\n{plan.abstract}"


def _triplet_parser(text: str) -> Node:
    return normalize_node(*parse_structured(text, "node_triplet"))


# --- stage 1 --------------------------------------------------------------


def stage1_premise_synopsis(user_input: str, gateway: Gateway) -> tuple[str, str]:
    if not user_input or not user_input.strip():
        raise ValueError("user_input is empty")

    def parse(text: str) -> tuple[str, str]:
        if not text.strip():
            raise EmptyGeneration("premise/synopsis response is blank")
        premise, synopsis = parse_structured(text, "premise_synopsis")
        if not premise.strip() or not synopsis.strip():
            raise EmptyGeneration("premise or synopsis is blank")
        return premise.strip(), synopsis.strip()

    return gateway.ask_parsed("premise_synopsis", {"USER_INPUT": user_input.strip()}, parse)


def stage1_chapter_plans(
    premise: str, synopsis: str, n_chapters: int, gateway: Gateway
) -> list[ChapterPlan]:
    if n_chapters < 1:
        raise ValueError("n_chapters must be >= 1")

    def parse(text: str) -> list[ChapterPlan]:
        pairs = parse_structured(text, "chapter_plan_list")
        if len(pairs) != n_chapters:
            raise PlanCountMismatch(n_chapters, len(pairs))
        return [ChapterPlan(i, t.strip(), a.strip()) for i, (t, a) in enumerate(pairs)]

    return gateway.ask_parsed(
        "chapter_plans",
        {"PREMISE": premise, "SYNOPSIS": synopsis, "N_CHAPTERS": str(n_chapters)},
        parse,
        retry_on=(ParseFailure, PlanCountMismatch),
    )


# --- stage 2 --------------------------------------------------------------


def _boundary_bindings(ctx: ChapterContext) -> dict[str, str]:
    return {
        "PREMISE": ctx.premise or "(none)",
        "PRECEDING_SECTION": (
            f"\n[Preceding Chapter]:\n{_chapter_section(ctx.previous)}\n" if ctx.previous else ""
        ),
        "CURRENT_SECTION": _chapter_section(ctx.plan),
        "FOLLOWING_SECTION": (
            f"\n[Following Chapter]:\n{_chapter_section(ctx.next)}\n" if ctx.next else ""
        ),
    }


def stage2_boundary_nodes(ctx: ChapterContext, gateway: Gateway) -> tuple[Node, Node]:
    bindings = _boundary_bindings(ctx)
    cbn = gateway.ask_parsed("cbn", bindings, _triplet_parser)
    cen = gateway.ask_parsed("cen", {**bindings, "CBN": cbn.as_block()}, _triplet_parser)
    return cbn, cen


def stage2_alignment_check(cpn: Node, cen: Node, gateway: Gateway) -> bool:
    if cpn == cen:
        return True
    return gateway.ask_parsed(
        "alignment",
        {"CPN": cpn.as_block(), "CEN": cen.as_block()},
        lambda text: parse_structured(text, "alignment_verdict"),
    )


def _review_types_text() -> str:
    return "\n".join(f"- {t.label}: {t.description}" for t in ReviewType)


def review_pseudo_cpn(
    pseudo: Node,
    bundle: ContextBundle,
    ctx: ChapterContext,
    cbn: Node,
    cen: Node,
    cpns: Sequence[Node],
    recent: str,
    gateway: Gateway,
) -> ReviewRecord:
    decision: ReviewDecision = gateway.ask_parsed(
        "review",
        {
            "TITLE": ctx.plan.title,
            "ABSTRACT": ctx.plan.abstract,
            "CBN": cbn.as_block(),
            "CPNS": _node_lines(cpns),
            "CEN": cen.as_block(),
            "RECENT": recent,
            "CONTEXT": bundle.render(pseudo),
            "PSEUDO": pseudo.as_block(),
            "REVIEW_TYPES": _review_types_text(),
        },
        lambda text: parse_structured(text, "review_outcome"),
    )
    if decision.passed:
        return ReviewRecord(ctx.plan.index, pseudo, ReviewOutcome.Accepted,
                            explanation=decision.explanation)
    final = normalize_node(*decision.node)
    return ReviewRecord(
        ctx.plan.index, pseudo, ReviewOutcome.Modified,
        final=final, review_type=decision.review_type, explanation=decision.explanation,
    )


def commit_node(
    node: Node,
    kind: NodeKind,
    chapter_index: int,
    storyline: Storyline,
    graph: Optional[NekgGraph],
    log: Optional[RunLog] = None,
) -> StorylineEntry:
    entry = storyline.append(node, kind, chapter_index)
    if graph is not None:
        _graph_op(log, graph, "record_event", entry)
    return entry


def stage2_generate_chapter(
    ctx: ChapterContext,
    cbn: Node,
    cen: Node,
    storyline: Storyline,
    graph: Optional[NekgGraph],
    config: PipelineConfig,
    gateway: Gateway,
    log: Optional[RunLog] = None,
) -> ChapterResult:
    """Run the plot-node loop for one chapter whose CBN is already committed.

    Ends when a plot node aligns with the CEN or after
    ``max_cpn_per_chapter`` plot nodes; either way the CEN is committed last.
    """
    chapter = ctx.plan.index
    own = storyline.entries_for_chapter(chapter)
    if not own or own[-1].kind is not NodeKind.CBN or own[-1].node != cbn:
        raise ValueError(f"chapter {chapter}: the CBN must be committed before plot nodes")
    use_graph = config.use_nekg and graph is not None

    nodes: list[tuple[Node, NodeKind]] = [(cbn, NodeKind.CBN)]
    reviews: list[ReviewRecord] = []
    cpns: list[Node] = []
    aligned = False
    while len(cpns) < config.max_cpn_per_chapter:
        recent = _recent(storyline, config.storyline_window)
        pseudo = gateway.ask_parsed(
            "pseudo_cpn",
            {
                "TITLE": ctx.plan.title,
                "ABSTRACT": ctx.plan.abstract,
                "CBN": cbn.as_block(),
                "CPNS": _node_lines(cpns),
                "CEN": cen.as_block(),
                "RECENT": recent,
            },
            _triplet_parser,
        )
        bundle = build_context(pseudo, graph, config, log) if use_graph else ContextBundle()
        if config.use_review:
            record = review_pseudo_cpn(pseudo, bundle, ctx, cbn, cen, cpns, recent, gateway)
            reviews.append(record)
            cpn = record.accepted_node
        else:
            cpn = pseudo
        commit_node(cpn, NodeKind.CPN, chapter, storyline, graph if use_graph else None, log)
        cpns.append(cpn)
        nodes.append((cpn, NodeKind.CPN))
        if stage2_alignment_check(cpn, cen, gateway):
            aligned = True
            break

    exhausted = not aligned
    if exhausted:
        logger.info("chapter %d: plot-node budget of %d used up", chapter,
                    config.max_cpn_per_chapter)
        if log is not None:
            log.record(event="marker", name=LOOP_BUDGET_EXHAUSTED, chapter_index=chapter)
    commit_node(cen, NodeKind.CEN, chapter, storyline, graph if use_graph else None, log)
    nodes.append((cen, NodeKind.CEN))
    return ChapterResult(nodes, reviews, aligned, exhausted)


# --- stage 3 --------------------------------------------------------------


def stage3_text_block(
    ctx: ChapterContext,
    nodes: Sequence[tuple[Node, NodeKind]],
    previous_block: Optional[str],
    gateway: Gateway,
) -> str:
    check = validate_chapter_nodes(nodes)
    if not check.ok or not nodes:
        raise ValueError(f"chapter {ctx.plan.index} nodes are not valid: {check.reason}")
    node_text = "\n".join(f"{i}. [{k}] {n.as_block()}" for i, (n, k) in enumerate(nodes, 1))
    previous = ""
    if previous_block and previous_block.strip():
        previous = f"\n[Text Block From The Preceding Chapter]:\n{previous_block.strip()}\n"
    completion = gateway.ask(
        "text_block",
        PREMISE=ctx.premise or "(none)",
        TITLE=ctx.plan.title,
        ABSTRACT=ctx.plan.abstract,
        NODES=node_text,
        PREVIOUS_SECTION=previous,
    )
    if not completion.text.strip():
        raise EmptyGeneration(f"chapter {ctx.plan.index}: blank text block")
    return completion.text


# --- whole run ------------------------------------------------------------


def _contexts(plans: Sequence[ChapterPlan], premise: str) -> list[ChapterContext]:
    return [
        ChapterContext(
            plan,
            plans[i - 1] if i > 0 else None,
            plans[i + 1] if i + 1 < len(plans) else None,
            premise,
        )
        for i, plan in enumerate(plans)
    ]


def run_pipeline(
    user_input: str,
    config: PipelineConfig,
    gateway: Gateway,
    log: Optional[RunLog] = None,
) -> StoryProject:
    """Run all three stages.

    A fatal error raises :class:`PipelineAborted` carrying the partial
    project. With ``use_nekg`` off no graph is created at all.
    """
    log = log if log is not None else RunLog()
    if log not in gateway.listeners:
        gateway.listeners.append(log)
    project = StoryProject(user_input=user_input, config_snapshot=config.to_dict())
    project.graph = NekgGraph(config.split_conjunctions) if config.use_nekg else None
    try:
        project.premise, project.synopsis = stage1_premise_synopsis(user_input, gateway)
        project.chapters = stage1_chapter_plans(
            project.premise, project.synopsis, config.n_chapters, gateway
        )
        contexts = _contexts(project.chapters, project.premise)
        for ctx in contexts:
            cbn, cen = stage2_boundary_nodes(ctx, gateway)
            commit_node(cbn, NodeKind.CBN, ctx.plan.index, project.storyline, project.graph, log)
            result = stage2_generate_chapter(
                ctx, cbn, cen, project.storyline, project.graph, config, gateway, log
            )
            project.chapter_nodes.append(result.nodes)
            project.review_log.extend(result.reviews)
            if result.budget_exhausted:
                project.budget_exhausted.append(ctx.plan.index)
        previous: Optional[str] = None
        blocks = []
        for ctx, nodes in zip(contexts, project.chapter_nodes):
            previous = stage3_text_block(ctx, nodes, previous, gateway)
            blocks.append(previous)
        project.text_blocks = blocks
    except PlotnodeError as exc:
        project.status = "aborted"
        project.error = f"{type(exc).__name__}: {exc}"
        raise PipelineAborted(exc, project) from exc
    finally:
        gateway.listeners.remove(log)
    return project


# --- review statistics ----------------------------------------------------


def review_type_stats(projects: StoryProject | Iterable[StoryProject]) -> dict[ReviewType, float]:
    """Share of each review type among Modified records; all zeros if there are none."""
    if isinstance(projects, StoryProject):
        projects = [projects]
    counts: Counter[ReviewType] = Counter()
    for project in projects:
        for rec in project.review_log:
            if rec.outcome is ReviewOutcome.Modified:
                counts[rec.review_type] += 1
    total = sum(counts.values())
    return {t: (counts[t] / total if total else 0.0) for t in ReviewType}

"""Pairwise LLM-judge comparisons with position swapping."""

from __future__ import annotations

import enum
import json
import re
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable

from plotnode.errors import EmptyOutcomes, NoVerdictFound
from plotnode.llm.gateway import Gateway


class Verdict(str, enum.Enum):
    A_much_better = "A>>B"
    A_better = "A>B"
    Tie = "A=B"
    B_better = "B>A"
    B_much_better = "B>>A"

    @property
    def label(self) -> str:
        return f"[[{self.value}]]"

    def mirrored(self) -> Verdict:
        return _MIRROR[self]


_MIRROR = {
    Verdict.A_much_better: Verdict.B_much_better,
    Verdict.A_better: Verdict.B_better,
    Verdict.Tie: Verdict.Tie,
    Verdict.B_better: Verdict.A_better,
    Verdict.B_much_better: Verdict.A_much_better,
}

_LABEL = re.compile(r"\[\[(A>>B|A>B|A=B|B>A|B>>A)\]\]")


def parse_verdict(judge_text: str) -> Verdict:
    """Last bracketed verdict label in the judge's reply."""
    found = _LABEL.findall(judge_text or "")
    if not found:
        raise NoVerdictFound(f"no verdict label in judge output: {(judge_text or '')[:200]!r}")
    return Verdict(found[-1])


class Round(str, enum.Enum):
    original = "original"
    swapped = "swapped"

    def other(self) -> Round:
        return Round.swapped if self is Round.original else Round.original


@dataclass(frozen=True)
class PairOutcome:
    """One judge verdict. In the swapped round system B sat in position A."""

    prompt_id: str
    round: Round
    verdict: Verdict
    dimension: str = "overall"

    def to_dict(self) -> dict:
        return {"prompt_id": self.prompt_id, "round": self.round.value,
                "verdict": self.verdict.value, "dimension": self.dimension}

    @classmethod
    def from_dict(cls, data: dict) -> PairOutcome:
        return cls(data["prompt_id"], Round(data["round"]), Verdict(data["verdict"]),
                   data.get("dimension", "overall"))


# --- judge prompt content ---------------------------------------------------

DIMENSIONS = ("creativity", "coherence", "engagement", "relevance", "overall")

METRICS = {
    "creativity": "Creativity. Originality of the plot and characters.",
    "coherence": "Coherence. Clarity of the narrative structure and flow.",
    "engagement": "Engagement. The extent to which the story captivates readers and sustains "
                  "their emotional involvement and curiosity.",
    "relevance": "Relevance. Alignment with the theme, prompt, or background.",
    "overall": "Overall. A holistic evaluation considering alignment with the prompt, character "
               "and plot development, reader engagement, originality, and areas for improvement.",
}

CHECKLISTS: dict[str, list[str]] = {
    "creativity": [
        "Uniqueness of the plot setting: Does the story's background, time, location, or plot present a distinctive setting that breaks away from conventional patterns?",
        "Innovation in character design: Do the characters have distinct traits, unconventional identities, or surprising personalities? Is there unexpected character development or interaction?",
        "Creativity in narrative technique: Does the story employ novel narrative structures or techniques, such as nonlinear storytelling, multiple perspectives, or unconventional modes of expression?",
        "Fresh interpretation of common themes: Even if the story uses common themes (such as love, adventure, or conflict), does it offer a fresh perspective, different emotional layers, or unique interpretations?",
        "Incorporation of creative elements: Does the story include unexpected elements like fantasy, science fiction, or other imaginative concepts? Do these elements effectively enhance the story's appeal and uniqueness?",
    ],
    "coherence": [
        "Logical consistency of the plot: Do the events and plot developments in the story have clear cause-and-effect relationships? Are there any sudden or unreasonable twists?",
        "Coherence of the story structure: Does the story have a clear overall framework from beginning to end, with a natural progression of events? Does it avoid disjointed or erratic narration?",
        "Reasonableness of character behavior: Do the characters' actions and decisions align with their personality and background? Are the characters' responses in different situations consistent?",
        "Smoothness of the timeline: Is the progression of time in the story clear and coherent? Does the timeline remain consistent, avoiding confusing time jumps or unreasonable time gaps?",
        "Consistency of narrative tone: Is the language style and narrative tone of the story consistent throughout? Does it avoid unnecessary shifts in tone or abrupt changes in expression?",
    ],
    "engagement": [
        "Gripping opening: Does the story capture attention from the very beginning? Is the introduction intriguing enough to make the reader want to continue?",
        "Sustained interest: Does the story maintain the reader's interest throughout? Are there moments of tension, excitement, or emotional depth that keep the reader engaged?",
        "Emotional connection: Does the story evoke any emotional response? Do the characters and their struggles create empathy or connection with the reader?",
        "Immersiveness of the narrative: Does the story create a vivid and immersive experience? Are the descriptions, dialogues, and world-building elements compelling and engaging?",
        "Pacing of the story: Is the pacing of the story appropriate? Does it avoid being too slow or too rushed, allowing the reader to stay immersed without losing interest?",
    ],
    "relevance": [
        "Alignment with the theme: Does the story closely follow the given theme or prompt? Is the content aligned with the prompt's requirements, avoiding any unrelated or off-topic elements?",
        "Relevance of the plot to the task objective: Does the plot development revolve around the task or objective? Does it effectively convey the core message that the story is meant to deliver?",
        "Consistency of characters and setting with the task: Are the characters and setting in the story consistent with the task requirements or thematic setup? Does it avoid inappropriate or irrelevant elements?",
        "Match between story style and context: Is the style and tone of the story suitable for the given task or scenario? Does it maintain consistency without sudden shifts in style?",
        "Relevance of details and scenes: Are the details and scenes in the story relevant to the overall plot? Do they support and enhance the expression of the theme, avoiding unrelated or redundant descriptions?",
    ],
    "overall": [
        "Alignment with the prompt: Does the story answer the writing prompt and stay on its theme throughout?",
        "Character and plot development: Do the characters grow in believable ways, and does the plot build to a satisfying shape?",
        "Reader engagement: Does the story hold attention from its opening to its ending?",
        "Originality: Does the story bring fresh ideas, settings, or treatments rather than conventional ones?",
        "Areas for improvement: Which weaknesses remain, and how much do they detract from the story as a whole?",
    ],
}


def judge_pair(
    story_a: str,
    story_b: str,
    dimension: str,
    gateway: Gateway,
    prompt: str = "",
) -> Verdict:
    """Ask the judge which story is better on ``dimension``; one re-prompt on a missing label."""
    if dimension not in CHECKLISTS:
        raise ValueError(f"unknown dimension {dimension!r}; choose from {DIMENSIONS}")
    return gateway.ask_parsed(
        "judge",
        {
            "METRIC": METRICS[dimension],
            "CHECKLISTS": json.dumps(CHECKLISTS[dimension], ensure_ascii=False),
            "PROMPT": prompt,
            "STORY_A": story_a,
            "STORY_B": story_b,
        },
        parse_verdict,
        retry_on=(NoVerdictFound,),
    )


# --- aggregation -----------------------------------------------------------


@dataclass
class SwapSummary:
    """Tallies from system A's point of view across both rounds."""

    wins_a: int = 0
    wins_b: int = 0
    ties: int = 0
    counts: dict[Verdict, int] = field(default_factory=lambda: {v: 0 for v in Verdict})
    incomplete: list[tuple[str, str]] = field(default_factory=list)

    @property
    def total(self) -> int:
        return self.wins_a + self.wins_b + self.ties

    @property
    def win_rate_a(self) -> float:
        return self.wins_a / self.total if self.total else 0.0

    def to_dict(self) -> dict:
        return {
            "wins_a": self.wins_a,
            "wins_b": self.wins_b,
            "ties": self.ties,
            "win_rate_a": self.win_rate_a,
            "counts": {v.value: c for v, c in self.counts.items()},
            "incomplete": [list(p) for p in self.incomplete],
        }


def a_perspective(outcome: PairOutcome) -> Verdict:
    return outcome.verdict if outcome.round is Round.original else outcome.verdict.mirrored()


def swap_aggregate(outcomes: Iterable[PairOutcome]) -> SwapSummary:
    """Mirror swapped-round verdicts and tally; pairs missing a round are listed, not counted.

    "Much better" and "better" are both one win here.
    """
    groups: dict[tuple[str, str], dict[Round, list[PairOutcome]]] = defaultdict(
        lambda: {Round.original: [], Round.swapped: []}
    )
    for o in outcomes:
        groups[(o.prompt_id, o.dimension)][o.round].append(o)
    summary = SwapSummary()
    for key in sorted(groups):
        rounds = groups[key]
        if not rounds[Round.original] or not rounds[Round.swapped]:
            summary.incomplete.append(key)
            continue
        for o in rounds[Round.original] + rounds[Round.swapped]:
            v = a_perspective(o)
            summary.counts[v] += 1
            if v in (Verdict.A_much_better, Verdict.A_better):
                summary.wins_a += 1
            elif v in (Verdict.B_much_better, Verdict.B_better):
                summary.wins_b += 1
            else:
                summary.ties += 1
    return summary


WEIGHTINGS = ("uniform", "amplified")


def arena_score(outcomes: Iterable[PairOutcome] | SwapSummary, weighting: str = "amplified") -> float:
    """0-100 score of system A against the baseline in position B.

    Win 1, tie 0.5, loss 0, averaged and scaled. ``amplified`` counts a
    "much better" verdict as two wins (or two losses). A system tied with
    the baseline everywhere scores 50.
    """
    if weighting not in WEIGHTINGS:
        raise ValueError(f"unknown weighting {weighting!r}")
    summary = outcomes if isinstance(outcomes, SwapSummary) else swap_aggregate(outcomes)
    c = summary.counts
    heavy = 2 if weighting == "amplified" else 1
    wins = heavy * c[Verdict.A_much_better] + c[Verdict.A_better]
    losses = heavy * c[Verdict.B_much_better] + c[Verdict.B_better]
    ties = c[Verdict.Tie]
    total = wins + losses + ties
    if total == 0:
        raise EmptyOutcomes("no complete outcome pairs to score")
    return 100.0 * (wins + 0.5 * ties) / total


def per_prompt_scores(outcomes: Iterable[PairOutcome], weighting: str = "amplified") -> dict[str, float]:
    """Arena score of system A for each prompt id (both rounds, complete pairs only)."""
    by_prompt: dict[str, list[PairOutcome]] = defaultdict(list)
    for o in outcomes:
        by_prompt[o.prompt_id].append(o)
    scores = {}
    for pid in sorted(by_prompt):
        try:
            scores[pid] = arena_score(by_prompt[pid], weighting)
        except EmptyOutcomes:
            continue
    return scores


def run_swapped_pair(
    prompt_id: str,
    story_a: str,
    story_b: str,
    dimension: str,
    gateway: Gateway,
    prompt: str = "",
) -> list[PairOutcome]:
    """Judge the pair twice, the second time with positions exchanged."""
    first = judge_pair(story_a, story_b, dimension, gateway, prompt)
    second = judge_pair(story_b, story_a, dimension, gateway, prompt)
    return [
        PairOutcome(prompt_id, Round.original, first, dimension),
        PairOutcome(prompt_id, Round.swapped, second, dimension),
    ]

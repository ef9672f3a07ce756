"""Diversity metrics, judge arena and rank statistics."""

from plotnode.evaluation.arena import (
    CHECKLISTS,
    DIMENSIONS,
    PairOutcome,
    Round,
    SwapSummary,
    Verdict,
    arena_score,
    judge_pair,
    parse_verdict,
    per_prompt_scores,
    run_swapped_pair,
    swap_aggregate,
)
from plotnode.evaluation.dataset import PROMPT_TAGS, PromptDataset, PromptRecord, load_prompt_dataset
from plotnode.evaluation.diversity import (
    DEFAULT_NS,
    CorpusStats,
    TokenizedText,
    corpus_stats,
    distinctl_n,
    diverse_verbs,
    load_verb_lexicon,
    tokenize,
)
from plotnode.evaluation.report import EvalReport
from plotnode.evaluation.stats import (
    BootstrapStats,
    KappaInput,
    bootstrap_scores,
    brier_loss,
    cohen_kappa,
    normal_cdf,
    pairwise_probability,
)

__all__ = [
    "BootstrapStats",
    "CHECKLISTS",
    "CorpusStats",
    "DEFAULT_NS",
    "DIMENSIONS",
    "EvalReport",
    "KappaInput",
    "PROMPT_TAGS",
    "PairOutcome",
    "PromptDataset",
    "PromptRecord",
    "Round",
    "SwapSummary",
    "TokenizedText",
    "Verdict",
    "arena_score",
    "bootstrap_scores",
    "brier_loss",
    "cohen_kappa",
    "corpus_stats",
    "distinctl_n",
    "diverse_verbs",
    "judge_pair",
    "load_prompt_dataset",
    "load_verb_lexicon",
    "normal_cdf",
    "pairwise_probability",
    "parse_verdict",
    "per_prompt_scores",
    "run_swapped_pair",
    "swap_aggregate",
    "tokenize",
]

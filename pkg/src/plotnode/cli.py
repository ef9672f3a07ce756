"""Command-line entry point.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import json
import logging
import random
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

from plotnode.core import ReviewOutcome
from plotnode.errors import PipelineAborted, PlotnodeError
from plotnode.evaluation.arena import (
    DIMENSIONS,
    PairOutcome,
    arena_score,
    per_prompt_scores,
    run_swapped_pair,
    swap_aggregate,
)
from plotnode.evaluation.dataset import load_prompt_dataset
from plotnode.evaluation.diversity import (
    DEFAULT_NS,
    corpus_stats,
    distinctl_n,
    diverse_verbs,
    load_verb_lexicon,
    tokenize,
)
from plotnode.evaluation.report import EvalReport, format_table
from plotnode.evaluation.stats import (
    DEFAULT_BOOTSTRAP_B,
    bootstrap_scores,
    brier_loss,
    cohen_kappa,
    pairwise_probability,
)
from plotnode.llm.gateway import Gateway, OpenAIChatBackend, ScriptedBackend
from plotnode.nekg import EXPORT_FORMATS
from plotnode.pipeline import PipelineConfig, RunLog, review_type_stats, run_pipeline
from plotnode.project import StoryProject

logger = logging.getLogger("plotnode")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
ENGINES = ("scripted", "openai")


class UsageError(Exception):
    """Flag combination rejected before any work starts (exit 2)."""


# --- configuration --------------------------------------------------------


def read_config_file(path: str | Path) -> dict[str, str]:
    """Plain ``key = value`` lines, ``#`` comments, no sections."""
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#",),
                                       inline_comment_prefixes=("#",))
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    try:
        parser.read_string("[plotnode]\n" + text, source=str(path))
    except configparser.Error as exc:
        raise UsageError(f"bad config file {path}: {exc}") from exc
    return dict(parser["plotnode"])


def _coerce(name: str, raw: str, kind: type) -> Any:
    if kind is bool:
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise UsageError(f"config key {name}: expected a boolean, got {raw!r}")
    try:
        return kind(raw.strip())
    except ValueError as exc:
        raise UsageError(f"config key {name}: {exc}") from exc


_FIELD_TYPES = {"int": int, "bool": bool, "str": str}


def resolve_config(flags: dict[str, Any], config_path: Optional[str]) -> PipelineConfig:
    """Flags beat the config file, which beats the built-in defaults."""
    values: dict[str, Any] = {}
    types = {f.name: _FIELD_TYPES[f.type] for f in dataclasses.fields(PipelineConfig)}
    if config_path:
        for key, raw in read_config_file(config_path).items():
            if key not in types:
                raise UsageError(f"unknown config key {key!r}")
            values[key] = _coerce(key, raw, types[key])
    values.update({k: v for k, v in flags.items() if v is not None})
    try:
        return PipelineConfig(**values)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _make_backend(engine: str, script: Optional[str], script_cycle: bool,
                  model: str, base_url: str, seed: int):
    if engine == "scripted":
        if not script:
            raise UsageError("the scripted engine needs --script")
        if not Path(script).is_file():
            raise UsageError(f"script file not found: {script}")
        return ScriptedBackend.from_replay(script, cycle=script_cycle)
    if not (model and base_url):
        raise UsageError("the openai engine needs --model and --base-url")
    return OpenAIChatBackend(base_url, model, rng=random.Random(seed))


# --- generate -------------------------------------------------------------


def cmd_generate(args: argparse.Namespace) -> int:
    if args.prompt is not None:
        user_input = args.prompt
    else:
        try:
            user_input = Path(args.prompt_file).read_text(encoding="utf-8").strip()
        except OSError as exc:
            raise UsageError(f"cannot read prompt file: {exc}") from exc
    if not user_input.strip():
        raise UsageError("the prompt is empty")
    config = resolve_config(
        {
            "n_chapters": args.chapters,
            "max_cpn_per_chapter": args.max_cpn,
            "use_nekg": False if args.no_nekg else None,
            "use_review": False if args.no_review else None,
            "split_conjunctions": True if args.split_conjunctions else None,
            "rng_seed": args.seed,
            "backend": args.engine,
            "model": args.model,
            "base_url": args.base_url,
        },
        args.config,
    )
    backend = _make_backend(config.backend, args.script, args.script_cycle,
                            config.model, config.base_url, config.rng_seed)
    out = Path(args.out)
    run_log_path = Path(args.run_log) if args.run_log else out.with_suffix(".runlog.jsonl")
    gateway = Gateway(backend, transcript=args.transcript)
    log = RunLog()
    log.record(event="config", config=config.to_dict())
    status = EXIT_OK
    try:
        project = run_pipeline(user_input, config, gateway, log)
    except PipelineAborted as exc:
        project = exc.project
        print(f"error: {exc}", file=sys.stderr)
        status = EXIT_FAIL
    project.save(out)
    log.write(run_log_path)
    if status == EXIT_OK:
        kinds = sum(len(n) for n in project.chapter_nodes)
        print(f"wrote {out} ({len(project.chapters)} chapters, {kinds} nodes)")
    else:
        print(f"partial project written to {out}", file=sys.stderr)
    return status


# --- inspect / export-graph -----------------------------------------------


def _load_project(path: str) -> StoryProject:
    try:
        return StoryProject.load(path)
    except (OSError, ValueError, KeyError) as exc:
        raise PlotnodeError(f"cannot load project {path}: {exc}") from exc


def render_project(project: StoryProject) -> str:
    lines = [f"status: {project.status}"]
    if project.error:
        lines.append(f"error: {project.error}")
    lines += [f"input: {project.user_input}", f"premise: {project.premise}", ""]
    for plan in project.chapters:
        lines.append(f"Chapter {plan.index + 1}: {plan.title}")
        nodes = project.chapter_nodes[plan.index] if plan.index < len(project.chapter_nodes) else []
        for node, kind in nodes:
            lines.append(f"  [{kind}] {node}")
    modified = [r for r in project.review_log if r.outcome is ReviewOutcome.Modified]
    lines.append("")
    lines.append(f"reviews: {len(project.review_log)} ({len(modified)} modified)")
    for rtype, share in review_type_stats(project).items():
        if share:
            lines.append(f"  {rtype.label}: {share:.3f}")
    if project.budget_exhausted:
        chapters = ", ".join(str(i + 1) for i in project.budget_exhausted)
        lines.append(f"plot-node budget exhausted in chapter(s): {chapters}")
    if project.graph is not None:
        lines.append(f"graph: {len(project.graph.vertices)} entities, "
                     f"{len(project.graph.edges)} events")
    problems = project.problems()
    lines.append("consistent" if not problems else "problems: " + "; ".join(problems))
    return "\n".join(lines) + "\n"


def cmd_inspect(args: argparse.Namespace) -> int:
    project = _load_project(args.project)
    if args.json:
        text = json.dumps(
            {
                "status": project.status,
                "chapters": len(project.chapters),
                "kinds": [[k.value for _, k in nodes] for nodes in project.chapter_nodes],
                "reviews": len(project.review_log),
                "review_types": {t.value: s for t, s in review_type_stats(project).items()},
                "problems": project.problems(),
            },
            indent=2,
            sort_keys=True,
        ) + "\n"
    else:
        text = render_project(project)
    if args.story:
        text += "\n" + project.story_text()
    _emit(text, args.out)
    return EXIT_OK


def cmd_export_graph(args: argparse.Namespace) -> int:
    project = _load_project(args.project)
    if project.graph is None:
        raise PlotnodeError(f"{args.project} has no graph (generated without the NEKG)")
    Path(args.out).write_bytes(project.graph.export(args.format))
    print(f"wrote {args.out} ({args.format})")
    return EXIT_OK


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# --- metrics / stats ------------------------------------------------------


def _read_corpus(directory: str) -> dict[str, str]:
    root = Path(directory)
    if not root.is_dir():
        raise PlotnodeError(f"corpus directory not found: {directory}")
    texts = {}
    for path in sorted(p for p in root.iterdir() if p.is_file() and not p.name.startswith(".")):
        try:
            texts[path.stem] = path.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            raise PlotnodeError(f"cannot read {path}: {exc}") from exc
    return texts


def cmd_metrics(args: argparse.Namespace) -> int:
    texts = _read_corpus(args.corpus)
    lexicon = load_verb_lexicon(args.lexicon)
    ns = sorted(set(args.n))
    per_text: dict[str, dict[str, Any]] = {}
    for name, text in texts.items():
        tokens = tokenize(text)
        row: dict[str, Any] = {"word_count": tokens.word_count}
        for n in ns:
            row[f"distinctl_{n}"] = (
                distinctl_n(tokens, n, args.log_base) if tokens.word_count >= n else None
            )
        row["diverse_verbs"] = diverse_verbs(tokens, lexicon)
        per_text[name] = row
    stats = corpus_stats(texts.values())
    corpus: dict[str, Any] = {"texts": len(texts), "avg_word_count": stats.avg_word_count}
    for key in [f"distinctl_{n}" for n in ns] + ["diverse_verbs"]:
        vals = [r[key] for r in per_text.values() if r[key] is not None]
        corpus[key] = sum(vals) / len(vals) if vals else None
    report = EvalReport(
        "metrics",
        config={"n": ns, "lexicon": args.lexicon or "builtin",
                "log_base": args.log_base or "e", "corpus": str(args.corpus)},
        per_text=per_text,
        corpus=corpus,
    )
    if args.out:
        report.write(args.out)
    columns = ["text", "word_count"] + [f"distinctl_{n}" for n in ns] + ["diverse_verbs"]
    rows = [{"text": k, **v} for k, v in per_text.items()] + [{"text": "(mean)", **corpus,
                                                             "word_count": stats.avg_word_count}]
    print(format_table(rows, columns))
    return EXIT_OK


def _average_prompt_words(path: str) -> tuple[int, float]:
    dataset = load_prompt_dataset(path)
    if not dataset.prompts:
        return 0, 0.0
    stats = corpus_stats(p.prompt_text for p in dataset.prompts)
    return len(dataset.prompts), stats.avg_word_count


def cmd_stats(args: argparse.Namespace) -> int:
    corpus: dict[str, Any] = {}
    if args.corpus:
        texts = _read_corpus(args.corpus)
        stats = corpus_stats(texts.values())
        corpus.update(texts=len(texts), avg_word_count=stats.avg_word_count,
                      counts=dict(zip(texts, stats.counts)))
        print(f"average length of stories: {stats.avg_word_count}")
    if args.prompts:
        n, avg = _average_prompt_words(args.prompts)
        corpus.update(prompts=n, avg_prompt_word_count=avg)
        print(f"average length of prompts: {avg}")
    if args.out:
        EvalReport("stats", config={"corpus": args.corpus, "prompts": args.prompts},
                   corpus=corpus).write(args.out)
    return EXIT_OK


# --- kappa ----------------------------------------------------------------


def _read_labels(path: str) -> list[str]:
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise PlotnodeError(f"cannot read labels {path}: {exc}") from exc
    return [ln.strip() for ln in lines if ln.strip()]


def cmd_kappa(args: argparse.Namespace) -> int:
    a, b = _read_labels(args.a), _read_labels(args.b)
    kappa = cohen_kappa((a, b))
    print(f"{kappa}")
    if args.out:
        EvalReport("kappa", config={"a": args.a, "b": args.b, "items": len(a)},
                   kappa=kappa).write(args.out)
    return EXIT_OK


# --- arena ----------------------------------------------------------------


def _pair_files(dir_a: str, dir_b: str) -> tuple[dict[str, str], dict[str, str]]:
    a, b = _read_corpus(dir_a), _read_corpus(dir_b)
    missing = sorted(set(a) ^ set(b))
    if missing:
        raise PlotnodeError("unmatched prompt files: " + ", ".join(missing))
    return a, b


def _read_prompts(path: Optional[str]) -> dict[str, str]:
    if not path:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise PlotnodeError(f"cannot read prompts {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise PlotnodeError(f"{path}: expected a JSON object mapping prompt id to prompt text")
    return {str(k): str(v) for k, v in data.items()}


def cmd_arena(args: argparse.Namespace) -> int:
    dims = args.dimensions or list(DIMENSIONS)
    for d in dims:
        if d not in DIMENSIONS:
            raise UsageError(f"unknown dimension {d!r}; choose from {', '.join(DIMENSIONS)}")
    backend = _make_backend(args.engine, args.script, args.script_cycle,
                            args.model or "", args.base_url or "", args.seed)
    stories_a, stories_b = _pair_files(args.system_a, args.system_b)
    prompts = _read_prompts(args.prompts)
    truth = _read_prompts(args.truth) if args.truth else {}
    gateway = Gateway(backend, transcript=args.transcript)

    outcomes: list[PairOutcome] = []
    for dim in dims:
        for pid in stories_a:
            outcomes += run_swapped_pair(pid, stories_a[pid], stories_b[pid], dim, gateway,
                                         prompts.get(pid, ""))

    arena: dict[str, Any] = {}
    boot: dict[str, Any] = {}
    probs, observed = [], []
    rows = []
    for k, dim in enumerate(dims):
        subset = [o for o in outcomes if o.dimension == dim]
        summary = swap_aggregate(subset)
        score = arena_score(summary, args.weighting)
        arena[dim] = {"score": score, **summary.to_dict()}
        scores_a = list(per_prompt_scores(subset, args.weighting).values())
        stats_a = bootstrap_scores(scores_a, args.bootstrap, seed=args.seed + k)
        stats_b = bootstrap_scores([100.0 - s for s in scores_a], args.bootstrap,
                                   seed=args.seed + k)
        if stats_a.variance + stats_b.variance > 0:
            mode = "normal"
        else:
            mode = "empirical"
        p_a_below_b = pairwise_probability(stats_a, stats_b, mode)
        boot[dim] = {"a": stats_a.to_dict(), "b": stats_b.to_dict(),
                     "p_a_below_b": p_a_below_b, "mode": mode}
        if dim in truth:
            probs.append(p_a_below_b)
            observed.append(int(truth[dim]))
        rows.append({"dimension": dim, "score": score, "wins_a": summary.wins_a,
                     "wins_b": summary.wins_b, "ties": summary.ties,
                     "win_rate_a": summary.win_rate_a})

    report = EvalReport(
        "arena",
        config={"weighting": args.weighting, "dimensions": dims, "bootstrap_B": args.bootstrap,
                "seed": args.seed, "engine": args.engine, "system_a": args.system_a,
                "system_b": args.system_b, "prompts": len(stories_a)},
        arena=arena,
        bootstrap=boot,
        brier=brier_loss(probs, observed) if probs else None,
    )
    report.per_text = {"outcomes": {str(i): o.to_dict() for i, o in enumerate(outcomes)}}
    if args.out:
        report.write(args.out)
    print(format_table(rows, ["dimension", "score", "wins_a", "wins_b", "ties", "win_rate_a"]))
    if report.brier is not None:
        print(f"brier: {report.brier}")
    return EXIT_OK


# --- parser ---------------------------------------------------------------


def _add_engine_flags(p: argparse.ArgumentParser, default_engine: Optional[str]) -> None:
    p.add_argument("--engine", choices=ENGINES, default=default_engine)
    p.add_argument("--script", help="replay file (JSON lines) for the scripted engine")
    p.add_argument("--script-cycle", action="store_true",
                   help="restart the script from the top when it runs out")
    p.add_argument("--model", help="model name for the openai engine")
    p.add_argument("--base-url", help="endpoint for the openai engine")
    p.add_argument("--transcript", help="append every prompt and response to this replay file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plotnode", description=__doc__.splitlines()[0])
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="run the story pipeline")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--prompt")
    src.add_argument("--prompt-file")
    p.add_argument("--chapters", type=int)
    p.add_argument("--max-cpn", type=int, help="plot-node budget per chapter")
    p.add_argument("--out", required=True)
    p.add_argument("--run-log", help="default: <out>.runlog.jsonl")
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--no-nekg", action="store_true")
    p.add_argument("--no-review", action="store_true")
    p.add_argument("--split-conjunctions", action="store_true")
    p.add_argument("--seed", type=int)
    _add_engine_flags(p, None)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("inspect", help="summarise a project file")
    p.add_argument("project")
    p.add_argument("--json", action="store_true")
    p.add_argument("--story", action="store_true", help="append the chapter texts")
    p.add_argument("--out")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("export-graph", help="write a project's graph")
    p.add_argument("project")
    p.add_argument("--format", choices=EXPORT_FORMATS, default="json")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_graph)

    p = sub.add_parser("metrics", help="diversity metrics over a corpus directory")
    p.add_argument("--corpus", required=True)
    p.add_argument("--n", type=int, nargs="+", default=list(DEFAULT_NS))
    p.add_argument("--lexicon", help="verb lexicon file (default: built-in)")
    p.add_argument("--log-base", type=float, help="default: natural log")
    p.add_argument("--out")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("arena", help="pairwise judge comparison of two systems")
    p.add_argument("--system-a", required=True)
    p.add_argument("--system-b", required=True, help="baseline system")
    p.add_argument("--prompts", help="JSON object: prompt id -> prompt text")
    p.add_argument("--dimensions", nargs="+")
    p.add_argument("--weighting", choices=("uniform", "amplified"), default="amplified")
    p.add_argument("--bootstrap", type=int, default=DEFAULT_BOOTSTRAP_B)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--truth", help="JSON object: dimension -> 1 if A truly ranks below B else 0")
    p.add_argument("--out")
    _add_engine_flags(p, "scripted")
    p.set_defaults(func=cmd_arena)

    p = sub.add_parser("kappa", help="Cohen's kappa between two label files")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--out")
    p.set_defaults(func=cmd_kappa)

    p = sub.add_parser("stats", help="average story and prompt lengths")
    p.add_argument("--corpus")
    p.add_argument("--prompts", help="tagged prompt file")
    p.add_argument("--out")
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    if args.command == "stats" and not (args.corpus or args.prompts):
        print("plotnode stats: give --corpus and/or --prompts", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"plotnode {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PlotnodeError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())

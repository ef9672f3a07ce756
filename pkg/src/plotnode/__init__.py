"""Plot-node driven story generation with matching evaluation tools."""

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
from plotnode.nekg import NekgGraph, export_graph, import_graph
from plotnode.pipeline import PipelineConfig, RunLog, run_pipeline
from plotnode.project import StoryProject
from plotnode.storyline import Storyline, StorylineEntry

__version__ = "0.1.0"

__all__ = [
    "ChapterPlan",
    "NekgGraph",
    "Node",
    "NodeKind",
    "PipelineConfig",
    "ReviewOutcome",
    "ReviewRecord",
    "ReviewType",
    "RunLog",
    "StoryProject",
    "Storyline",
    "StorylineEntry",
    "export_graph",
    "import_graph",
    "normalize_node",
    "run_pipeline",
    "validate_chapter_nodes",
]

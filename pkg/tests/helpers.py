"""Random-graph builders and brute-force oracles shared by the test modules."""

import random

from plotnode.core import Node, NodeKind
from plotnode.nekg import NekgGraph
from plotnode.storyline import Storyline

ENTITIES = ["Ethan", "Lily", "Clara", "Sophie", "Elias", "Graham", "shore", "letter"]


def random_graph(rng: random.Random, n_edges: int, n_entities: int = 6, split: bool = False):
    """Graph plus its storyline. With ``split`` some subjects are compounds,
    so several edges share one stamp and the edge_id tie-break matters."""
    names = ENTITIES[:n_entities]
    storyline = Storyline()
    graph = NekgGraph(split_conjunctions=split)
    chapter = 0
    for _ in range(n_edges):
        if rng.random() < 0.1:
            chapter += 1
        s = rng.choice(names)
        if split and rng.random() < 0.3:
            s = f"{s} and {rng.choice(names)}"
        o = s if rng.random() < 0.15 else rng.choice(names)
        node = Node(s, rng.choice(["meet", "walk", "call", "leave"]), o)
        graph.record_event(storyline.append(node, NodeKind.CPN, chapter))
    return graph, storyline


def oracle_between(edges, a, b, limit):
    want = {a, b}
    hits = []
    for e in edges:
        if {e.subject, e.object} == want:
            hits.append(e)
    hits.sort(key=lambda e: (-e.time_stamp, -e.edge_id))
    return hits[:limit]


def oracle_involving(edges, name, limit):
    hits = [e for e in edges if e.subject == name or e.object == name]
    hits.sort(key=lambda e: (-e.time_stamp, -e.edge_id))
    return hits[:limit]


def brute_distinct(tokens, n):
    import math

    total = len(tokens) - n + 1
    seen = []
    for i in range(total):
        g = tuple(tokens[i:i + n])
        if g not in seen:
            seen.append(g)
    return len(seen) / total * (1 + math.log(len(tokens)))

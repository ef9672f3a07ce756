"""Embedded narrative entity graph.

Entities are vertices; every recorded plot node becomes a directed,
timestamped event edge. Retrieval is by recency: the most recent events
between two entities, or touching one entity.
"""

from __future__ import annotations

import json
import re
import threading
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field, replace
from typing import Optional

from plotnode.errors import AliasConflict, DuplicateTimestamp, UnknownEntity, UnsupportedFormat
from plotnode.storyline import StorylineEntry

DEFAULT_PAIR_LIMIT = 3
DEFAULT_ENTITY_LIMIT = 3

GRAPHML_NS = "http://graphml.graphdrawing.org/xmlns"
_XSI_NS = "http://www.w3.org/2001/XMLSchema-instance"
_GRAPHML_SCHEMA_LOCATION = f"{GRAPHML_NS} http://graphml.graphdrawing.org/xmlns/1.0/graphml.xsd"

EXPORT_FORMATS = ("json", "graphml", "import-script")
GRAPH_SCHEMA_VERSION = 1

_AND_SPLIT = re.compile(r"\s+and\s+", re.IGNORECASE)


@dataclass
class EntityRef:
    canonical_name: str
    aliases: set[str] = field(default_factory=set)


@dataclass(frozen=True)
class EventEdge:
    edge_id: int
    subject: str
    object: str
    verb: str
    time_stamp: int
    chapter_index: int

    def recency_key(self) -> tuple[int, int]:
        return (self.time_stamp, self.edge_id)

    def to_dict(self) -> dict:
        return {
            "edge_id": self.edge_id,
            "subject": self.subject,
            "object": self.object,
            "verb": self.verb,
            "time_stamp": self.time_stamp,
            "chapter_index": self.chapter_index,
        }

    @classmethod
    def from_dict(cls, data: dict) -> EventEdge:
        return cls(
            edge_id=int(data["edge_id"]),
            subject=data["subject"],
            object=data["object"],
            verb=data["verb"],
            time_stamp=int(data["time_stamp"]),
            chapter_index=int(data["chapter_index"]),
        )

    def __str__(self) -> str:
        return f"[t={self.time_stamp}] {self.subject} {self.verb} {self.object}"


def _most_recent(edges: list[EventEdge], limit: int) -> list[EventEdge]:
    return sorted(edges, key=EventEdge.recency_key, reverse=True)[:limit]


def split_conjunction(name: str) -> list[str]:
    parts = [p.strip() for p in _AND_SPLIT.split(name)]
    return [p for p in parts if p] or [name]


class NekgGraph:
    """In-process property graph with alias-aware entity resolution.

    All mutation and query methods hold one re-entrant lock, so a query
    never observes a partially applied ``record_event`` or ``merge_alias``.
    """

    def __init__(self, split_conjunctions: bool = False) -> None:
        self.split_conjunctions = split_conjunctions
        self._vertices: dict[str, EntityRef] = {}
        self._edges: list[EventEdge] = []
        self._alias_map: dict[str, str] = {}
        self._stamps: set[int] = set()
        self._next_edge_id = 1
        self._lock = threading.RLock()

    # --- views ------------------------------------------------------------

    @property
    def vertices(self) -> dict[str, EntityRef]:
        with self._lock:
            return {
                name: EntityRef(ref.canonical_name, set(ref.aliases))
                for name, ref in self._vertices.items()
            }

    @property
    def edges(self) -> list[EventEdge]:
        with self._lock:
            return list(self._edges)

    @property
    def alias_map(self) -> dict[str, str]:
        with self._lock:
            return dict(self._alias_map)

    def __len__(self) -> int:
        return len(self._edges)

    def resolve(self, name: str) -> Optional[str]:
        """Canonical vertex name for ``name``, or None if the graph has never seen it."""
        with self._lock:
            if name in self._vertices:
                return name
            return self._alias_map.get(name)

    def degree(self, name: str) -> int:
        canon = self.resolve(name)
        if canon is None:
            return 0
        with self._lock:
            return sum(1 for e in self._edges if canon in (e.subject, e.object))

    # --- mutation ---------------------------------------------------------

    def _upsert(self, name: str) -> str:
        canon = self.resolve(name)
        if canon is not None:
            return canon
        self._vertices[name] = EntityRef(name)
        return name

    def _new_edge(self, subject: str, obj: str, verb: str, entry: StorylineEntry) -> EventEdge:
        edge = EventEdge(
            edge_id=self._next_edge_id,
            subject=self._upsert(subject),
            object=self._upsert(obj),
            verb=verb,
            time_stamp=entry.time_stamp,
            chapter_index=entry.chapter_index,
        )
        self._next_edge_id += 1
        self._edges.append(edge)
        return edge

    def record_event(self, entry: StorylineEntry) -> EventEdge:
        """Add the entry's node as an edge; SVS nodes give a self-loop.

        With ``split_conjunctions`` on, a compound name such as
        "Ethan and Lily" fans out into one edge per participant, all sharing
        the entry's stamp. The first edge created is returned.
        """
        node = entry.node
        with self._lock:
            if entry.time_stamp in self._stamps:
                raise DuplicateTimestamp(f"an edge with time_stamp {entry.time_stamp} exists")
            if not self.split_conjunctions:
                edges = [self._new_edge(node.subject, node.object, node.verb, entry)]
            else:
                subjects = split_conjunction(node.subject)
                if node.object == node.subject:
                    pairs = [(s, s) for s in subjects]
                else:
                    pairs = [(s, o) for s in subjects for o in split_conjunction(node.object)]
                edges = [self._new_edge(s, o, node.verb, entry) for s, o in pairs]
            self._stamps.add(entry.time_stamp)
            return edges[0]

    def merge_alias(self, alias: str, canonical: str) -> NekgGraph:
        """Make ``alias`` resolve to ``canonical``.

        If ``alias`` is itself a vertex, its edges and aliases move over to
        ``canonical`` and the vertex disappears.
        """
        with self._lock:
            if canonical not in self._vertices:
                raise UnknownEntity(f"{canonical!r} is not a vertex")
            if alias == canonical:
                return self
            current = self._alias_map.get(alias)
            if current is not None:
                if current == canonical:
                    return self
                raise AliasConflict(f"{alias!r} already resolves to {current!r}")
            target = self._vertices[canonical]
            absorbed = self._vertices.pop(alias, None)
            if absorbed is not None:
                self._edges = [
                    replace(
                        e,
                        subject=canonical if e.subject == alias else e.subject,
                        object=canonical if e.object == alias else e.object,
                    )
                    for e in self._edges
                ]
                for a in absorbed.aliases:
                    self._alias_map[a] = canonical
                    target.aliases.add(a)
            self._alias_map[alias] = canonical
            target.aliases.add(alias)
            return self

    # --- retrieval --------------------------------------------------------

    def events_between(self, a: str, b: str, limit: int = DEFAULT_PAIR_LIMIT) -> list[EventEdge]:
        """Most recent edges joining ``a`` and ``b`` in either direction."""
        if limit < 1:
            raise ValueError("limit must be >= 1")
        with self._lock:
            ra, rb = self.resolve(a), self.resolve(b)
            if ra is None or rb is None:
                return []
            want = {ra, rb}
            hits = [e for e in self._edges if {e.subject, e.object} == want]
        return _most_recent(hits, limit)

    def events_involving(self, e: str, limit: int = DEFAULT_ENTITY_LIMIT) -> list[EventEdge]:
        if limit < 1:
            raise ValueError("limit must be >= 1")
        with self._lock:
            canon = self.resolve(e)
            if canon is None:
                return []
            hits = [x for x in self._edges if canon in (x.subject, x.object)]
        return _most_recent(hits, limit)

    # --- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        with self._lock:
            return {
                "schema_version": GRAPH_SCHEMA_VERSION,
                "split_conjunctions": self.split_conjunctions,
                "next_edge_id": self._next_edge_id,
                "vertices": [
                    {"name": ref.canonical_name, "aliases": sorted(ref.aliases)}
                    for ref in self._vertices.values()
                ],
                "edges": [e.to_dict() for e in self._edges],
            }

    @classmethod
    def from_dict(cls, data: dict) -> NekgGraph:
        graph = cls(split_conjunctions=bool(data.get("split_conjunctions", False)))
        for v in data.get("vertices", []):
            name = v["name"]
            graph._vertices[name] = EntityRef(name, set(v.get("aliases", [])))
            for a in v.get("aliases", []):
                if a in graph._alias_map:
                    raise AliasConflict(f"alias {a!r} listed under two vertices")
                graph._alias_map[a] = name
        for raw in data.get("edges", []):
            edge = EventEdge.from_dict(raw)
            for end in (edge.subject, edge.object):
                if end not in graph._vertices:
                    raise UnknownEntity(f"edge {edge.edge_id} references unknown vertex {end!r}")
            graph._edges.append(edge)
            graph._stamps.add(edge.time_stamp)
        ids = [e.edge_id for e in graph._edges]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate edge_id in graph document")
        graph._next_edge_id = max(int(data.get("next_edge_id", 1)), max(ids, default=0) + 1)
        return graph

    def export(self, fmt: str) -> bytes:
        if fmt == "json":
            return (json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n").encode("utf-8")
        if fmt == "graphml":
            return _to_graphml(self.to_dict())
        if fmt == "import-script":
            return _to_cypher(self.to_dict()).encode("utf-8")
        raise UnsupportedFormat(f"unsupported export format {fmt!r}; choose from {EXPORT_FORMATS}")


def export_graph(graph: NekgGraph, fmt: str) -> bytes:
    return graph.export(fmt)


def import_graph(data: bytes | str, fmt: str) -> NekgGraph:
    if isinstance(data, str):
        data = data.encode("utf-8")
    if fmt == "json":
        return NekgGraph.from_dict(json.loads(data.decode("utf-8")))
    if fmt == "graphml":
        return NekgGraph.from_dict(_from_graphml(data))
    raise UnsupportedFormat(f"cannot import format {fmt!r}")


# --- GraphML -------------------------------------------------------------

_NODE_KEYS = [("v_name", "name", "string"), ("v_aliases", "aliases", "string")]
_EDGE_KEYS = [
    ("e_edge_id", "edge_id", "int"),
    ("e_verb", "verb", "string"),
    ("e_time_stamp", "time_stamp", "int"),
    ("e_chapter_index", "chapter_index", "int"),
]
_GRAPH_KEYS = [("g_next_edge_id", "next_edge_id", "int"), ("g_split", "split_conjunctions", "boolean")]


def _q(tag: str) -> str:
    return f"{{{GRAPHML_NS}}}{tag}"


def _to_graphml(doc: dict) -> bytes:
    ET.register_namespace("", GRAPHML_NS)
    ET.register_namespace("xsi", _XSI_NS)
    root = ET.Element(_q("graphml"), {f"{{{_XSI_NS}}}schemaLocation": _GRAPHML_SCHEMA_LOCATION})
    for domain, keys in (("graph", _GRAPH_KEYS), ("node", _NODE_KEYS), ("edge", _EDGE_KEYS)):
        for key_id, name, typ in keys:
            ET.SubElement(
                root, _q("key"), {"id": key_id, "for": domain, "attr.name": name, "attr.type": typ}
            )
    graph = ET.SubElement(root, _q("graph"), {"id": "nekg", "edgedefault": "directed"})
    ET.SubElement(graph, _q("data"), {"key": "g_next_edge_id"}).text = str(doc["next_edge_id"])
    ET.SubElement(graph, _q("data"), {"key": "g_split"}).text = (
        "true" if doc["split_conjunctions"] else "false"
    )
    ids: dict[str, str] = {}
    for i, v in enumerate(doc["vertices"]):
        node_id = f"n{i}"
        ids[v["name"]] = node_id
        el = ET.SubElement(graph, _q("node"), {"id": node_id})
        ET.SubElement(el, _q("data"), {"key": "v_name"}).text = v["name"]
        ET.SubElement(el, _q("data"), {"key": "v_aliases"}).text = json.dumps(v["aliases"])
    for e in doc["edges"]:
        el = ET.SubElement(
            graph,
            _q("edge"),
            {"id": f"e{e['edge_id']}", "source": ids[e["subject"]], "target": ids[e["object"]]},
        )
        for key_id, name, _ in _EDGE_KEYS:
            ET.SubElement(el, _q("data"), {"key": key_id}).text = str(e[name])
    ET.indent(root)
    return ET.tostring(root, encoding="utf-8", xml_declaration=True) + b"\n"


def _from_graphml(data: bytes) -> dict:
    root = ET.fromstring(data)
    keys = {k.get("id"): k.get("attr.name") for k in root.iter(_q("key"))}
    graph = root.find(_q("graph"))
    if graph is None:
        raise ValueError("graphml document has no <graph> element")

    def fields(el) -> dict[str, str]:
        return {keys[d.get("key")]: d.text or "" for d in el.findall(_q("data"))}

    gfields = fields(graph)
    names: dict[str, str] = {}
    vertices = []
    for node in graph.findall(_q("node")):
        f = fields(node)
        names[node.get("id")] = f["name"]
        vertices.append({"name": f["name"], "aliases": json.loads(f.get("aliases", "[]"))})
    edges = []
    for edge in graph.findall(_q("edge")):
        f = fields(edge)
        edges.append(
            {
                "edge_id": int(f["edge_id"]),
                "subject": names[edge.get("source")],
                "object": names[edge.get("target")],
                "verb": f["verb"],
                "time_stamp": int(f["time_stamp"]),
                "chapter_index": int(f["chapter_index"]),
            }
        )
    return {
        "next_edge_id": int(gfields.get("next_edge_id", "1")),
        "split_conjunctions": gfields.get("split_conjunctions") == "true",
        "vertices": vertices,
        "edges": edges,
    }


# --- Cypher import script -------------------------------------------------


def _cypher_str(value: str) -> str:
    return "'" + value.replace("\\", "\\\\").replace("'", "\\'") + "'"


def _to_cypher(doc: dict) -> str:
    lines = ["// NEKG import script: run against an empty database"]
    for v in doc["vertices"]:
        aliases = ", ".join(_cypher_str(a) for a in v["aliases"])
        lines.append(f"CREATE (:Entity {{name: {_cypher_str(v['name'])}, aliases: [{aliases}]}});")
    for e in doc["edges"]:
        props = (
            f"{{edge_id: {e['edge_id']}, verb: {_cypher_str(e['verb'])}, "
            f"time_stamp: {e['time_stamp']}, chapter_index: {e['chapter_index']}}}"
        )
        if e["subject"] == e["object"]:
            lines.append(
                f"MATCH (s:Entity {{name: {_cypher_str(e['subject'])}}}) "
                f"CREATE (s)-[:EVENT {props}]->(s);"
            )
        else:
            lines.append(
                f"MATCH (s:Entity {{name: {_cypher_str(e['subject'])}}}), "
                f"(o:Entity {{name: {_cypher_str(e['object'])}}}) "
                f"CREATE (s)-[:EVENT {props}]->(o);"
            )
    return "\n".join(lines) + "\n"

"""Causal map model: parsing, validation, and acyclic decomposition.

A causal map is a signed directed graph. Nodes carry human-readable concept
labels; every edge is typed positive (source raises target) or negative
(source lowers target). Maps may contain cycles, so before verbalization
they are decomposed into small acyclic components whose edge sets partition
the input edge set. The union of the components therefore reconstructs the
input graph exactly, which keeps pre-processing lossless.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

from .errors import DecompositionError, GraphParseError, GraphValidationError

#: Tokens reserved by the linearized text format. Labels must not contain any
#: of them (substring check) and must not contain the pipe delimiter.
RESERVED_TOKENS = ("<S>", "<H>", "<POS>", "<NEG>", "<T>", "<E>")

DEFAULT_MAX_NODES = 4


class Polarity(Enum):
    """Sign of a causal edge."""

    POSITIVE = "POS"
    NEGATIVE = "NEG"

    @classmethod
    def parse(cls, text: str) -> "Polarity":
        token = text.strip()
        if token in ("+", "POS", "pos", "positive", "Positive"):
            return cls.POSITIVE
        if token in ("-", "NEG", "neg", "negative", "Negative"):
            return cls.NEGATIVE
        raise GraphParseError(f"unknown polarity {text!r}", code="bad-polarity")

    @property
    def rank(self) -> int:
        # Positive sorts before Negative in the canonical edge order.
        return 0 if self is Polarity.POSITIVE else 1


@dataclass(frozen=True)
class Node:
    id: str
    label: str


@dataclass(frozen=True)
class Edge:
    source: str
    target: str
    polarity: Polarity


class GraphFormat(Enum):
    DOCUMENT = "document"
    EDGE_LIST = "edge-list"


@dataclass(frozen=True)
class Violation:
    code: str
    element: str


@dataclass(frozen=True)
class ValidationReport:
    """Violations break graph invariants; warnings are advisory only."""

    violations: tuple[Violation, ...] = ()
    warnings: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations


def _check_label(label: str) -> str | None:
    """Return a violation code for a bad label, or None if it is fine."""
    if not label or label != label.strip():
        return "empty-label" if not label.strip() else "label-whitespace"
    if "|" in label:
        return "label-pipe"
    for token in RESERVED_TOKENS:
        if token in label:
            return "label-reserved-token"
    return None


def _collect_violations(nodes: Sequence[Node], edges: Sequence[Edge]) -> list[Violation]:
    found: list[Violation] = []
    by_id: dict[str, Node] = {}
    labels_seen: dict[str, str] = {}
    for node in nodes:
        code = _check_label(node.label)
        if code:
            found.append(Violation(code, f"node {node.id!r}"))
        if node.id in by_id:
            found.append(Violation("duplicate-node-id", f"node {node.id!r}"))
        elif node.label in labels_seen:
            found.append(Violation("duplicate-label", f"label {node.label!r}"))
        by_id[node.id] = node
        labels_seen.setdefault(node.label, node.id)
    seen_edges: set[tuple[str, str, Polarity]] = set()
    for edge in edges:
        if edge.source not in by_id:
            found.append(Violation("dangling-endpoint", f"edge source {edge.source!r}"))
        if edge.target not in by_id:
            found.append(Violation("dangling-endpoint", f"edge target {edge.target!r}"))
        if edge.source == edge.target:
            found.append(Violation("self-loop", f"edge {edge.source!r} -> {edge.target!r}"))
        key = (edge.source, edge.target, edge.polarity)
        if key in seen_edges:
            found.append(
                Violation("duplicate-edge", f"edge {edge.source!r} -> {edge.target!r}")
            )
        seen_edges.add(key)
    return found


class CausalGraph:
    """Immutable signed digraph with a canonical node and edge order.

    Nodes are sorted by label and edges by (source label, target label,
    polarity), so structurally equal inputs compare equal regardless of the
    order they were read in.
    """

    __slots__ = ("nodes", "edges", "_by_id")

    def __init__(self, nodes: Iterable[Node], edges: Iterable[Edge], *, validate: bool = True):
        node_list = list(nodes)
        edge_list = list(edges)
        if validate:
            violations = _collect_violations(node_list, edge_list)
            if violations:
                first = violations[0]
                raise GraphValidationError(f"{first.element}: {first.code}", code=first.code)
        by_id = {node.id: node for node in node_list}
        object.__setattr__(self, "nodes", tuple(sorted(node_list, key=lambda n: (n.label, n.id))))

        def edge_key(edge: Edge) -> tuple[str, str, int]:
            src = by_id.get(edge.source)
            tgt = by_id.get(edge.target)
            return (
                src.label if src else edge.source,
                tgt.label if tgt else edge.target,
                edge.polarity.rank,
            )

        object.__setattr__(self, "edges", tuple(sorted(edge_list, key=edge_key)))
        object.__setattr__(self, "_by_id", by_id)

    def __setattr__(self, name, value):  # pragma: no cover - defensive
        raise AttributeError("CausalGraph is immutable")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CausalGraph):
            return NotImplemented
        return self.nodes == other.nodes and self.edges == other.edges

    def __hash__(self) -> int:
        return hash((self.nodes, self.edges))

    def __repr__(self) -> str:
        return f"CausalGraph(nodes={len(self.nodes)}, edges={len(self.edges)})"

    def node(self, node_id: str) -> Node:
        return self._by_id[node_id]

    def label_of(self, node_id: str) -> str:
        return self._by_id[node_id].label

    def isolated_nodes(self) -> tuple[Node, ...]:
        touched = {e.source for e in self.edges} | {e.target for e in self.edges}
        return tuple(n for n in self.nodes if n.id not in touched)

    def to_document(self) -> dict:
        return {
            "nodes": [{"id": n.id, "label": n.label} for n in self.nodes],
            "edges": [
                {"source": e.source, "target": e.target, "polarity": e.polarity.value}
                for e in self.edges
            ],
        }


def validate_graph(graph: CausalGraph) -> ValidationReport:
    """Re-derive the invariant report for a graph built through any path."""
    violations = _collect_violations(graph.nodes, graph.edges)
    warnings = [
        Violation("isolated-node", f"node {n.label!r}") for n in graph.isolated_nodes()
    ]
    return ValidationReport(tuple(violations), tuple(warnings))


def parse_graph(source: str, format: GraphFormat = GraphFormat.EDGE_LIST) -> CausalGraph:
    """Parse a causal map from either supported text format.

    The document format is a JSON object with explicit node ids; the
    edge-list format is one ``source,polarity,target`` row per line with
    polarity in {+, -, POS, NEG} and node identity keyed by label.
    """
    if format is GraphFormat.DOCUMENT:
        return _parse_document(source)
    return _parse_edge_list(source)


def _parse_document(source: str) -> CausalGraph:
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as exc:
        raise GraphParseError(f"malformed document: {exc}", code="malformed-document") from exc
    if not isinstance(doc, dict) or "nodes" not in doc or "edges" not in doc:
        raise GraphParseError(
            "document must be an object with 'nodes' and 'edges'", code="malformed-document"
        )
    nodes = []
    for i, raw in enumerate(doc["nodes"]):
        if not isinstance(raw, dict) or "id" not in raw or "label" not in raw:
            raise GraphParseError(f"node {i}: expected id and label", code="malformed-document")
        nodes.append(Node(id=str(raw["id"]), label=str(raw["label"])))
    edges = []
    for i, raw in enumerate(doc["edges"]):
        if not isinstance(raw, dict) or not {"source", "target", "polarity"} <= raw.keys():
            raise GraphParseError(
                f"edge {i}: expected source, target and polarity", code="malformed-document"
            )
        edges.append(
            Edge(
                source=str(raw["source"]),
                target=str(raw["target"]),
                polarity=Polarity.parse(str(raw["polarity"])),
            )
        )
    return CausalGraph(nodes, edges)


def _parse_edge_list(source: str) -> CausalGraph:
    nodes: dict[str, Node] = {}
    edges: list[Edge] = []
    seen: set[Edge] = set()
    reader = csv.reader(io.StringIO(source))
    for row_no, row in enumerate(reader, start=1):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 3:
            raise GraphParseError(
                f"row {row_no}: expected source,polarity,target (got {len(row)} fields)",
                code="malformed-row",
            )
        src_label, polarity_text, tgt_label = (field.strip() for field in row)
        try:
            polarity = Polarity.parse(polarity_text)
        except GraphParseError as exc:
            raise GraphParseError(f"row {row_no}: {exc}", code="bad-polarity") from exc
        for label in (src_label, tgt_label):
            code = _check_label(label)
            if code:
                raise GraphParseError(f"row {row_no}: {code} ({label!r})", code=code)
            nodes.setdefault(label, Node(id=label, label=label))
        if src_label == tgt_label:
            raise GraphParseError(f"row {row_no}: self-loop on {src_label!r}", code="self-loop")
        edge = Edge(source=src_label, target=tgt_label, polarity=polarity)
        if edge in seen:
            raise GraphParseError(
                f"row {row_no}: duplicate edge {src_label!r} -> {tgt_label!r}",
                code="duplicate-edge",
            )
        seen.add(edge)
        edges.append(edge)
    return CausalGraph(nodes.values(), edges)


@dataclass(frozen=True)
class Component:
    """Small acyclic subgraph; the unit that gets verbalized as one sentence.

    Edge order is fixed at construction and determines the emitted text.
    Nodes are ordered by first appearance in the edge list.
    """

    edges: tuple[Edge, ...]
    nodes: tuple[Node, ...]

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    def label_of(self, node_id: str) -> str:
        for node in self.nodes:
            if node.id == node_id:
                return node.label
        raise KeyError(node_id)

    def labeled_edges(self) -> tuple[tuple[str, Polarity, str], ...]:
        return tuple(
            (self.label_of(e.source), e.polarity, self.label_of(e.target)) for e in self.edges
        )

    def to_document(self) -> dict:
        return {
            "nodes": [{"id": n.id, "label": n.label} for n in self.nodes],
            "edges": [
                {"source": e.source, "target": e.target, "polarity": e.polarity.value}
                for e in self.edges
            ],
        }

    @classmethod
    def from_edges(cls, edges: Sequence[Edge], lookup: dict[str, Node]) -> "Component":
        if not edges:
            raise GraphValidationError("component needs at least one edge", code="empty-component")
        nodes: list[Node] = []
        seen: set[str] = set()
        for edge in edges:
            for node_id in (edge.source, edge.target):
                if node_id not in seen:
                    if node_id not in lookup:
                        raise GraphValidationError(
                            f"unknown node {node_id!r}", code="dangling-endpoint"
                        )
                    seen.add(node_id)
                    nodes.append(lookup[node_id])
        component = cls(edges=tuple(edges), nodes=tuple(nodes))
        if _has_cycle(component.edges):
            raise GraphValidationError("component contains a cycle", code="component-cycle")
        if not _weakly_connected(component.edges):
            raise GraphValidationError("component is not connected", code="component-disconnected")
        return component

    @classmethod
    def from_labeled_edges(
        cls, labeled: Sequence[tuple[str, Polarity, str]]
    ) -> "Component":
        """Build a component from (source label, polarity, target label) triples.

        Node ids are regenerated from labels, which is what round-tripping
        through the text format produces.
        """
        lookup = {}
        edges = []
        for src, polarity, tgt in labeled:
            for label in (src, tgt):
                code = _check_label(label)
                if code:
                    raise GraphValidationError(f"{code} ({label!r})", code=code)
                lookup.setdefault(label, Node(id=label, label=label))
            edges.append(Edge(source=src, target=tgt, polarity=polarity))
        return cls.from_edges(edges, lookup)

    @classmethod
    def from_document(cls, doc: dict) -> "Component":
        lookup = {str(n["id"]): Node(id=str(n["id"]), label=str(n["label"])) for n in doc["nodes"]}
        edges = [
            Edge(str(e["source"]), str(e["target"]), Polarity.parse(str(e["polarity"])))
            for e in doc["edges"]
        ]
        return cls.from_edges(edges, lookup)


def _has_cycle(edges: Iterable[Edge]) -> bool:
    adjacency: dict[str, list[str]] = {}
    for edge in edges:
        adjacency.setdefault(edge.source, []).append(edge.target)
    visiting: set[str] = set()
    done: set[str] = set()

    def visit(node: str) -> bool:
        if node in done:
            return False
        if node in visiting:
            return True
        visiting.add(node)
        for nxt in adjacency.get(node, ()):
            if visit(nxt):
                return True
        visiting.discard(node)
        done.add(node)
        return False

    return any(visit(node) for node in list(adjacency))


def _weakly_connected(edges: Sequence[Edge]) -> bool:
    if not edges:
        return True
    parent: dict[str, str] = {}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for edge in edges:
        parent.setdefault(edge.source, edge.source)
        parent.setdefault(edge.target, edge.target)
        parent[find(edge.source)] = find(edge.target)
    roots = {find(x) for x in parent}
    return len(roots) == 1


def _reaches(adjacency: dict[str, set[str]], start: str, goal: str) -> bool:
    stack = [start]
    seen = {start}
    while stack:
        node = stack.pop()
        if node == goal:
            return True
        for nxt in adjacency.get(node, ()):
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return False


def decompose(graph: CausalGraph, max_nodes: int = DEFAULT_MAX_NODES) -> list[Component]:
    """Split a causal map into acyclic components of at most max_nodes nodes.

    Greedy deterministic grouping: edges are taken in the graph's canonical
    order; each component starts from the first unassigned edge and keeps
    absorbing the lowest-ranked unassigned edge that touches the component,
    keeps it acyclic, and respects the node budget. Every input edge lands
    in exactly one component, so the union of all components equals the
    input graph and the step loses no information.
    """
    if max_nodes < 2:
        raise DecompositionError(f"max_nodes must be >= 2 (got {max_nodes})", code="max-nodes")
    if not graph.nodes:
        raise DecompositionError("cannot decompose an empty graph", code="empty-graph")
    edges = graph.edges
    touching: dict[str, list[int]] = {}
    for rank, edge in enumerate(edges):
        touching.setdefault(edge.source, []).append(rank)
        touching.setdefault(edge.target, []).append(rank)
    unassigned = set(range(len(edges)))
    components: list[Component] = []
    while unassigned:
        seed = min(unassigned)
        unassigned.discard(seed)
        member_ranks = [seed]
        comp_nodes = {edges[seed].source, edges[seed].target}
        adjacency: dict[str, set[str]] = {edges[seed].source: {edges[seed].target}}
        while True:
            chosen = None
            candidates = sorted(
                {
                    rank
                    for node in comp_nodes
                    for rank in touching.get(node, ())
                    if rank in unassigned
                }
            )
            for rank in candidates:
                edge = edges[rank]
                grown = comp_nodes | {edge.source, edge.target}
                if len(grown) > max_nodes:
                    continue
                # Adding source -> target closes a cycle iff source is
                # already reachable from target inside the component.
                if _reaches(adjacency, edge.target, edge.source):
                    continue
                chosen = rank
                break
            if chosen is None:
                break
            unassigned.discard(chosen)
            member_ranks.append(chosen)
            edge = edges[chosen]
            comp_nodes.update((edge.source, edge.target))
            adjacency.setdefault(edge.source, set()).add(edge.target)
        components.append(
            Component.from_edges([edges[rank] for rank in member_ranks], dict(graph._by_id))
        )
    return components


def union(components: Sequence[Component]) -> CausalGraph:
    """Rebuild a graph from components, deduplicating repeated edges.

    This is the checking oracle for decompose: the union of a decomposition
    must equal the graph it came from.
    """
    if not components:
        raise DecompositionError("union of zero components", code="no-components")
    nodes: dict[str, Node] = {}
    edges: list[Edge] = []
    seen: set[Edge] = set()
    for component in components:
        for node in component.nodes:
            known = nodes.get(node.id)
            if known is not None and known.label != node.label:
                raise GraphValidationError(
                    f"node {node.id!r} has conflicting labels", code="label-conflict"
                )
            nodes.setdefault(node.id, node)
        for edge in component.edges:
            if edge not in seen:
                seen.add(edge)
                edges.append(edge)
    return CausalGraph(nodes.values(), edges)

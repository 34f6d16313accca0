"""Shared test utilities: random graph generators and independent checkers.

The checkers here deliberately avoid the library's own algorithms so they
can act as oracles: acyclicity is verified with Kahn's topological sort and
LCS with brute-force subsequence enumeration.
"""

from __future__ import annotations

import random
from itertools import combinations

from causaltext.graph import CausalGraph, Component, Edge, Node, Polarity


def random_graph(
    seed: int,
    max_nodes: int = 50,
    max_edges: int = 150,
    *,
    allow_cycles: bool = True,
) -> CausalGraph:
    """Random signed digraph; labels are synthetic concept names."""
    rng = random.Random(seed)
    n_nodes = rng.randint(2, max_nodes)
    nodes = [Node(id=f"n{i}", label=f"concept {i}") for i in range(n_nodes)]
    n_edges = rng.randint(1, max_edges)
    seen: set[tuple[str, str, Polarity]] = set()
    edges: list[Edge] = []
    for _ in range(n_edges):
        a, b = rng.sample(range(n_nodes), 2)
        if not allow_cycles and a > b:
            a, b = b, a
        polarity = rng.choice((Polarity.POSITIVE, Polarity.NEGATIVE))
        key = (f"n{a}", f"n{b}", polarity)
        if key in seen:
            continue
        seen.add(key)
        edges.append(Edge(source=f"n{a}", target=f"n{b}", polarity=polarity))
    if not edges:
        edges.append(Edge(source="n0", target="n1", polarity=Polarity.POSITIVE))
    return CausalGraph(nodes, edges)


def random_cyclic_graph(seed: int, max_nodes: int = 50, max_edges: int = 150) -> CausalGraph:
    """Random digraph guaranteed to contain at least one directed cycle."""
    graph = random_graph(seed, max_nodes, max_edges)
    if is_acyclic(graph.edges):
        rng = random.Random(seed + 10_000)
        nodes = list(graph.nodes)
        k = rng.randint(2, min(4, len(nodes)))
        ring = rng.sample(nodes, k)
        extra = []
        existing = set(graph.edges)
        for i in range(k):
            edge = Edge(ring[i].id, ring[(i + 1) % k].id, Polarity.POSITIVE)
            if edge not in existing and Edge(edge.source, edge.target, Polarity.NEGATIVE) not in existing:
                extra.append(edge)
        graph = CausalGraph(nodes, list(graph.edges) + extra)
    return graph


def is_acyclic(edges) -> bool:
    """Independent oracle: Kahn's algorithm consumes every node iff no cycle."""
    nodes = {e.source for e in edges} | {e.target for e in edges}
    indegree = {n: 0 for n in nodes}
    outgoing: dict[str, list[str]] = {n: [] for n in nodes}
    for e in edges:
        indegree[e.target] += 1
        outgoing[e.source].append(e.target)
    queue = [n for n in nodes if indegree[n] == 0]
    seen = 0
    while queue:
        node = queue.pop()
        seen += 1
        for nxt in outgoing[node]:
            indegree[nxt] -= 1
            if indegree[nxt] == 0:
                queue.append(nxt)
    return seen == len(nodes)


def random_component(seed: int, max_edges: int = 6) -> Component:
    """Random acyclic connected component with multi-word labels."""
    rng = random.Random(seed)
    words = [
        "nutrition", "obesity", "stress", "exercise", "sleep", "income",
        "education", "support", "awareness", "access", "risk", "isolation",
    ]
    n_edges = rng.randint(1, max_edges)
    n_nodes = rng.randint(2, n_edges + 1)
    n_edges = min(n_edges, n_nodes * (n_nodes - 1) // 2)
    labels = []
    for i in range(n_nodes):
        length = rng.randint(1, 3)
        labels.append(" ".join(rng.sample(words, length)) + f" {i}")
    # Edges only point from lower to higher index, so the result is acyclic;
    # chaining across consecutive indexes keeps it connected.
    triples = []
    seen = set()
    for i in range(n_nodes - 1):
        polarity = rng.choice((Polarity.POSITIVE, Polarity.NEGATIVE))
        triples.append((labels[i], polarity, labels[i + 1]))
        seen.add((labels[i], labels[i + 1]))
    while len(triples) < n_edges:
        a, b = sorted(rng.sample(range(n_nodes), 2))
        if (labels[a], labels[b]) in seen:
            continue
        seen.add((labels[a], labels[b]))
        polarity = rng.choice((Polarity.POSITIVE, Polarity.NEGATIVE))
        triples.append((labels[a], polarity, labels[b]))
    return Component.from_labeled_edges(triples)


def brute_force_lcs(a: list[str], b: list[str]) -> int:
    """Longest common subsequence by enumerating subsequences of the shorter."""
    short, long_ = (a, b) if len(a) <= len(b) else (b, a)

    def is_subsequence(sub: tuple[str, ...], seq: list[str]) -> bool:
        it = iter(seq)
        return all(any(token == other for other in it) for token in sub)

    for length in range(len(short), 0, -1):
        for indices in combinations(range(len(short)), length):
            sub = tuple(short[i] for i in indices)
            if is_subsequence(sub, long_):
                return length
    return 0


def sample_component() -> Component:
    """The six-node sample component used across golden tests."""
    return Component.from_labeled_edges(
        [
            ("nutrition", Polarity.POSITIVE, "consumption of fruits and vegetables"),
            ("nutrition", Polarity.POSITIVE, "nutrition education hours"),
            ("consumption of fruits and vegetables", Polarity.NEGATIVE, "obesity"),
            (
                "consumption of fruits and vegetables",
                Polarity.POSITIVE,
                "social support for eating fruits and vegetables",
            ),
            (
                "consumption of fruits and vegetables",
                Polarity.NEGATIVE,
                "lack of knowledge of benefits to eating fruits and vegetables",
            ),
        ]
    )


SAMPLE_TAGGED = (
    "<S> <H> nutrition <POS> <T> consumption of fruits and vegetables"
    " | <H> nutrition <POS> <T> nutrition education hours"
    " | <H> consumption of fruits and vegetables <NEG> <T> obesity"
    " | <H> consumption of fruits and vegetables <POS> <T> social support for eating fruits and vegetables"
    " | <H> consumption of fruits and vegetables <NEG> <T> lack of knowledge of benefits to eating fruits and vegetables"
    " <E>"
)

SAMPLE_UNDELIMITED = (
    "<S> <H> nutrition <POS> <T> consumption of fruits and vegetables"
    "<H> nutrition <POS> <T> nutrition education hours"
    "<H> consumption of fruits and vegetables <NEG> <T> obesity"
    "<H> consumption of fruits and vegetables <POS> <T> social support for eating fruits and vegetables"
    "<H> consumption of fruits and vegetables <NEG> <T> lack of knowledge of benefits to eating fruits and vegetables"
    " <E>"
)

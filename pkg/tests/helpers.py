"""Seeded random generators shared across the test modules."""

from __future__ import annotations

import random

from amrseq.graph import AmrGraph, Edge, Node
from amrseq.preprocess import SimplifiedGraph

CONCEPTS = [
    "want", "go", "boy", "girl", "meet", "say", "see", "dog", "city",
    "team", "run", "house", "book", "give", "take", "small", "fast",
]
LABELS = [":ARG0", ":ARG1", ":ARG2", ":mod", ":time", ":poss", ":op1", ":location"]
CONSTANT_POOL = ['"New"', '"York"', "5", "42", "3.14", "-"]


def _concept(rng: random.Random) -> str:
    base = rng.choice(CONCEPTS)
    if rng.random() < 0.4:
        return f"{base}-{rng.randint(1, 12):02d}"
    return base


def _has_cycle(edges: list[Edge], candidate: Edge) -> bool:
    adjacency: dict[str, list[str]] = {}
    for e in [*edges, candidate]:
        adjacency.setdefault(e.source, []).append(e.target)
    color: dict[str, int] = {}

    def visit(u: str) -> bool:
        color[u] = 1
        for v in adjacency.get(u, []):
            c = color.get(v, 0)
            if c == 1 or (c == 0 and visit(v)):
                return True
        color[u] = 2
        return False

    return any(visit(u) for u in list(adjacency) if color.get(u, 0) == 0)


def random_graph(rng: random.Random, max_nodes: int = 12) -> AmrGraph:
    """A random well-formed AMR graph with occasional re-entrancy,
    inverted edges, and constants."""
    n_vars = rng.randint(1, max_nodes)
    nodes: list[Node] = []
    used_ids: set[str] = set()
    for _ in range(n_vars):
        concept = _concept(rng)
        base = concept[0]
        var = base
        k = 2
        while var in used_ids:
            var = f"{base}{k}"
            k += 1
        used_ids.add(var)
        sense = None
        if concept.count("-") and concept.rsplit("-", 1)[1].isdigit():
            concept, suffix = concept.rsplit("-", 1)
            sense = int(suffix)
        nodes.append(Node(id=var, concept=concept, sense=sense))

    edges: list[Edge] = []
    variables = [n.id for n in nodes]
    # Written spanning tree over the variables.
    for i in range(1, n_vars):
        parent = rng.choice(variables[:i])
        child = variables[i]
        label = rng.choice(LABELS)
        if rng.random() < 0.2:
            edges.append(Edge(source=child, label=label, target=parent, inverted=True))
        else:
            edges.append(Edge(source=parent, label=label, target=child))

    # Re-entrant references, kept acyclic in canonical direction.
    for _ in range(rng.randint(0, 2)):
        if n_vars < 2:
            break
        holder = rng.choice(variables)
        referent = rng.choice(variables)
        if holder == referent:
            continue
        label = rng.choice(LABELS)
        if rng.random() < 0.5:
            candidate = Edge(source=holder, label=label, target=referent)
        else:
            candidate = Edge(source=referent, label=label, target=holder, inverted=True)
        if not _has_cycle(edges, candidate):
            edges.append(candidate)

    # Constants.
    constants = 0
    for _ in range(rng.randint(0, 2)):
        parent = rng.choice(variables)
        cid = f"_c{constants}"
        constants += 1
        nodes.append(Node(id=cid, concept=rng.choice(CONSTANT_POOL), is_constant=True))
        edges.append(Edge(source=parent, label=rng.choice(LABELS), target=cid))

    graph = AmrGraph(nodes=tuple(nodes), edges=tuple(edges), root=variables[0])
    graph.validate()
    return graph


def random_tree(rng: random.Random, max_nodes: int = 12) -> SimplifiedGraph:
    """A random simplified tree with 1..max_nodes nodes."""
    n = rng.randint(1, max_nodes)
    root = SimplifiedGraph(_concept(rng))
    pool = [root]
    for _ in range(n - 1):
        parent = rng.choice(pool)
        label = rng.choice(LABELS)
        if rng.random() < 0.15:
            label += "-of"
        child = SimplifiedGraph(_concept(rng))
        parent.children.append((label, child))
        pool.append(child)
    return root

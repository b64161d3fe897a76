"""Tree-to-sequence rendering and its inverse.

Rendering walks the simplified tree in pre-order, emitting the concept,
then each edge label followed by the child's rendering. A node's children
are wrapped in scope markers ``(`` ``)`` when the node has two or more
children. A node with exactly one child is normally rendered bare (the
scope omission that keeps sequences short), with one exception: inside an
already-open scope a single-child node is bracketed too. Without that
bracket the boundary between its chain and the enclosing child list is
lost, and distinct trees collapse onto one string -- omitting it is
mutually exclusive with lossless round trips, and this module guarantees
delinearize(linearize(t)) == t. Chains hanging off the root spine, the
common AMR shape, still carry no markers at all.

Child visitation order is pluggable: the human-authored order, one global
random order of edge labels, or a fresh random order per example.

The reader accepts arbitrary token lists (raw model output) and always
produces a tree, applying a fixed repair policy to malformed input.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterable, Union

from .graph import AmrGraph, Edge, Node, is_constant_token, split_sense
from .preprocess import SimplifiedGraph

OPEN = "("
CLOSE = ")"
PLACEHOLDER_CONCEPT = "amr-unknown"

TokenSequence = list[str]


class EmptyInventory(ValueError):
    pass


@dataclass(frozen=True)
class HumanOrder:
    """Visit children exactly as authored."""


@dataclass(frozen=True)
class GlobalRandomOrder:
    """One shuffled total order over edge labels, shared by a whole
    dataset pass. Build with :func:`make_global_order`."""

    seed: int
    label_order: tuple[str, ...]

    def rank(self, label: str):
        try:
            return (0, self.label_order.index(label))
        except ValueError:
            return (1, label)


@dataclass(frozen=True)
class RandomOrder:
    """A fresh label order per example, derived from (seed, example id)."""

    seed: int


LinearizationOrder = Union[HumanOrder, GlobalRandomOrder, RandomOrder]


def make_global_order(labels: Iterable[str], seed: int) -> GlobalRandomOrder:
    """Materialize a GlobalRandom order for a dataset's edge-label
    inventory; deterministic for a given (inventory, seed)."""
    inventory = sorted(set(labels))
    if not inventory:
        raise EmptyInventory("edge-label inventory is empty")
    rng = random.Random(seed)
    rng.shuffle(inventory)
    return GlobalRandomOrder(seed=seed, label_order=tuple(inventory))


def _ranker(tree: SimplifiedGraph, order: LinearizationOrder, example_id: str):
    if isinstance(order, HumanOrder):
        return None
    if isinstance(order, GlobalRandomOrder):
        return order.rank
    labels = sorted(set(tree.edge_labels()))
    rng = random.Random(f"{order.seed}:{example_id}")
    rng.shuffle(labels)
    ranks = {label: i for i, label in enumerate(labels)}
    return lambda label: (0, ranks[label]) if label in ranks else (1, label)


def linearize(
    tree: SimplifiedGraph,
    order: LinearizationOrder = HumanOrder(),
    example_id: str = "",
    scope_markers: bool = True,
) -> TokenSequence:
    """Render a simplified tree as a token sequence.

    ``example_id`` feeds the per-example permutation of :class:`RandomOrder`
    and is ignored otherwise. ``scope_markers=False`` drops the parentheses
    (the scope-ablation rendering).
    """
    rank = _ranker(tree, order, example_id)

    def render(node: SimplifiedGraph, out: list[str], inside_scope: bool) -> None:
        out.append(node.concept)
        children = node.children
        if rank is not None:
            children = sorted(children, key=lambda item: rank(item[0]))
        bracket = scope_markers and (
            len(children) >= 2 or (inside_scope and len(children) == 1)
        )
        if bracket:
            out.append(OPEN)
        for label, child in children:
            out.append(label)
            render(child, out, inside_scope or bracket)
        if bracket:
            out.append(CLOSE)

    out: list[str] = []
    render(tree, out, False)
    return out


@dataclass
class RepairReport:
    """What :func:`delinearize` had to fix; empty for well-formed input."""

    actions: list[str] = field(default_factory=list)

    def note(self, action: str) -> None:
        self.actions.append(action)

    @property
    def ok(self) -> bool:
        return not self.actions

    def __len__(self) -> int:
        return len(self.actions)


def _kind(token: str) -> str:
    if token == OPEN:
        return "open"
    if token == CLOSE:
        return "close"
    if token.startswith(":") and len(token) > 1:
        return "edge"
    return "concept"


def delinearize(seq: Iterable[str]) -> tuple[SimplifiedGraph, RepairReport]:
    """Read a token sequence back into a tree, repairing malformed input.

    Repair policy: unclosed scopes are closed at end of input; stray
    parentheses are dropped; an edge with no following concept gets the
    placeholder concept; a concept where an edge was expected attaches via
    ``:mod``. Never rejects -- model output must always yield a tree.
    """
    toks = list(seq)
    report = RepairReport()
    n = len(toks)
    pos = 0

    def parse_node(inside_scope: bool) -> SimplifiedGraph:
        nonlocal pos
        node = SimplifiedGraph(toks[pos])
        pos += 1
        if pos < n and toks[pos] == OPEN:
            pos += 1
            closed = False
            while pos < n:
                token = toks[pos]
                kind = _kind(token)
                if kind == "close":
                    pos += 1
                    closed = True
                    break
                if kind == "edge":
                    pos += 1
                    node.children.append((token, parse_child(True)))
                elif kind == "open":
                    report.note(f"dropped stray '(' at position {pos}")
                    pos += 1
                else:
                    report.note(f"attached bare concept {token!r} via :mod")
                    node.children.append((":mod", parse_node(True)))
            if not closed:
                report.note("inserted ')' at end of sequence")
        elif not inside_scope and pos < n and _kind(toks[pos]) == "edge":
            # Bare single-child chains occur only outside scopes; inside a
            # scope an edge always belongs to the scope's owner.
            token = toks[pos]
            pos += 1
            node.children.append((token, parse_child(False)))
        return node

    def parse_child(inside_scope: bool) -> SimplifiedGraph:
        nonlocal pos
        if pos < n and _kind(toks[pos]) == "concept":
            return parse_node(inside_scope)
        report.note(f"edge without a concept; inserted {PLACEHOLDER_CONCEPT!r}")
        return SimplifiedGraph(PLACEHOLDER_CONCEPT)

    if n == 0:
        report.note("empty sequence; produced placeholder root")
        return SimplifiedGraph(PLACEHOLDER_CONCEPT), report

    if _kind(toks[0]) == "concept":
        root = parse_node(False)
    else:
        report.note("sequence does not start with a concept; synthesized root")
        root = SimplifiedGraph(PLACEHOLDER_CONCEPT)

    while pos < n:
        token = toks[pos]
        kind = _kind(token)
        if kind == "edge":
            report.note(f"attached trailing edge {token!r} to the root")
            pos += 1
            root.children.append((token, parse_child(False)))
        elif kind == "concept":
            report.note(f"attached bare concept {token!r} via :mod")
            root.children.append((":mod", parse_node(False)))
        else:
            report.note(f"dropped stray {token!r} at position {pos}")
            pos += 1

    return root, report


def to_full_amr(tree: SimplifiedGraph) -> AmrGraph:
    """Assign fresh variables and instance relations to a simplified tree.

    Re-entrancy is not recoverable after simplification, so the result is
    tree shaped: identical sibling concepts become distinct variables.
    """
    nodes: list[Node] = []
    edges: list[Edge] = []
    used: set[str] = set()
    constants = 0

    def fresh_variable(concept: str) -> str:
        base = next((c.lower() for c in concept if c.isalpha()), "x")
        if base not in used:
            used.add(base)
            return base
        k = 2
        while f"{base}{k}" in used:
            k += 1
        used.add(f"{base}{k}")
        return f"{base}{k}"

    def build(node: SimplifiedGraph) -> str:
        nonlocal constants
        if node.is_leaf() and is_constant_token(node.concept):
            node_id = f"_c{constants}"
            constants += 1
            nodes.append(Node(id=node_id, concept=node.concept, is_constant=True))
            return node_id
        concept, sense = split_sense(node.concept)
        var = fresh_variable(concept)
        nodes.append(Node(id=var, concept=concept, sense=sense))
        for label, child in node.children:
            child_id = build(child)
            if label.endswith("-of") and len(label) > len(":-of"):
                edges.append(Edge(source=child_id, label=label[:-3], target=var, inverted=True))
            else:
                edges.append(Edge(source=var, label=label, target=child_id))
        return var

    root = build(tree)
    return AmrGraph(nodes=tuple(nodes), edges=tuple(edges), root=root)


def canonical_form(tree: SimplifiedGraph):
    """Order-insensitive structural key; equal keys mean the trees are
    isomorphic up to sibling order."""
    return (
        tree.concept,
        tuple(sorted((label, canonical_form(child)) for label, child in tree.children)),
    )


def count_scope_markers(seq: Iterable[str]) -> int:
    return sum(1 for t in seq if t in (OPEN, CLOSE))


def read_sequences(path) -> list[TokenSequence]:
    """Read a sequence file: one example per line, space-separated tokens."""
    with open(path, encoding="utf-8") as f:
        return [line.split() for line in f.read().splitlines()]


def write_sequences(path, sequences: Iterable[Iterable[str]]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for seq in sequences:
            f.write(" ".join(seq) + "\n")

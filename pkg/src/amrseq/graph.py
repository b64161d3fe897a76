"""AMR graph data model and Penman notation reader/writer.

An AMR is a rooted, labeled DAG. The textual Penman form is a tree whose
re-entrant nodes appear as bare variable mentions after their first
definition. Edges written with an ``-of`` suffix are stored in canonical
direction with ``inverted=True``, so the triple set is independent of how
the annotator chose to traverse the graph.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

Triple = tuple[str, str, str]

_SENSE_RE = re.compile(r"^(.*?)-(\d{2,})$")
_VARIABLE_RE = re.compile(r"^[a-z][0-9]*$")
_NUMBER_RE = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)$")


class PenmanParseError(ValueError):
    """Malformed Penman text; ``offset`` is the byte offset of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class UnbalancedParens(PenmanParseError):
    pass


class DuplicateVariableDefinition(PenmanParseError):
    pass


class UndefinedVariableReference(PenmanParseError):
    pass


class EmptyConcept(PenmanParseError):
    pass


@dataclass(frozen=True)
class Node:
    """A graph node: a variable with a concept, or a bare constant.

    Constants (numbers, quoted strings, polarity ``-``) carry their literal
    text in ``concept`` and get a synthetic id so the edge model stays
    uniform.
    """

    id: str
    concept: str
    sense: int | None = None
    is_constant: bool = False

    @property
    def concept_token(self) -> str:
        """Concept with its sense suffix re-attached, e.g. ``want-01``."""
        if self.sense is None:
            return self.concept
        return f"{self.concept}-{self.sense:02d}"


@dataclass(frozen=True)
class Edge:
    """A labeled edge in canonical direction.

    ``inverted`` records that the Penman text wrote this edge with an
    ``-of`` suffix, i.e. the textual parent is ``target`` and the textual
    child is ``source``.
    """

    source: str
    label: str
    target: str
    inverted: bool = False

    @property
    def written_label(self) -> str:
        return self.label + "-of" if self.inverted else self.label

    @property
    def written_source(self) -> str:
        return self.target if self.inverted else self.source

    @property
    def written_target(self) -> str:
        return self.source if self.inverted else self.target


@dataclass(frozen=True)
class AmrGraph:
    """Immutable rooted AMR graph.

    ``edges`` keeps the textual order of appearance, which is the
    human-authored child order and must survive round trips.
    ``metadata`` holds any ``#``-prefixed lines read alongside the graph,
    verbatim.
    """

    nodes: tuple[Node, ...]
    edges: tuple[Edge, ...]
    root: str
    metadata: tuple[str, ...] = ()

    def __post_init__(self):
        ids = [n.id for n in self.nodes]
        if len(ids) != len(set(ids)):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValueError(f"duplicate node ids: {dupes}")
        if self.root not in set(ids):
            raise ValueError(f"root {self.root!r} is not a node")

    def node(self, node_id: str) -> Node:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def node_map(self) -> dict[str, Node]:
        return {n.id: n for n in self.nodes}

    def written_children(self, node_id: str) -> list[Edge]:
        """Outgoing edges of ``node_id`` in the as-written tree, in order."""
        return [e for e in self.edges if e.written_source == node_id]

    def incoming(self, node_id: str) -> list[Edge]:
        return [e for e in self.edges if e.target == node_id]

    def variables(self) -> list[str]:
        return [n.id for n in self.nodes if not n.is_constant]

    def triples(self) -> set[Triple]:
        """Instance plus relation triples, inverse edges normalized.

        Relations are reported without the leading colon; constants appear
        as their literal text.
        """
        nodes = self.node_map()
        out: set[Triple] = set()
        for n in self.nodes:
            if not n.is_constant:
                out.add((n.id, "instance", n.concept_token))
        for e in self.edges:
            tgt = nodes[e.target]
            obj = tgt.concept if tgt.is_constant else tgt.id
            out.add((e.source, e.label.lstrip(":"), obj))
        return out

    def validate(self) -> None:
        """Check the structural invariants; raises ValueError on violation."""
        nodes = self.node_map()
        for n in self.nodes:
            if not n.is_constant and not n.concept:
                raise ValueError(f"node {n.id!r} has an empty concept")
        for e in self.edges:
            if e.source not in nodes or e.target not in nodes:
                raise ValueError(f"edge {e} references an unknown node")
            if not e.label.startswith(":"):
                raise ValueError(f"edge label {e.label!r} must start with ':'")
        # Every node reachable from the root along written edges.
        seen = {self.root}
        stack = [self.root]
        while stack:
            for e in self.written_children(stack.pop()):
                if e.written_target not in seen:
                    seen.add(e.written_target)
                    stack.append(e.written_target)
        missing = set(nodes) - seen
        if missing:
            raise ValueError(f"nodes unreachable from root: {sorted(missing)}")
        # Canonical direction must stay acyclic.
        color: dict[str, int] = {}

        def visit(u: str) -> None:
            color[u] = 1
            for e in self.edges:
                if e.source != u:
                    continue
                c = color.get(e.target, 0)
                if c == 1:
                    raise ValueError(f"directed cycle through {e.target!r}")
                if c == 0:
                    visit(e.target)
            color[u] = 2

        for nid in nodes:
            if color.get(nid, 0) == 0:
                visit(nid)

    def with_metadata(self, lines: tuple[str, ...]) -> "AmrGraph":
        return replace(self, metadata=lines)


def split_sense(token: str) -> tuple[str, int | None]:
    """Split ``want-01`` into (``want``, 1); tokens without a two-or-more
    digit suffix are senseless concepts."""
    m = _SENSE_RE.match(token)
    if m and m.group(1):
        return m.group(1), int(m.group(2))
    return token, None


def is_constant_token(token: str) -> bool:
    """True for literals that never take a variable: numbers, quoted
    strings, polarity and ``+``."""
    if token.startswith('"') and token.endswith('"') and len(token) >= 2:
        return True
    if token in ("-", "+"):
        return True
    return bool(_NUMBER_RE.match(token))


# --- tokenizer -------------------------------------------------------------

@dataclass(frozen=True)
class _Tok:
    kind: str  # "(", ")", "/", "atom", "string"
    text: str
    offset: int


def _tokenize(text: str) -> tuple[list[_Tok], list[str]]:
    toks: list[_Tok] = []
    comments: list[str] = []
    i = 0
    line_start = True
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line_start = True
            i += 1
            continue
        if c.isspace():
            i += 1
            continue
        if c == "#" and line_start:
            j = text.find("\n", i)
            j = n if j < 0 else j
            comments.append(text[i:j])
            i = j
            continue
        line_start = False
        if c in "()/":
            toks.append(_Tok(c, c, i))
            i += 1
            continue
        if c == '"':
            j = i + 1
            while j < n and text[j] != '"':
                if text[j] == "\\" and j + 1 < n:
                    j += 1
                j += 1
            if j >= n:
                raise PenmanParseError("unterminated string", i)
            toks.append(_Tok("string", text[i : j + 1], i))
            i = j + 1
            continue
        j = i
        while j < n and not text[j].isspace() and text[j] not in '()/"':
            j += 1
        toks.append(_Tok("atom", text[i:j], i))
        i = j
    return toks, comments


# --- parser ----------------------------------------------------------------

class _Parser:
    def __init__(self, toks: list[_Tok], text_len: int):
        self.toks = toks
        self.pos = 0
        self.end = text_len
        self.nodes: list[Node] = []
        self.edges: list[Edge] = []
        self.defined: set[str] = set()
        self.constants = 0
        # Variables defined anywhere in the text; allows forward references.
        self.all_defined: set[str] = set()
        for k, t in enumerate(toks):
            if (
                t.kind == "("
                and k + 2 < len(toks)
                and toks[k + 1].kind == "atom"
                and toks[k + 2].kind == "/"
            ):
                name = toks[k + 1].text
                if name in self.all_defined:
                    raise DuplicateVariableDefinition(
                        f"variable {name!r} defined twice", toks[k + 1].offset
                    )
                self.all_defined.add(name)

    def peek(self) -> _Tok | None:
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def take(self) -> _Tok | None:
        t = self.peek()
        if t is not None:
            self.pos += 1
        return t

    def parse(self) -> tuple[list[Node], list[Edge], str]:
        t = self.peek()
        if t is None:
            raise PenmanParseError("empty input", 0)
        if t.kind != "(":
            raise PenmanParseError("expected '('", t.offset)
        root = self.parse_node()
        extra = self.peek()
        if extra is not None:
            if extra.kind == ")":
                raise UnbalancedParens("unmatched ')'", extra.offset)
            raise PenmanParseError("trailing content after graph", extra.offset)
        return self.nodes, self.edges, root

    def parse_node(self) -> str:
        opener = self.take()
        assert opener is not None and opener.kind == "("
        var_tok = self.peek()
        if var_tok is None or var_tok.kind != "atom":
            off = var_tok.offset if var_tok else self.end
            raise PenmanParseError("expected a variable after '('", off)
        self.take()
        var = var_tok.text
        slash = self.peek()
        if slash is None or slash.kind != "/":
            off = slash.offset if slash else self.end
            raise EmptyConcept(f"variable {var!r} has no concept", off)
        self.take()
        concept_tok = self.peek()
        if concept_tok is None or concept_tok.kind not in ("atom", "string"):
            off = concept_tok.offset if concept_tok else self.end
            raise EmptyConcept(f"variable {var!r} has an empty concept", off)
        self.take()
        concept, sense = split_sense(concept_tok.text)
        if not concept:
            raise EmptyConcept(f"variable {var!r} has an empty concept", concept_tok.offset)
        self.defined.add(var)
        self.nodes.append(Node(id=var, concept=concept, sense=sense))

        while True:
            t = self.peek()
            if t is None:
                raise UnbalancedParens("missing ')'", self.end)
            if t.kind == ")":
                self.take()
                return var
            if t.kind != "atom" or not t.text.startswith(":"):
                raise PenmanParseError(f"expected a :role, got {t.text!r}", t.offset)
            self.take()
            role = t.text
            target_tok = self.peek()
            if target_tok is None:
                raise UnbalancedParens("missing ')'", self.end)
            if target_tok.kind == "(":
                child = self.parse_node()
                self.add_edge(var, role, child)
            elif target_tok.kind == "string":
                self.take()
                self.add_edge(var, role, self.new_constant(target_tok.text))
            elif target_tok.kind == "atom":
                self.take()
                text = target_tok.text
                if text in self.all_defined:
                    self.add_edge(var, role, text)
                elif is_constant_token(text):
                    self.add_edge(var, role, self.new_constant(text))
                elif _VARIABLE_RE.match(text):
                    raise UndefinedVariableReference(
                        f"variable {text!r} is never defined", target_tok.offset
                    )
                else:
                    # Unquoted word constant (e.g. :mode imperative).
                    self.add_edge(var, role, self.new_constant(text))
            else:
                raise PenmanParseError(
                    f"expected an edge target, got {target_tok.text!r}", target_tok.offset
                )

    def new_constant(self, literal: str) -> str:
        node_id = f"_c{self.constants}"
        self.constants += 1
        self.nodes.append(Node(id=node_id, concept=literal, is_constant=True))
        return node_id

    def add_edge(self, written_source: str, role: str, written_target: str) -> None:
        if role.endswith("-of") and len(role) > len(":-of"):
            self.edges.append(
                Edge(source=written_target, label=role[:-3], target=written_source, inverted=True)
            )
        else:
            self.edges.append(Edge(source=written_source, label=role, target=written_target))


def parse_penman(text: str) -> AmrGraph:
    """Parse a single Penman expression into an :class:`AmrGraph`.

    ``#``-prefixed lines are treated as metadata and preserved on the
    returned graph. Errors carry the byte offset of the offending token.
    """
    toks, comments = _tokenize(text)
    parser = _Parser(toks, len(text))
    nodes, edges, root = parser.parse()
    return AmrGraph(nodes=tuple(nodes), edges=tuple(edges), root=root, metadata=tuple(comments))


def serialize_penman(graph: AmrGraph, indent: int = 4) -> str:
    """Render a graph back to Penman text.

    The first visit of a node (following edge order) defines it; later
    visits emit the bare variable. Reparsing the output yields an
    identical triple set.
    """
    nodes = graph.node_map()
    visited: set[str] = set()

    def render(node_id: str, depth: int) -> str:
        node = nodes[node_id]
        if node.is_constant:
            return node.concept
        if node_id in visited:
            return node_id
        visited.add(node_id)
        parts = [f"({node_id} / {node.concept_token}"]
        pad = " " * (depth + indent)
        for e in graph.written_children(node_id):
            parts.append(f"\n{pad}{e.written_label} {render(e.written_target, depth + indent)}")
        parts.append(")")
        return "".join(parts)

    return render(graph.root, 0)


def triples(graph: AmrGraph) -> set[Triple]:
    """Triple set of a graph; see :meth:`AmrGraph.triples`."""
    return graph.triples()


def read_amr_file(path) -> list[AmrGraph]:
    """Read a multi-graph Penman file: graphs separated by blank lines,
    ``#`` metadata attached to the following graph."""
    with open(path, encoding="utf-8") as f:
        content = f.read()
    graphs = []
    for block in re.split(r"\n\s*\n", content):
        lines = [l for l in block.splitlines() if l.strip()]
        if not lines or all(l.lstrip().startswith("#") for l in lines):
            continue
        graphs.append(parse_penman(block))
    return graphs


def write_amr_file(path, graphs) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for i, g in enumerate(graphs):
            if i:
                f.write("\n")
            for line in g.metadata:
                f.write(line + "\n")
            f.write(serialize_penman(g) + "\n")

"""Graph simplification and the anonymization cascade.

The pipeline rewrites sentence/graph pairs in stages: strip variables and
instance slashes, replace named-entity and quantity subtrees with indexed
category tokens, replace date components with date tokens, optionally
collapse fine entity types into four coarse clusters, and mirror the
replacements on the sentence side through alignments. Every stage records
enough material to run the inverse direction (deanonymization and AMR
entity recovery).
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Iterator

from .graph import AmrGraph

NE = "NE"
DATE = "DATE"
NUMBER = "NUMBER"

MODES = ("parsing", "generation")
COARSE_TYPES = ("person", "location", "organization", "misc")

# Date anonymization categories. The *-name/-number split mirrors whether
# the value is a word or a numeral.
DATE_CATEGORIES = ("year", "month-number", "month-name", "day-number", "day-name")
DATE_FORMATS = ("YYYYMMDD", "YYMMDD", "YYYY-MM-DD")

_ANON_TOKEN_RE = re.compile(r"^(.+)_(\d+)$")
_NUMERIC_RE = re.compile(r"^\d+$")
_WORD_RE = re.compile(r"^[A-Za-z][A-Za-z-]*$")


class MalformedDateEntity(ValueError):
    pass


class OverlappingSpans(ValueError):
    pass


@dataclass
class SimplifiedGraph:
    """A node of a simplified AMR tree; the root node stands for the tree.

    No variables, no instance-of slashes. Re-entrant mentions appear as
    plain concept copies. Children keep the human-authored order.
    """

    concept: str
    children: list[tuple[str, "SimplifiedGraph"]] = field(default_factory=list)

    def is_leaf(self) -> bool:
        return not self.children

    def copy(self) -> "SimplifiedGraph":
        return SimplifiedGraph(self.concept, [(l, c.copy()) for l, c in self.children])

    def pre_order(self) -> Iterator[tuple[str, "SimplifiedGraph"]]:
        """Yield (path, node); paths are dotted child indices, root is ''."""
        stack = [("", self)]
        while stack:
            path, node = stack.pop()
            yield path, node
            for i in reversed(range(len(node.children))):
                _, child = node.children[i]
                stack.append((_child_path(path, i), child))

    def at(self, path: str) -> "SimplifiedGraph":
        node = self
        if path:
            for part in path.split("."):
                node = node.children[int(part)][1]
        return node

    def node_count(self) -> int:
        return sum(1 for _ in self.pre_order())

    def edge_labels(self) -> list[str]:
        out = []
        for _, node in self.pre_order():
            out.extend(label for label, _ in node.children)
        return out

    def to_dict(self) -> dict:
        return {
            "concept": self.concept,
            "children": [[l, c.to_dict()] for l, c in self.children],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SimplifiedGraph":
        return cls(
            data["concept"],
            [(l, cls.from_dict(c)) for l, c in data.get("children", [])],
        )


def _child_path(parent_path: str, index: int) -> str:
    return f"{parent_path}.{index}" if parent_path else str(index)


@dataclass
class AnonymizationRecord:
    """One replaced piece of graph material and how to restore it.

    ``index`` counts occurrences of the record's group within the example
    (dates count date-entity subtrees, so a date's components share an
    index). ``surface`` is the sentence span the token replaced, empty
    while unaligned. ``path``/``parent_path`` locate the replaced node in
    the simplified tree before anonymization.
    """

    token: str
    group: str
    index: int
    fine_type: str
    surface: str = ""
    subgraph: SimplifiedGraph | None = None
    path: str = ""
    parent_path: str = ""

    def to_dict(self) -> dict:
        return {
            "token": self.token,
            "group": self.group,
            "index": self.index,
            "fine_type": self.fine_type,
            "surface": self.surface,
            "subgraph": self.subgraph.to_dict() if self.subgraph else None,
            "path": self.path,
            "parent_path": self.parent_path,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AnonymizationRecord":
        sub = data.get("subgraph")
        return cls(
            token=data["token"],
            group=data["group"],
            index=data["index"],
            fine_type=data["fine_type"],
            surface=data.get("surface", ""),
            subgraph=SimplifiedGraph.from_dict(sub) if sub else None,
            path=data.get("path", ""),
            parent_path=data.get("parent_path", ""),
        )


class EntityTypeRegistry:
    """Fine-grained AMR entity types and their coarse NER cluster.

    The shipped table covers the common types; anything unknown clusters
    to ``misc``. ``*-entity`` heads other than ``date-entity`` count as
    entity types even when the file does not list them.
    """

    def __init__(self, mapping: dict[str, str]):
        self.mapping = {}
        for fine, coarse in mapping.items():
            self.mapping[fine] = coarse if coarse in COARSE_TYPES else "misc"

    def coarse(self, fine_type: str) -> str:
        return self.mapping.get(fine_type, "misc")

    def is_entity_type(self, concept: str) -> bool:
        if concept == "date-entity":
            return False
        return concept in self.mapping or concept.endswith("-entity")

    @classmethod
    def from_tsv(cls, path) -> "EntityTypeRegistry":
        mapping = {}
        with open(path, encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) != 2:
                    raise ValueError(f"registry line needs two tab-separated fields: {line!r}")
                mapping[parts[0]] = parts[1]
        return cls(mapping)

    @classmethod
    def default(cls) -> "EntityTypeRegistry":
        text = resources.files("amrseq").joinpath("data/entity_types.tsv").read_text("utf-8")
        mapping = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fine, coarse = line.split("\t")
            mapping[fine] = coarse
        return cls(mapping)

    def to_tsv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for fine in sorted(self.mapping):
                f.write(f"{fine}\t{self.mapping[fine]}\n")


@dataclass
class Alignment:
    path: str
    start: int
    end: int


class AlignmentSet:
    """Per-example alignments from tree paths to sentence token spans."""

    def __init__(self, spans: dict[str, list[Alignment]] | None = None):
        self.spans = spans or {}

    def for_example(self, example_id: str) -> list[Alignment]:
        return self.spans.get(example_id, [])

    def add(self, example_id: str, path: str, start: int, end: int) -> None:
        self.spans.setdefault(example_id, []).append(Alignment(path, start, end))

    @classmethod
    def load_jsonl(cls, path) -> "AlignmentSet":
        spans: dict[str, list[Alignment]] = {}
        with open(path, encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                spans[str(obj["id"])] = [
                    Alignment(a["path"], a["start"], a["end"]) for a in obj["alignments"]
                ]
        return cls(spans)

    def save_jsonl(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for example_id in self.spans:
                obj = {
                    "id": example_id,
                    "alignments": [
                        {"path": a.path, "start": a.start, "end": a.end}
                        for a in self.spans[example_id]
                    ],
                }
                f.write(json.dumps(obj, sort_keys=True) + "\n")


def load_ner_spans_jsonl(path) -> dict[str, list[tuple[tuple[int, int], str]]]:
    """NER spans file: one object per example, {id, spans:[{start, end,
    type}]}; types are the external tagger's coarse categories."""
    out: dict[str, list[tuple[tuple[int, int], str]]] = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            out[str(obj["id"])] = [
                ((s["start"], s["end"]), s["type"]) for s in obj["spans"]
            ]
    return out


class AnonymizationTable:
    """Corpus-level (fine type, entity name) -> surface realization counts.

    Lookup returns the most frequent realization; ties break to the
    lexicographically smallest so runs are reproducible.
    """

    def __init__(self):
        self.counts: dict[tuple[str, str], Counter] = {}
        self._reverse: dict[str, str] | None = None

    def observe(self, fine_type: str, name: str, surface: str, n: int = 1) -> None:
        if not surface:
            return
        self.counts.setdefault((fine_type, name), Counter())[surface] += n
        self._reverse = None

    def lookup(self, fine_type: str, name: str) -> str | None:
        surfaces = self.counts.get((fine_type, name))
        if not surfaces:
            return None
        return min(surfaces, key=lambda s: (-surfaces[s], s))

    def reverse_lookup(self, surface: str) -> str | None:
        """Fine type whose observed realizations include ``surface``."""
        if self._reverse is None:
            best: dict[str, tuple[int, str]] = {}
            for (fine_type, _name), surfaces in self.counts.items():
                for s, c in surfaces.items():
                    if s not in best or (-c, fine_type) < best[s]:
                        best[s] = (-c, fine_type)
            self._reverse = {s: ft for s, (_c, ft) in best.items()}
        return self._reverse.get(surface)

    def merge(self, other: "AnonymizationTable") -> None:
        for key, surfaces in other.counts.items():
            target = self.counts.setdefault(key, Counter())
            target.update(surfaces)
        self._reverse = None

    def observe_records(self, records: Iterable[AnonymizationRecord]) -> None:
        for rec in records:
            if not rec.surface or rec.group == DATE:
                continue
            name = entity_name(rec.subgraph) if rec.subgraph else rec.surface
            self.observe(rec.fine_type, name, rec.surface)

    def to_json(self) -> str:
        entries = []
        for (fine_type, name) in sorted(self.counts):
            surfaces = self.counts[(fine_type, name)]
            entries.append(
                {
                    "fine_type": fine_type,
                    "name": name,
                    "surfaces": {s: surfaces[s] for s in sorted(surfaces)},
                }
            )
        return json.dumps({"entries": entries}, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "AnonymizationTable":
        table = cls()
        for entry in json.loads(text)["entries"]:
            for surface, count in entry["surfaces"].items():
                table.observe(entry["fine_type"], entry["name"], surface, count)
        return table

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "AnonymizationTable":
        with open(path, encoding="utf-8") as f:
            return cls.from_json(f.read())


def entity_name(tree: SimplifiedGraph | None) -> str:
    """Entity name string from a subtree's :name ops, quotes stripped.

    Quantity subtrees have no :name; their :quant value stands in. Falls
    back to the head concept.
    """
    if tree is None:
        return ""
    for label, child in tree.children:
        if label == ":name":
            words = [_unquote(c.concept) for _, c in child.children if c.is_leaf()]
            if words:
                return " ".join(words)
    for label, child in tree.children:
        if label == ":quant" and child.is_leaf():
            return child.concept
    return tree.concept


def _unquote(text: str) -> str:
    if text.startswith('"') and text.endswith('"') and len(text) >= 2:
        return text[1:-1]
    return text


def _check_mode(mode: str) -> None:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")


def simplify_graph(graph: AmrGraph, mode: str = "parsing") -> SimplifiedGraph:
    """Drop variables and instance slashes; copy concepts over re-entrant
    mentions; strip senses in generation mode."""
    _check_mode(mode)
    nodes = graph.node_map()
    visited: set[str] = set()

    def concept_of(node_id: str) -> str:
        node = nodes[node_id]
        if node.is_constant:
            return node.concept
        return node.concept if mode == "generation" else node.concept_token

    def build(node_id: str) -> SimplifiedGraph:
        node = nodes[node_id]
        if node.is_constant or node_id in visited:
            return SimplifiedGraph(concept_of(node_id))
        visited.add(node_id)
        tree = SimplifiedGraph(concept_of(node_id))
        for edge in graph.written_children(node_id):
            tree.children.append((edge.written_label, build(edge.written_target)))
        return tree

    return build(graph.root)


def anonymize_graph(
    simplified: SimplifiedGraph, registry: EntityTypeRegistry
) -> tuple[SimplifiedGraph, list[AnonymizationRecord]]:
    """Replace entity subtrees (registered head + :name child) with NE
    tokens and ``*-quantity`` subtrees with NUMBER tokens.

    Date entities are left for :func:`anonymize_dates`. Tokens carry a
    per-group occurrence index assigned in pre-order.
    """
    records: list[AnonymizationRecord] = []
    counters = {NE: 0, NUMBER: 0}

    def walk(node: SimplifiedGraph, path: str) -> SimplifiedGraph:
        concept = node.concept
        has_name = any(label == ":name" for label, _ in node.children)
        if registry.is_entity_type(concept) and has_name:
            index = counters[NE]
            counters[NE] += 1
            token = f"{concept}_{index}"
            records.append(
                AnonymizationRecord(
                    token=token, group=NE, index=index, fine_type=concept,
                    subgraph=node.copy(), path=path,
                )
            )
            return SimplifiedGraph(token)
        if concept.endswith("-quantity") and len(concept) > len("-quantity"):
            index = counters[NUMBER]
            counters[NUMBER] += 1
            token = f"{concept}_{index}"
            records.append(
                AnonymizationRecord(
                    token=token, group=NUMBER, index=index, fine_type=concept,
                    subgraph=node.copy(), path=path,
                )
            )
            return SimplifiedGraph(token)
        return SimplifiedGraph(
            concept,
            [
                (label, walk(child, _child_path(path, i)))
                for i, (label, child) in enumerate(node.children)
            ],
        )

    return walk(simplified, ""), records


def _date_category(label: str, value: str) -> str:
    bare = _unquote(value)
    if label == ":year":
        if not _NUMERIC_RE.match(bare):
            raise MalformedDateEntity(f":year value {value!r} is not numeric")
        return "year"
    if label in (":month", ":day"):
        kind = label[1:]
        if _NUMERIC_RE.match(bare):
            return f"{kind}-number"
        if _WORD_RE.match(bare):
            return f"{kind}-name"
        raise MalformedDateEntity(f"{label} value {value!r} is neither numeric nor a name")
    if label == ":weekday":
        if _WORD_RE.match(bare):
            return "day-name"
        raise MalformedDateEntity(f":weekday value {value!r} is not a name")
    raise KeyError(label)


def anonymize_dates(
    simplified: SimplifiedGraph,
) -> tuple[SimplifiedGraph, list[AnonymizationRecord]]:
    """Replace year/month/day components of date-entity subtrees with date
    tokens; components of the i-th date-entity all carry index i."""
    records: list[AnonymizationRecord] = []
    counter = 0

    def walk(node: SimplifiedGraph, path: str) -> SimplifiedGraph:
        nonlocal counter
        if node.concept == "date-entity":
            index = counter
            counter += 1
            children: list[tuple[str, SimplifiedGraph]] = []
            for i, (label, child) in enumerate(node.children):
                if label in (":year", ":month", ":day", ":weekday") and child.is_leaf():
                    category = _date_category(label, child.concept)
                    token = f"{category}_{index}"
                    records.append(
                        AnonymizationRecord(
                            token=token, group=DATE, index=index, fine_type=category,
                            subgraph=child.copy(), path=_child_path(path, i),
                            parent_path=path,
                        )
                    )
                    children.append((label, SimplifiedGraph(token)))
                else:
                    children.append((label, walk(child, _child_path(path, i))))
            return SimplifiedGraph(node.concept, children)
        return SimplifiedGraph(
            node.concept,
            [
                (label, walk(child, _child_path(path, i)))
                for i, (label, child) in enumerate(node.children)
            ],
        )

    return walk(simplified, ""), records


def cluster_entities(
    simplified: SimplifiedGraph,
    records: list[AnonymizationRecord],
    registry: EntityTypeRegistry,
) -> SimplifiedGraph:
    """Rewrite NE tokens to their coarse cluster, re-indexing per cluster
    in traversal order. Records are updated in place so the sentence side
    stays consistent."""
    cluster_counters: dict[str, int] = {}
    renames: dict[str, str] = {}
    for rec in records:
        if rec.group != NE:
            continue
        cluster = registry.coarse(rec.fine_type)
        index = cluster_counters.get(cluster, 0)
        cluster_counters[cluster] = index + 1
        new_token = f"{cluster}_{index}"
        renames[rec.token] = new_token
        rec.token = new_token
        rec.index = index

    def walk(node: SimplifiedGraph) -> SimplifiedGraph:
        concept = renames.get(node.concept, node.concept)
        return SimplifiedGraph(concept, [(l, walk(c)) for l, c in node.children])

    return walk(simplified)


def _check_spans(alignments: list[Alignment], sentence_len: int) -> None:
    spans = sorted((a.start, a.end) for a in alignments)
    prev_end = 0
    for start, end in spans:
        if start < 0 or end > sentence_len or start >= end:
            raise OverlappingSpans(f"span [{start}, {end}) out of bounds or empty")
        if start < prev_end:
            raise OverlappingSpans(f"span [{start}, {end}) overlaps a previous span")
        prev_end = end


def _date_format_of(token: str) -> str | None:
    if re.match(r"^\d{8}$", token):
        return "YYYYMMDD"
    if re.match(r"^\d{6}$", token):
        return "YYMMDD"
    if re.match(r"^\d{4}-\d{2}-\d{2}$", token):
        return "YYYY-MM-DD"
    return None


def anonymize_sentence(
    sentence: list[str],
    alignments: list[Alignment],
    records: list[AnonymizationRecord],
) -> list[str]:
    """Replace aligned spans with the anonymization tokens of the paired
    graph; sets ``record.surface`` to the replaced text.

    Alignments may point at any node inside a replaced subtree (aligners
    typically target name ops or quantity values); they resolve to the
    record with the longest matching path prefix. A span aligned to a
    whole date-entity is replaced with a date format marker when its
    single token matches one of the recognized numeric formats; the
    marker is appended to ``records``. Records that find no alignment
    keep an empty surface (the unaligned flag).
    """
    _check_spans(alignments, len(sentence))
    by_path: dict[str, AnonymizationRecord] = {r.path: r for r in records if r.path}
    date_parents: dict[str, list[AnonymizationRecord]] = {}
    for r in records:
        if r.group == DATE and r.parent_path:
            date_parents.setdefault(r.parent_path, []).append(r)

    def resolve(path: str) -> AnonymizationRecord | None:
        while True:
            rec = by_path.get(path)
            if rec is not None:
                return rec
            if "." not in path:
                return None
            path = path.rsplit(".", 1)[0]

    replacements: list[tuple[int, int, list[str]]] = []
    marker_records: list[AnonymizationRecord] = []
    for alignment in sorted(alignments, key=lambda a: a.start):
        surface_tokens = sentence[alignment.start : alignment.end]
        surface = " ".join(surface_tokens)
        rec = resolve(alignment.path)
        if rec is not None:
            if not rec.surface:
                rec.surface = surface
            replacements.append((alignment.start, alignment.end, [rec.token]))
            continue
        components = date_parents.get(alignment.path)
        if components:
            fmt = _date_format_of(surface_tokens[0]) if len(surface_tokens) == 1 else None
            if fmt is None:
                # Whole-date span with no recognized format: leave the text.
                continue
            index = components[0].index
            marker = AnonymizationRecord(
                token=f"{fmt}_{index}", group=DATE, index=index, fine_type=fmt,
                surface=surface, parent_path=alignment.path,
            )
            marker_records.append(marker)
            replacements.append((alignment.start, alignment.end, [marker.token]))

    records.extend(marker_records)
    out: list[str] = []
    cursor = 0
    for start, end, tokens in replacements:
        out.extend(sentence[cursor:start])
        out.extend(tokens)
        cursor = end
    out.extend(sentence[cursor:])
    return out


def _render_date(fmt: str, components: dict[str, str]) -> str:
    year = int(components.get("year", "1"))
    month = int(components.get("month-number", "1"))
    day = int(components.get("day-number", "1"))
    if fmt == "YYYYMMDD":
        return f"{year:04d}{month:02d}{day:02d}"
    if fmt == "YYMMDD":
        return f"{year % 100:02d}{month:02d}{day:02d}"
    return f"{year:04d}-{month:02d}-{day:02d}"


def deanonymize_output(
    tokens: list[str],
    records: list[AnonymizationRecord],
    table: AnonymizationTable,
) -> tuple[list[str], list[str]]:
    """Replace anonymization tokens in generated text with surface words.

    Entity tokens take the table's most frequent realization for the
    entity name, falling back to the name copied from the stored subgraph.
    Date tokens render their recorded value. Returns the token list and a
    list of flags for tokens that looked anonymized but had no record;
    those stay verbatim (generation always emits text).
    """
    by_token: dict[str, AnonymizationRecord] = {r.token: r for r in records}
    date_components: dict[int, dict[str, str]] = {}
    for r in records:
        if r.group == DATE and r.subgraph is not None:
            date_components.setdefault(r.index, {})[r.fine_type] = _unquote(r.subgraph.concept)

    out: list[str] = []
    flags: list[str] = []
    for token in tokens:
        rec = by_token.get(token)
        if rec is None:
            if _ANON_TOKEN_RE.match(token):
                flags.append(f"no record for token {token!r}")
            out.append(token)
            continue
        if rec.group in (NE, NUMBER):
            name = entity_name(rec.subgraph) if rec.subgraph else ""
            realization = table.lookup(rec.fine_type, name) if name else None
            if realization is None:
                realization = name or rec.surface
            if realization:
                out.extend(realization.split())
            else:
                flags.append(f"no realization for token {token!r}")
                out.append(token)
        else:  # DATE
            if rec.fine_type in DATE_FORMATS:
                if rec.surface:
                    out.extend(rec.surface.split())
                else:
                    out.append(_render_date(rec.fine_type, date_components.get(rec.index, {})))
            elif rec.surface:
                out.extend(rec.surface.split())
            elif rec.subgraph is not None:
                out.append(_unquote(rec.subgraph.concept))
            else:
                flags.append(f"no value for token {token!r}")
                out.append(token)
    return out, flags


def ner_normalize(
    sentence: list[str],
    ner_spans: list[tuple[tuple[int, int], str]],
    table: AnonymizationTable,
) -> tuple[list[str], list[AnonymizationRecord]]:
    """Anonymize a raw sentence for parsing using external NER spans.

    Each span becomes a fine-grained category token when its text was
    observed in training alignments, else the NER system's coarse
    category. Emits records so the parsed AMR can be recovered."""
    alignments = [Alignment("", s, e) for (s, e), _ in ner_spans]
    _check_spans(alignments, len(sentence))

    out: list[str] = []
    records: list[AnonymizationRecord] = []
    cursor = 0
    index = 0
    for (start, end), coarse in sorted(ner_spans, key=lambda item: item[0][0]):
        surface = " ".join(sentence[start:end])
        fine = table.reverse_lookup(surface)
        category = fine or coarse
        token = f"{category}_{index}"
        records.append(
            AnonymizationRecord(
                token=token, group=NE, index=index, fine_type=category, surface=surface,
            )
        )
        index += 1
        out.extend(sentence[cursor:start])
        out.append(token)
        cursor = end
    out.extend(sentence[cursor:])
    return out, records


def _name_subtree(surface: str) -> SimplifiedGraph:
    ops = [
        (f":op{i + 1}", SimplifiedGraph(f'"{word}"'))
        for i, word in enumerate(surface.split())
    ]
    return SimplifiedGraph("name", ops)


def recover_amr_entities(
    parsed: SimplifiedGraph, records: list[AnonymizationRecord]
) -> SimplifiedGraph:
    """Expand anonymization tokens in a parsed tree back into AMR material.

    Entity tokens grow back their stored subtree with :name ops re-split
    from the aligned surface span (or a minimal entity subtree when only
    the surface is known). Date and quantity tokens restore the stored
    values. Tokens without a record stay behind as plain concepts.
    """
    by_token = {r.token: r for r in records}

    def expand(rec: AnonymizationRecord) -> SimplifiedGraph | None:
        if rec.group == NE:
            if rec.subgraph is not None:
                tree = rec.subgraph.copy()
                if rec.surface:
                    tree.children = [
                        (label, _name_subtree(rec.surface) if label == ":name" else child)
                        for label, child in tree.children
                    ]
                return tree
            if rec.surface:
                return SimplifiedGraph(rec.fine_type, [(":name", _name_subtree(rec.surface))])
            return None
        if rec.subgraph is not None:
            return rec.subgraph.copy()
        return None

    def walk(node: SimplifiedGraph) -> SimplifiedGraph:
        rec = by_token.get(node.concept)
        if rec is not None and node.is_leaf():
            grown = expand(rec)
            if grown is not None:
                return grown
        return SimplifiedGraph(node.concept, [(l, walk(c)) for l, c in node.children])

    return walk(parsed)


def preprocess_graph(
    graph: AmrGraph,
    registry: EntityTypeRegistry,
    mode: str = "generation",
    anonymize: bool = True,
    ne_clusters: bool = True,
) -> tuple[SimplifiedGraph, list[AnonymizationRecord]]:
    """Run the graph-side cascade: simplify, anonymize entities and dates,
    and (generation only) cluster entity types."""
    _check_mode(mode)
    tree = simplify_graph(graph, mode)
    if not anonymize:
        return tree, []
    tree, records = anonymize_graph(tree, registry)
    tree, date_records = anonymize_dates(tree)
    records.extend(date_records)
    if mode == "generation" and ne_clusters:
        tree = cluster_entities(tree, records, registry)
    return tree, records


def save_records_jsonl(path, per_example: list[tuple[str, list[AnonymizationRecord]]]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for example_id, records in per_example:
            obj = {"id": example_id, "records": [r.to_dict() for r in records]}
            f.write(json.dumps(obj, sort_keys=True) + "\n")


def load_records_jsonl(path) -> list[tuple[str, list[AnonymizationRecord]]]:
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            out.append(
                (str(obj["id"]), [AnonymizationRecord.from_dict(r) for r in obj["records"]])
            )
    return out

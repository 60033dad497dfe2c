"""Mermaid flowchart core: parse, serialize, sanitize, validate, normalize.

The supported grammar subset is a header line (``flowchart <DIR>``, with
``graph`` accepted as an alias), node declarations like ``A[Start]``, and
edge statements like ``A -->|Yes| B``.  Chained edges (``A --> B --> C``)
are split pairwise.  ``%%`` comment lines are ignored, ``style``/
``classDef``/``class``/``linkStyle`` lines are tolerated and discarded,
and subgraphs are rejected.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional


class Direction(Enum):
    TD = "TD"
    LR = "LR"
    RL = "RL"
    BT = "BT"


# TB is an alias of TD and collapses at parse time.
_DIRECTION_ALIASES = {"TD": Direction.TD, "TB": Direction.TD,
                      "LR": Direction.LR, "RL": Direction.RL, "BT": Direction.BT}


class NodeShape(Enum):
    PROCESS = "process"
    DECISION = "decision"
    ROUNDED = "rounded"
    IO = "io"
    DATABASE = "database"
    CIRCLE = "circle"


# Opener/closer delimiter pairs per shape.  Multi-character openers must be
# tried before their single-character prefixes when scanning.
_SHAPE_DELIMS: dict[NodeShape, tuple[str, str]] = {
    NodeShape.DATABASE: ("[(", ")]"),
    NodeShape.IO: ("[/", "/]"),
    NodeShape.CIRCLE: ("((", "))"),
    NodeShape.PROCESS: ("[", "]"),
    NodeShape.DECISION: ("{", "}"),
    NodeShape.ROUNDED: ("(", ")"),
}

_OPENERS = [(open_, shape) for shape, (open_, _) in _SHAPE_DELIMS.items()]
_OPENERS.sort(key=lambda item: -len(item[0]))


class EdgeStyle(Enum):
    SOLID = "-->"
    OPEN = "---"
    DOTTED = "-.->"
    THICK = "==>"


_ARROWS = sorted((style.value for style in EdgeStyle), key=len, reverse=True)
_ARROW_TO_STYLE = {style.value: style for style in EdgeStyle}

_ID_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_HEADER_KEYWORDS = ("flowchart", "graph")
_DISCARDED_KEYWORDS = ("style", "classDef", "class", "linkStyle")


class MermaidSyntaxError(Exception):
    """Parse failure with 1-based line/column position.

    ``missing_delimiter`` carries the expected closing delimiter when the
    failure was an unclosed node shape, so the repair ladder can close it.
    """

    def __init__(self, message: str, line: int, column: int,
                 missing_delimiter: str | None = None):
        super().__init__(f"line {line}, column {column}: {message}")
        self.message = message
        self.line = line
        self.column = column
        self.missing_delimiter = missing_delimiter


class EmptyOutput(Exception):
    """Raised when sanitizing model output leaves no candidate Mermaid code."""


@dataclass(frozen=True)
class NodeSpec:
    id: str
    label: str
    shape: NodeShape


@dataclass(frozen=True)
class EdgeSpec:
    source: str
    target: str
    label: Optional[str] = None
    style: EdgeStyle = EdgeStyle.SOLID


@dataclass(frozen=True)
class FlowGraph:
    """Parsed flowchart: direction plus ordered nodes and edges.

    Node and edge order is first-appearance order, which makes
    serialization deterministic.  Instances are immutable; all edits
    construct new graphs.
    """

    direction: Direction
    nodes: tuple[NodeSpec, ...]
    edges: tuple[EdgeSpec, ...]

    def __post_init__(self):
        if not self.nodes:
            raise ValueError("a flowchart must contain at least one node")
        ids = set()
        for node in self.nodes:
            if not _ID_RE.fullmatch(node.id):
                raise ValueError(f"invalid node id {node.id!r}")
            if node.id in ids:
                raise ValueError(f"duplicate node id {node.id!r}")
            ids.add(node.id)
            if not node.label.strip():
                raise ValueError(f"node {node.id!r} has an empty label")
            _check_label_fits_shape(node)
        for edge in self.edges:
            if edge.source not in ids or edge.target not in ids:
                raise ValueError(
                    f"edge {edge.source!r} -> {edge.target!r} references an undeclared node")
            if edge.label is not None:
                if not edge.label.strip():
                    raise ValueError("edge labels must be non-empty")
                if "|" in edge.label or "\n" in edge.label:
                    raise ValueError(f"edge label {edge.label!r} is not representable")

    def node_ids(self) -> tuple[str, ...]:
        return tuple(node.id for node in self.nodes)

    def node(self, node_id: str) -> NodeSpec:
        for node in self.nodes:
            if node.id == node_id:
                return node
        raise KeyError(node_id)


@dataclass(frozen=True)
class NormalizedGraph:
    """ID-agnostic view of a graph: normalized label set plus label-pair edges.

    This is the unit of all metric comparison; node ids, shapes, arrow
    styles, edge labels, casing, redundant whitespace, and surrounding
    quotes are all erased.
    """

    node_labels: frozenset[str]
    edges: frozenset[tuple[str, str]]


class Tier(Enum):
    VALID = "valid"
    REPAIRED = "repaired"
    INVALID = "invalid"


@dataclass(frozen=True)
class SyntaxReport:
    """Validation outcome: the tier plus the parseable source when one exists.

    ``text`` is the input unchanged for VALID, the repaired source for
    REPAIRED, and None for INVALID.  ``repair`` describes the single
    applied repair; the ``error_*`` fields locate the original failure.
    """

    tier: Tier
    text: Optional[str] = None
    graph: Optional[FlowGraph] = field(default=None, repr=False)
    repair: Optional[str] = None
    error_line: Optional[int] = None
    error_column: Optional[int] = None
    error_message: Optional[str] = None


def _check_label_fits_shape(node: NodeSpec) -> None:
    """Reject labels that cannot round-trip through this shape's delimiters."""
    if "\n" in node.label:
        raise ValueError(f"node {node.id!r}: labels must be single-line")
    opener, closer = _SHAPE_DELIMS[node.shape]
    body = node.label + closer
    if body.find(closer) != len(node.label):
        raise ValueError(
            f"node {node.id!r}: label {node.label!r} is not representable inside "
            f"{opener}...{closer}")
    # The rendered body must scan back to the same shape (a label starting
    # with '(' inside '[...]' would masquerade as a database node).
    for candidate_open, candidate_shape in _OPENERS:
        if (opener + node.label).startswith(candidate_open):
            if candidate_shape is not node.shape:
                raise ValueError(
                    f"node {node.id!r}: label {node.label!r} is ambiguous inside "
                    f"{opener}...{closer}")
            break


class _LineScanner:
    """Cursor over one statement segment; tracks 1-based columns for errors.

    ``offset`` is the segment's starting column within its physical line,
    so reported columns always refer to the full line.
    """

    def __init__(self, text: str, line_no: int, offset: int = 0):
        self.text = text
        self.line_no = line_no
        self.offset = offset
        self.pos = 0

    def error(self, message: str, column: int | None = None,
              missing_delimiter: str | None = None) -> MermaidSyntaxError:
        col = (self.pos if column is None else column) + self.offset + 1
        return MermaidSyntaxError(message, self.line_no, col,
                                  missing_delimiter=missing_delimiter)

    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos] in " \t":
            self.pos += 1

    def at_end(self) -> bool:
        return self.pos >= len(self.text)

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def try_consume(self, token: str) -> bool:
        if self.text.startswith(token, self.pos):
            self.pos += len(token)
            return True
        return False

    def match_id(self) -> str | None:
        m = _ID_RE.match(self.text, self.pos)
        if m:
            self.pos = m.end()
            return m.group(0)
        return None

    def match_shape_body(self) -> tuple[NodeShape, str] | None:
        """Consume ``[label]`` / ``{label}`` / ... starting at the cursor."""
        for opener, shape in _OPENERS:
            if not self.text.startswith(opener, self.pos):
                continue
            start = self.pos
            closer = _SHAPE_DELIMS[shape][1]
            end = self.text.find(closer, self.pos + len(opener))
            if end < 0:
                raise self.error(f"unclosed {opener!r}", column=start,
                                 missing_delimiter=closer)
            label = self.text[self.pos + len(opener):end].strip()
            if not label:
                raise self.error("empty node label", column=start)
            self.pos = end + len(closer)
            return shape, label
        return None

    def match_arrow(self) -> EdgeStyle | None:
        for arrow in _ARROWS:
            if self.text.startswith(arrow, self.pos):
                self.pos += len(arrow)
                return _ARROW_TO_STYLE[arrow]
        return None

    def match_edge_label(self) -> str | None:
        if not self.try_consume("|"):
            return None
        start = self.pos
        end = self.text.find("|", self.pos)
        if end < 0:
            raise self.error("unclosed edge label", column=start - 1)
        label = self.text[start:end].strip()
        if not label:
            raise self.error("empty edge label", column=start - 1)
        self.pos = end + 1
        return label


class _Parser:
    def __init__(self):
        self.direction: Direction | None = None
        self.order: list[str] = []
        self.nodes: dict[str, NodeSpec] = {}
        self.explicit: set[str] = set()
        self.edges: list[EdgeSpec] = []
        self.saw_header = False

    def declare(self, scanner: _LineScanner, node_id: str, start_col: int,
                shape: NodeShape | None, label: str | None) -> None:
        if node_id not in self.nodes:
            self.order.append(node_id)
            if shape is None:
                self.nodes[node_id] = NodeSpec(node_id, node_id, NodeShape.PROCESS)
            else:
                self.nodes[node_id] = NodeSpec(node_id, label, shape)
                self.explicit.add(node_id)
            return
        if shape is None:
            return
        current = self.nodes[node_id]
        if node_id not in self.explicit:
            # Bare reference gets refined by a later explicit declaration.
            self.nodes[node_id] = NodeSpec(node_id, label, shape)
            self.explicit.add(node_id)
        elif current.shape is not shape or current.label != label:
            raise scanner.error(
                f"conflicting redeclaration of node {node_id!r}", column=start_col)

    def parse_header(self, scanner: _LineScanner) -> None:
        scanner.skip_ws()
        keyword = scanner.match_id()
        if keyword not in _HEADER_KEYWORDS:
            raise scanner.error("expected 'flowchart' or 'graph' header",
                                column=scanner.pos if keyword is None else 0)
        scanner.skip_ws()
        rest = scanner.text[scanner.pos:]
        dir_match = re.match(r"(TD|TB|LR|RL|BT)\b", rest)
        if dir_match:
            self.direction = _DIRECTION_ALIASES[dir_match.group(1)]
            scanner.pos += dir_match.end()
        else:
            self.direction = Direction.TD
        scanner.skip_ws()
        if not scanner.at_end():
            raise scanner.error(f"unexpected text after header: {scanner.text[scanner.pos:]!r}")
        self.saw_header = True

    def parse_statement(self, scanner: _LineScanner) -> None:
        node_id = self.parse_node_ref(scanner)
        while True:
            scanner.skip_ws()
            if scanner.at_end() or scanner.peek() == ";":
                return
            start = scanner.pos
            style = scanner.match_arrow()
            if style is None:
                raise scanner.error(
                    f"expected an edge arrow, found {scanner.text[scanner.pos:]!r}",
                    column=start)
            scanner.skip_ws()
            label = scanner.match_edge_label()
            scanner.skip_ws()
            target = self.parse_node_ref(scanner)
            self.edges.append(EdgeSpec(node_id, target, label, style))
            node_id = target

    def parse_node_ref(self, scanner: _LineScanner) -> str:
        scanner.skip_ws()
        start = scanner.pos
        node_id = scanner.match_id()
        if node_id is None:
            found = scanner.text[scanner.pos:] or "end of line"
            raise scanner.error(f"expected a node, found {found!r}")
        body = scanner.match_shape_body()
        if body is None:
            self.declare(scanner, node_id, start, None, None)
        else:
            shape, label = body
            self.declare(scanner, node_id, start, shape, label)
        return node_id


def _split_statements(line: str) -> list[tuple[int, str]]:
    """Split a line on top-level ``;`` (outside shape bodies and edge labels).

    Returns (column offset, segment) pairs so errors keep real columns.
    """
    segments: list[tuple[int, str]] = []
    depth_closer: list[str] = []
    start = 0
    i = 0
    while i < len(line):
        if depth_closer:
            closer = depth_closer[-1]
            if line.startswith(closer, i):
                depth_closer.pop()
                i += len(closer)
                continue
            i += 1
            continue
        matched_open = False
        for opener, shape in _OPENERS:
            if line.startswith(opener, i):
                depth_closer.append(_SHAPE_DELIMS[shape][1])
                i += len(opener)
                matched_open = True
                break
        if matched_open:
            continue
        if line[i] == "|":
            end = line.find("|", i + 1)
            i = len(line) if end < 0 else end + 1
            continue
        if line[i] == ";":
            segments.append((start, line[start:i]))
            start = i + 1
        i += 1
    segments.append((start, line[start:]))
    return segments


def parse_flowchart(text: str) -> FlowGraph:
    """Parse Mermaid source into a FlowGraph.

    Nodes referenced only inside edge statements are created with their
    inline shape and label, or as a Process node labeled with the id when
    bare.  Raises MermaidSyntaxError for anything outside the supported
    subset.
    """
    if not text or not text.strip():
        raise MermaidSyntaxError("empty source", 1, 1)
    parser = _Parser()
    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.rstrip("\r")
        stripped = line.strip()
        if not stripped or stripped.startswith("%%"):
            continue
        first_word = stripped.split(None, 1)[0]
        if parser.saw_header:
            if first_word in _DISCARDED_KEYWORDS:
                continue
            if first_word in ("subgraph", "end"):
                raise MermaidSyntaxError("subgraphs are not supported", line_no,
                                         line.index(first_word) + 1)
        for offset, segment in _split_statements(line):
            if not segment.strip():
                continue
            scanner = _LineScanner(segment, line_no, offset)
            if not parser.saw_header:
                parser.parse_header(scanner)
            else:
                parser.parse_statement(scanner)
                scanner.skip_ws()
                if not scanner.at_end() and scanner.peek() != ";":
                    raise scanner.error(
                        f"unexpected trailing text {scanner.text[scanner.pos:]!r}")
    if not parser.saw_header:
        raise MermaidSyntaxError("expected 'flowchart' or 'graph' header", 1, 1)
    if not parser.nodes:
        raise MermaidSyntaxError("flowchart declares no nodes", 1, 1)
    try:
        return FlowGraph(
            direction=parser.direction or Direction.TD,
            nodes=tuple(parser.nodes[node_id] for node_id in parser.order),
            edges=tuple(parser.edges),
        )
    except ValueError as exc:
        # e.g. a label that cannot round-trip through its shape delimiters
        raise MermaidSyntaxError(str(exc), 1, 1) from exc


def serialize(graph: FlowGraph) -> str:
    """Render the canonical form: header, node declarations, then edges.

    Output is byte-deterministic for equal graphs and uses LF line
    endings with no trailing newline.
    """
    lines = [f"flowchart {graph.direction.value}"]
    for node in graph.nodes:
        opener, closer = _SHAPE_DELIMS[node.shape]
        lines.append(f"{node.id}{opener}{node.label}{closer}")
    for edge in graph.edges:
        arrow = edge.style.value
        if edge.label is None:
            lines.append(f"{edge.source} {arrow} {edge.target}")
        else:
            lines.append(f"{edge.source} {arrow}|{edge.label}| {edge.target}")
    return "\n".join(lines)


_FENCE_RE = re.compile(r"^```")
_ARROW_HINT_RE = re.compile(r"-->|---|-\.->|==>")
_NODE_HINT_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*\s*[\[({]")
_HEADER_LINE_RE = re.compile(
    r"^(flowchart|graph)\b\s*(TD|TB|LR|RL|BT)?\s*(.*)$", re.IGNORECASE)


def _fenced_blocks(lines: list[str]) -> list[list[str]]:
    blocks: list[list[str]] = []
    current: list[str] | None = None
    for line in lines:
        if _FENCE_RE.match(line.strip()):
            if current is None:
                current = []
            else:
                blocks.append(current)
                current = None
            continue
        if current is not None:
            current.append(line)
    if current:
        blocks.append(current)  # tolerate an unterminated final fence
    return blocks


def _find_header(lines: list[str]) -> int | None:
    for i, line in enumerate(lines):
        stripped = line.strip()
        if not stripped:
            continue
        token = stripped.split(None, 1)[0].rstrip(";").lower()
        if token in _HEADER_KEYWORDS:
            return i
    return None


def _looks_like_mermaid(lines: list[str]) -> bool:
    for line in lines:
        stripped = line.strip()
        if _ARROW_HINT_RE.search(stripped) or _NODE_HINT_RE.match(stripped):
            return True
    return False


def _canonicalize_header(line: str) -> list[str]:
    """Rewrite the header as ``flowchart <DIR>``; spill trailing statements."""
    m = _HEADER_LINE_RE.match(line.strip())
    direction = (m.group(2) or "TD").upper() if m else "TD"
    direction = _DIRECTION_ALIASES[direction].value
    rest = (m.group(3) or "").strip() if m else ""
    header = f"flowchart {direction}"
    if not rest:
        return [header]
    if rest.startswith(";"):
        return [header + rest]
    return [header, rest]


def sanitize_model_output(raw: str) -> str:
    """Clean raw model output down to plausible Mermaid source.

    Strips code fences (keeping their content), drops prose before the
    first ``flowchart``/``graph`` header, rewrites the header to the
    canonical ``flowchart <DIR>`` form with TB collapsed to TD, and
    inserts a ``flowchart TD`` header for fenced content that lacks one.
    Unfenced headerless content is passed through untouched so the
    validator's repair ladder can grade it.  Idempotent.
    """
    if not raw or not raw.strip():
        raise EmptyOutput("model output is empty")
    lines = raw.replace("\r\n", "\n").replace("\r", "\n").split("\n")
    blocks = _fenced_blocks(lines)
    fenced = bool(blocks)
    if fenced:
        with_header = [b for b in blocks if _find_header(b) is not None]
        lines = with_header[0] if with_header else blocks[0]
    header_idx = _find_header(lines)
    if header_idx is None:
        if not _looks_like_mermaid(lines):
            raise EmptyOutput("no Mermaid content found in model output")
        if fenced:
            lines = ["flowchart TD"] + lines
    else:
        lines = _canonicalize_header(lines[header_idx]) + lines[header_idx + 1:]
    while lines and not lines[0].strip():
        lines.pop(0)
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise EmptyOutput("no Mermaid content found in model output")
    return "\n".join(line.rstrip() for line in lines)


def _content_lines(text: str) -> list[int]:
    numbers = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped and not stripped.startswith("%%"):
            numbers.append(line_no)
    return numbers


def _repair_candidates(text: str, err: MermaidSyntaxError) -> list[tuple[str, str]]:
    """The single-repair ladder: (description, repaired text) candidates."""
    lines = text.splitlines()
    candidates: list[tuple[str, str]] = []
    if _find_header(lines) is None:
        candidates.append(("inserted missing 'flowchart TD' header",
                           "flowchart TD\n" + text))
    if err.missing_delimiter is not None and 1 <= err.line <= len(lines):
        fixed = list(lines)
        fixed[err.line - 1] = fixed[err.line - 1] + err.missing_delimiter
        candidates.append((f"closed unclosed delimiter with {err.missing_delimiter!r}",
                           "\n".join(fixed)))
    content = _content_lines(text)
    if content and err.line == content[-1]:
        fixed = [line for i, line in enumerate(lines, start=1) if i != err.line]
        candidates.append((f"dropped unparseable trailing line {err.line}",
                           "\n".join(fixed)))
    return candidates


def validate(text: str) -> SyntaxReport:
    """Grade source as Valid, Repaired (one automatic fix), or Invalid.

    The repair ladder tries, in order: insert a missing header, close one
    unclosed shape delimiter at its end of line, drop one unparseable
    trailing line.  At most one repair is ever applied.
    """
    try:
        graph = parse_flowchart(text)
        return SyntaxReport(Tier.VALID, text=text, graph=graph)
    except MermaidSyntaxError as err:
        for description, candidate in _repair_candidates(text, err):
            try:
                graph = parse_flowchart(candidate)
            except MermaidSyntaxError:
                continue
            return SyntaxReport(Tier.REPAIRED, text=candidate, graph=graph,
                                repair=description)
        return SyntaxReport(Tier.INVALID, error_line=err.line,
                            error_column=err.column, error_message=err.message)


_QUOTE_CHARS = "'\"`"
_WS_RE = re.compile(r"\s+")


def normalize_label(label: str) -> str:
    """Lowercase, collapse whitespace, and strip surrounding quote pairs."""
    text = label.strip()
    while len(text) >= 2 and text[0] == text[-1] and text[0] in _QUOTE_CHARS:
        text = text[1:-1].strip()
    return _WS_RE.sub(" ", text).lower()


def normalize_graph(graph: FlowGraph) -> NormalizedGraph:
    """Collapse a FlowGraph to its normalized label set and label-pair edges.

    Ids, shapes, arrow styles, and edge labels are discarded; duplicate
    normalized labels collapse to one set element.
    """
    label_of = {node.id: normalize_label(node.label) for node in graph.nodes}
    return NormalizedGraph(
        node_labels=frozenset(label_of.values()),
        edges=frozenset((label_of[e.source], label_of[e.target]) for e in graph.edges),
    )

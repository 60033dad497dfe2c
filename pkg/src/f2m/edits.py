"""Structural edit commands over FlowGraphs.

Each command is the programmatic form of one UI gesture (inline rename,
palette drop, edge drag, ...).  Commands are pure transformations: they
never mutate their input and always produce a graph that serializes back
to valid code.  Every command has a stable JSON wire encoding keyed by an
``op`` field, e.g. ``{"op": "add_edge", "source": "A", "target": "B",
"label": "Yes"}``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from .mermaid import EdgeSpec, EdgeStyle, FlowGraph, NodeShape, NodeSpec


class UnknownId(Exception):
    """A command referenced a node or edge that does not exist."""


class DuplicateEdge(Exception):
    """AddEdge would duplicate an existing (source, target) pair."""


class EmptyLabel(Exception):
    """A command supplied a label that is empty after trimming."""


@dataclass(frozen=True)
class AddNode:
    label: str
    shape: NodeShape = NodeShape.PROCESS


@dataclass(frozen=True)
class RenameNode:
    id: str
    label: str


@dataclass(frozen=True)
class DeleteNode:
    id: str


@dataclass(frozen=True)
class AddEdge:
    source: str
    target: str
    label: Optional[str] = None


@dataclass(frozen=True)
class DeleteEdge:
    source: str
    target: str


@dataclass(frozen=True)
class SetEdgeLabel:
    source: str
    target: str
    label: str


@dataclass(frozen=True)
class InsertBefore:
    """Palette drop onto an existing node: splice a new node above it."""

    target: str
    label: str
    shape: NodeShape = NodeShape.PROCESS


EditCommand = Union[AddNode, RenameNode, DeleteNode, AddEdge, DeleteEdge,
                    SetEdgeLabel, InsertBefore]

_OPS: dict[str, type] = {
    "add_node": AddNode,
    "rename_node": RenameNode,
    "delete_node": DeleteNode,
    "add_edge": AddEdge,
    "delete_edge": DeleteEdge,
    "set_edge_label": SetEdgeLabel,
    "insert_before": InsertBefore,
}
_OP_NAMES = {cls: name for name, cls in _OPS.items()}


def command_to_json(cmd: EditCommand) -> dict:
    """Encode a command as its wire dict."""
    payload: dict = {"op": _OP_NAMES[type(cmd)]}
    for key, value in vars(cmd).items():
        if isinstance(value, NodeShape):
            value = value.value
        if value is not None:
            payload[key] = value
    return payload


def command_from_json(payload: dict) -> EditCommand:
    """Decode a wire dict; raises ValueError on malformed input."""
    if not isinstance(payload, dict):
        raise ValueError("edit command must be a JSON object")
    op = payload.get("op")
    cls = _OPS.get(op)
    if cls is None:
        raise ValueError(f"unknown edit op {op!r}")
    kwargs = {k: v for k, v in payload.items() if k != "op"}
    if "shape" in kwargs:
        try:
            kwargs["shape"] = NodeShape(kwargs["shape"])
        except ValueError:
            raise ValueError(f"unknown node shape {kwargs['shape']!r}") from None
    try:
        cmd = cls(**kwargs)
    except TypeError as exc:
        raise ValueError(f"bad fields for op {op!r}: {exc}") from None
    for key, value in vars(cmd).items():
        if key != "shape" and value is not None and not isinstance(value, str):
            raise ValueError(f"field {key!r} must be a string")
    return cmd


def fresh_id(graph: FlowGraph) -> str:
    """Smallest ``N<k>`` (k = 1, 2, ...) not already used as a node id."""
    ids = set(graph.node_ids())
    k = 1
    while f"N{k}" in ids:
        k += 1
    return f"N{k}"


def _require_node(graph: FlowGraph, node_id: str) -> None:
    if node_id not in graph.node_ids():
        raise UnknownId(f"no node with id {node_id!r}")


def _clean_label(label: str) -> str:
    if label is None or not label.strip():
        raise EmptyLabel("labels must be non-empty")
    return label.strip()


def insert_before(graph: FlowGraph, target: str, label: str,
                  shape: NodeShape = NodeShape.PROCESS) -> FlowGraph:
    """Splice a new node directly above ``target``.

    Every edge (p, target) is rewritten to (p, new) keeping its label and
    style, and a plain edge (new, target) is added.  With no predecessors
    only the new edge appears.
    """
    _require_node(graph, target)
    label = _clean_label(label)
    new_id = fresh_id(graph)
    nodes = []
    for node in graph.nodes:
        if node.id == target:
            nodes.append(NodeSpec(new_id, label, shape))
        nodes.append(node)
    edges = [EdgeSpec(e.source, new_id, e.label, e.style) if e.target == target else e
             for e in graph.edges]
    edges.append(EdgeSpec(new_id, target))
    return FlowGraph(graph.direction, tuple(nodes), tuple(edges))


def apply_edit(graph: FlowGraph, cmd: EditCommand) -> FlowGraph:
    """Apply one command, returning a new FlowGraph.

    Raises UnknownId, DuplicateEdge, or EmptyLabel when the command does
    not apply.  Deleting the last remaining node raises ValueError since
    an empty flowchart is unrepresentable.
    """
    if isinstance(cmd, AddNode):
        node = NodeSpec(fresh_id(graph), _clean_label(cmd.label), cmd.shape)
        return FlowGraph(graph.direction, graph.nodes + (node,), graph.edges)

    if isinstance(cmd, RenameNode):
        _require_node(graph, cmd.id)
        label = _clean_label(cmd.label)
        nodes = tuple(NodeSpec(n.id, label, n.shape) if n.id == cmd.id else n
                      for n in graph.nodes)
        return FlowGraph(graph.direction, nodes, graph.edges)

    if isinstance(cmd, DeleteNode):
        _require_node(graph, cmd.id)
        nodes = tuple(n for n in graph.nodes if n.id != cmd.id)
        if not nodes:
            raise ValueError("cannot delete the last remaining node")
        edges = tuple(e for e in graph.edges
                      if e.source != cmd.id and e.target != cmd.id)
        return FlowGraph(graph.direction, nodes, edges)

    if isinstance(cmd, AddEdge):
        _require_node(graph, cmd.source)
        _require_node(graph, cmd.target)
        label = None if cmd.label is None else _clean_label(cmd.label)
        if any(e.source == cmd.source and e.target == cmd.target
               for e in graph.edges):
            raise DuplicateEdge(f"edge {cmd.source!r} -> {cmd.target!r} already exists")
        edge = EdgeSpec(cmd.source, cmd.target, label)
        return FlowGraph(graph.direction, graph.nodes, graph.edges + (edge,))

    if isinstance(cmd, DeleteEdge):
        edges = tuple(e for e in graph.edges
                      if not (e.source == cmd.source and e.target == cmd.target))
        if len(edges) == len(graph.edges):
            raise UnknownId(f"no edge {cmd.source!r} -> {cmd.target!r}")
        return FlowGraph(graph.direction, graph.nodes, edges)

    if isinstance(cmd, SetEdgeLabel):
        label = _clean_label(cmd.label)
        found = False
        edges = []
        for e in graph.edges:
            if e.source == cmd.source and e.target == cmd.target:
                edges.append(EdgeSpec(e.source, e.target, label, e.style))
                found = True
            else:
                edges.append(e)
        if not found:
            raise UnknownId(f"no edge {cmd.source!r} -> {cmd.target!r}")
        return FlowGraph(graph.direction, graph.nodes, tuple(edges))

    if isinstance(cmd, InsertBefore):
        return insert_before(graph, cmd.target, cmd.label, cmd.shape)

    raise TypeError(f"unsupported edit command {cmd!r}")

"""Shared test helpers: graph generators, perturbations, tiny images.

A session-wide guard fails any test that tries to resolve a non-local
host: the whole suite must run offline.
"""

from __future__ import annotations

import random
import socket
import struct
import time
import zlib

import pytest

from f2m.mermaid import (Direction, EdgeSpec, EdgeStyle, FlowGraph, NodeShape,
                         NodeSpec)

SESSION_START = time.perf_counter()

_LOCAL_HOSTS = {"localhost", "127.0.0.1", "::1", "0.0.0.0"}
_REAL_GETADDRINFO = socket.getaddrinfo


def _guarded_getaddrinfo(host, *args, **kwargs):
    if str(host) not in _LOCAL_HOSTS:
        raise RuntimeError(f"external network access blocked in tests: {host!r}")
    return _REAL_GETADDRINFO(host, *args, **kwargs)


@pytest.fixture(autouse=True, scope="session")
def no_external_network():
    socket.getaddrinfo = _guarded_getaddrinfo
    yield
    socket.getaddrinfo = _REAL_GETADDRINFO

WORDS = ["start", "end", "check", "input", "save", "record", "done", "retry",
         "load", "user", "write", "db", "parse", "init", "send", "mail",
         "stop", "review", "valid", "error", "queue", "fetch", "merge",
         "close", "open", "audit"]

EDGE_WORDS = ["Yes", "No", "ok", "retry", "fail", "go on"]

ALL_SHAPES = list(NodeShape)
ALL_STYLES = list(EdgeStyle)
ALL_DIRECTIONS = list(Direction)


def random_label(rng: random.Random) -> str:
    words = rng.sample(WORDS, rng.randint(1, 3))
    label = " ".join(words)
    if rng.random() < 0.3:
        label = label.title()
    if rng.random() < 0.2:
        label += "?"
    return label


def random_ids(rng: random.Random, count: int) -> list[str]:
    ids: list[str] = []
    seen = set()
    while len(ids) < count:
        kind = rng.random()
        if kind < 0.4:
            candidate = chr(ord("A") + rng.randrange(26))
        elif kind < 0.7:
            candidate = f"n{rng.randrange(100)}"
        else:
            candidate = f"step_{rng.randrange(100)}"
        if candidate not in seen:
            seen.add(candidate)
            ids.append(candidate)
    return ids


def random_flowgraph(rng: random.Random, max_nodes: int = 15,
                     min_nodes: int = 1) -> FlowGraph:
    n = rng.randint(min_nodes, max_nodes)
    ids = random_ids(rng, n)
    nodes = tuple(NodeSpec(i, random_label(rng), rng.choice(ALL_SHAPES))
                  for i in ids)
    pairs = [(s, t) for s in ids for t in ids
             if s != t or rng.random() < 0.1]
    rng.shuffle(pairs)
    max_edges = min(len(pairs), max(0, rng.randint(0, 2 * n)))
    edges = tuple(
        EdgeSpec(s, t,
                 rng.choice(EDGE_WORDS) if rng.random() < 0.3 else None,
                 rng.choice(ALL_STYLES))
        for s, t in pairs[:max_edges])
    return FlowGraph(rng.choice(ALL_DIRECTIONS), nodes, edges)


def perturb_equivalent(rng: random.Random, graph: FlowGraph) -> FlowGraph:
    """Apply only normalization-invariant rewrites: id renames, arrow
    restyling, label case/whitespace/quote changes, edge label churn."""
    rename = {node.id: f"rx{i}_{rng.randrange(1000)}"
              for i, node in enumerate(graph.nodes)}

    def perturb_label(label: str) -> str:
        if rng.random() < 0.5:
            label = rng.choice([label.upper(), label.lower(), label.swapcase(),
                                label.title()])
        if rng.random() < 0.5 and " " in label:
            label = label.replace(" ", "  " if rng.random() < 0.5 else "   ")
        if rng.random() < 0.5 and not any(q in label for q in "'\"`"):
            quote = rng.choice(["'", '"', "`"])
            label = f"{quote}{label}{quote}"
        return label

    nodes = tuple(NodeSpec(rename[n.id], perturb_label(n.label), n.shape)
                  for n in graph.nodes)
    edges = []
    for e in graph.edges:
        label = e.label
        choice = rng.random()
        if choice < 0.3:
            label = None
        elif choice < 0.6:
            label = rng.choice(EDGE_WORDS)
        edges.append(EdgeSpec(rename[e.source], rename[e.target], label,
                              rng.choice(ALL_STYLES)))
    return FlowGraph(graph.direction, nodes, tuple(edges))


def make_png(rgb: tuple[int, int, int] = (0, 0, 0)) -> bytes:
    """A valid 1x1 PNG; varying the pixel varies the bytes."""
    def chunk(typ: bytes, data: bytes) -> bytes:
        return (struct.pack(">I", len(data)) + typ + data
                + struct.pack(">I", zlib.crc32(typ + data) & 0xFFFFFFFF))

    ihdr = struct.pack(">IIBBBBB", 1, 1, 8, 2, 0, 0, 0)
    idat = zlib.compress(b"\x00" + bytes(rgb))
    return (b"\x89PNG\r\n\x1a\n" + chunk(b"IHDR", ihdr)
            + chunk(b"IDAT", idat) + chunk(b"IEND", b""))


@pytest.fixture
def rng() -> random.Random:
    return random.Random(20240817)

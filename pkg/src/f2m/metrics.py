"""Scoring of predicted Mermaid programs against gold references.

Two metric families:

* symbolic: precision/recall/F1 over normalized node labels and over
  directed (source label, target label) edges, plus cosine similarity of
  the two code strings;
* structural: structural accuracy (normalized graph edit distance), flow
  accuracy (gold source-to-sink path recall), syntax validity (three-tier
  grade), semantic fidelity (best-match label similarity), and
  completeness (recall over gold nodes plus edges), each on its native
  bounded scale and normalized to [0, 1].

A reconstructability override grants full structural credit whenever the
prediction equals the gold graph after normalization.  Both families can
also be delegated to an LLM judge returning one CSV line per family.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Protocol, Sequence

import numpy as np

from . import providers
from .ged import graph_edit_distance
from .mermaid import (NormalizedGraph, Tier, normalize_graph, validate)
from .providers import MalformedJudgeOutput


class EmptyCorpus(Exception):
    """Aggregation was asked to average zero records."""


class EmbedderUnavailable(Exception):
    """A remote embedding provider could not be reached."""


class Embedder(Protocol):
    def embed(self, texts: Sequence[str]) -> np.ndarray:
        """Return one vector per text; rows must share a vector space."""


_TOKEN_RE = re.compile(r"[a-z0-9]+")


class TokenCountEmbedder:
    """Offline default: token-frequency vectors over lowercased
    alphanumeric tokens, with the vocabulary built per batch."""

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        token_lists = [_TOKEN_RE.findall(t.lower()) for t in texts]
        vocab = sorted({tok for toks in token_lists for tok in toks})
        index = {tok: i for i, tok in enumerate(vocab)}
        out = np.zeros((len(texts), max(len(vocab), 1)), dtype=float)
        for row, toks in enumerate(token_lists):
            for tok in toks:
                out[row, index[tok]] += 1.0
        return out


class RemoteEmbedder:
    """OpenAI-style /embeddings endpoint behind the Embedder interface."""

    def __init__(self, base_url: str, model: str, api_key: str | None = None,
                 timeout: float = 30.0):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = api_key
        self.timeout = timeout

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        import httpx
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            resp = httpx.post(f"{self.base_url}/embeddings",
                              json={"model": self.model, "input": list(texts)},
                              headers=headers, timeout=self.timeout)
            resp.raise_for_status()
            data = resp.json()["data"]
        except Exception as exc:
            raise EmbedderUnavailable(
                f"embedding endpoint failed: {type(exc).__name__}") from exc
        return np.array([item["embedding"] for item in data], dtype=float)


def _cosine(u: np.ndarray, v: np.ndarray) -> float:
    if np.array_equal(u, v):
        return 1.0
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def _set_prf(pred: frozenset, gold: frozenset) -> tuple[float, float, float]:
    # Two empty sets are in full (vacuous) agreement; the zero-denominator
    # rule applies as soon as either side is non-empty.
    if not pred and not gold:
        return 1.0, 1.0, 1.0
    tp = len(pred & gold)
    return _prf(tp, len(pred - gold), len(gold - pred))


def entity_metrics(pred: NormalizedGraph, gold: NormalizedGraph) -> tuple[float, float, float]:
    """Precision, recall, F1 over normalized node labels."""
    return _set_prf(pred.node_labels, gold.node_labels)


def relation_metrics(pred: NormalizedGraph, gold: NormalizedGraph) -> tuple[float, float, float]:
    """Precision, recall, F1 over directed (source label, target label) pairs."""
    return _set_prf(pred.edges, gold.edges)


def semantic_similarity(pred: str, gold: str,
                        embedder: Embedder | None = None) -> float:
    """Cosine similarity between the two full code strings."""
    embedder = embedder or TokenCountEmbedder()
    vectors = embedder.embed([pred, gold])
    return _cosine(vectors[0], vectors[1])


def _graph_size(g: NormalizedGraph) -> int:
    return len(g.node_labels) + len(g.edges)


def structural_accuracy(pred: NormalizedGraph, gold: NormalizedGraph) -> float:
    """1 - GED / max(graph sizes), clamped to [0, 1]."""
    denom = max(_graph_size(gold), _graph_size(pred))
    sa = 1.0 - graph_edit_distance(pred, gold) / denom
    return min(1.0, max(0.0, sa))


MAX_GOLD_PATHS = 10_000
MAX_PATH_LEN = 25


def _source_sink_paths(g: NormalizedGraph,
                       max_paths: int = MAX_GOLD_PATHS,
                       max_len: int = MAX_PATH_LEN) -> list[tuple[str, ...]] | None:
    """All simple paths from in-degree-0 to out-degree-0 nodes.

    Returns None when enumeration exceeds the path-count or length caps.
    """
    out_adj: dict[str, set[str]] = {lab: set() for lab in g.node_labels}
    in_deg = {lab: 0 for lab in g.node_labels}
    for u, v in g.edges:
        out_adj[u].add(v)
        in_deg[v] += 1
    sources = sorted(lab for lab in g.node_labels if in_deg[lab] == 0)
    sinks = {lab for lab in g.node_labels if not out_adj[lab]}
    paths: list[tuple[str, ...]] = []
    # Iterative DFS; each stack frame holds the path so far plus the
    # remaining unvisited successors.
    for source in sources:
        stack: list[tuple[tuple[str, ...], list[str]]] = [
            ((source,), sorted(out_adj[source]))]
        while stack:
            path, todo = stack[-1]
            if path[-1] in sinks and len(todo) == len(out_adj[path[-1]]):
                paths.append(path)
                if len(paths) > max_paths:
                    return None
            if not todo:
                stack.pop()
                continue
            nxt = todo.pop(0)
            if nxt in path:
                continue
            if len(path) + 1 > max_len:
                return None
            stack.append((path + (nxt,), sorted(out_adj[nxt])))
    return paths


def _edge_recall(pred: NormalizedGraph, gold: NormalizedGraph) -> float:
    if not gold.edges:
        return 1.0
    return len(pred.edges & gold.edges) / len(gold.edges)


def _path_in(pred: NormalizedGraph, path: tuple[str, ...]) -> bool:
    if len(path) == 1:
        return path[0] in pred.node_labels
    return all((path[k], path[k + 1]) in pred.edges for k in range(len(path) - 1))


def flow_accuracy(pred: NormalizedGraph, gold: NormalizedGraph) -> float:
    """Fraction of gold source-to-sink simple paths present in pred.

    A path counts as present when every consecutive label pair is an edge
    of pred (the single node itself, for one-node paths).  Falls back to
    edge recall when gold has no source-to-sink path or exceeds the
    enumeration caps.
    """
    paths = _source_sink_paths(gold)
    if not paths:
        return _edge_recall(pred, gold)
    hits = sum(1 for path in paths if _path_in(pred, path))
    return hits / len(paths)


def syntax_validity(pred: str) -> float:
    """1.0 for Valid, 0.5 for Repaired, 0.0 for Invalid source."""
    tier = validate(pred).tier
    return {Tier.VALID: 1.0, Tier.REPAIRED: 0.5, Tier.INVALID: 0.0}[tier]


def completeness(pred: NormalizedGraph, gold: NormalizedGraph) -> float:
    """Recall over the union of gold nodes and gold edges."""
    matched = len(pred.node_labels & gold.node_labels) + len(pred.edges & gold.edges)
    return matched / (len(gold.node_labels) + len(gold.edges))


def semantic_fidelity(pred: NormalizedGraph, gold: NormalizedGraph,
                      embedder: Embedder | None = None) -> float:
    """Mean over gold labels of the best similarity to any pred label."""
    gold_labels = sorted(gold.node_labels)
    pred_labels = sorted(pred.node_labels)
    if not pred_labels:
        return 0.0
    embedder = embedder or TokenCountEmbedder()
    vectors = embedder.embed(gold_labels + pred_labels)
    gold_vecs = vectors[:len(gold_labels)]
    pred_vecs = vectors[len(gold_labels):]
    total = 0.0
    pred_set = set(pred_labels)
    for g_i, g_label in enumerate(gold_labels):
        if g_label in pred_set:
            total += 1.0
            continue
        total += max(_cosine(gold_vecs[g_i], pred_vecs[p_i])
                     for p_i in range(len(pred_labels)))
    return total / len(gold_labels)


def reconstructability(pred: NormalizedGraph, gold: NormalizedGraph) -> bool:
    """True iff pred and gold are equal after normalization."""
    return pred == gold


# Native scale maxima, in judge CSV order: structural accuracy, flow
# accuracy, syntax validity, semantic fidelity, completeness.
STRUCTURAL_SCALES: tuple[float, ...] = (5.0, 5.0, 2.0, 5.0, 3.0)


def parse_judge_csv(line: str, expected: int,
                    scales: Sequence[float] | None = None) -> tuple[float, ...]:
    """Parse one strict CSV line of judge scores.

    With ``scales`` each value must lie in [0, max] and is divided by its
    per-metric maximum; without, values must already lie in [0, 1].
    Rejects wrong counts, non-numeric fields, out-of-range values, and
    multi-line replies.
    """
    if expected not in (5, 6):
        raise ValueError("expected must be 5 or 6")
    if scales is not None and len(scales) != expected:
        raise ValueError("scales must match the expected count")
    text = line.strip()
    if not text or "\n" in text:
        raise MalformedJudgeOutput("judge reply must be exactly one line")
    parts = text.split(",")
    if len(parts) != expected:
        raise MalformedJudgeOutput(
            f"expected {expected} comma-separated values, got {len(parts)}")
    values = []
    for part in parts:
        try:
            values.append(float(part.strip()))
        except ValueError:
            raise MalformedJudgeOutput(f"non-numeric judge value {part.strip()!r}") from None
    if scales is None:
        if any(not 0.0 <= v <= 1.0 for v in values):
            raise MalformedJudgeOutput("judge values must lie in [0, 1]")
        return tuple(values)
    normalized = []
    for v, scale in zip(values, scales):
        if not 0.0 <= v <= scale:
            raise MalformedJudgeOutput(f"judge value {v} outside [0, {scale}]")
        normalized.append(v / scale)
    return tuple(normalized)


@dataclass(frozen=True)
class SymbolicScores:
    entity_p: float
    entity_r: float
    entity_f1: float
    rel_p: float
    rel_r: float
    rel_f1: float


@dataclass(frozen=True)
class StructuralScores:
    """The five structural metrics, stored normalized to [0, 1]."""

    structural_accuracy: float
    flow_accuracy: float
    syntax_validity: float
    semantic_fidelity: float
    completeness: float
    override_applied: bool = False

    @property
    def normalized(self) -> tuple[float, ...]:
        return (self.structural_accuracy, self.flow_accuracy,
                self.syntax_validity, self.semantic_fidelity, self.completeness)

    @property
    def native(self) -> tuple[float, ...]:
        return tuple(v * s for v, s in zip(self.normalized, STRUCTURAL_SCALES))


@dataclass(frozen=True)
class MetricReport:
    symbolic: SymbolicScores
    structural: StructuralScores
    cosine_similarity: float
    mode: str

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "symbolic": vars(self.symbolic).copy(),
            "structural": {
                "structural_accuracy": self.structural.structural_accuracy,
                "flow_accuracy": self.structural.flow_accuracy,
                "syntax_validity": self.structural.syntax_validity,
                "semantic_fidelity": self.structural.semantic_fidelity,
                "completeness": self.structural.completeness,
                "native": list(self.structural.native),
                "override_applied": self.structural.override_applied,
            },
            "cosine_similarity": self.cosine_similarity,
        }


@dataclass(frozen=True)
class EvalRecord:
    sample_id: str
    predicted: str
    gold: str
    report: MetricReport
    image_path: Optional[str] = None


_ZERO_SYMBOLIC = SymbolicScores(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
MODE_DETERMINISTIC = "deterministic"
MODE_JUDGE = "judge"


def _judge_scores(judge, pred: str, gold: str, expected: int,
                  scales: Sequence[float] | None) -> tuple[float, ...]:
    call = (providers.judge_symbolic if expected == 6 else providers.judge_structural)
    try:
        return parse_judge_csv(call(judge, pred, gold), expected, scales)
    except MalformedJudgeOutput:
        # One retry: judges occasionally wrap the line in extra text.
        return parse_judge_csv(call(judge, pred, gold), expected, scales)


def evaluate_pair(pred: str, gold: str, *, mode: str = MODE_DETERMINISTIC,
                  embedder: Embedder | None = None,
                  judge=None) -> MetricReport:
    """Score one prediction against its gold reference.

    Deterministic mode computes everything locally, applying the
    reconstructability override before structural scoring.  Judge mode
    fills symbolic and structural scores from the judge CSV replies;
    cosine similarity is always computed locally.  The gold source must
    be Valid; an Invalid prediction still yields a report with zero
    scores apart from its syntax-validity tier.
    """
    if mode not in (MODE_DETERMINISTIC, MODE_JUDGE):
        raise ValueError(f"unknown evaluation mode {mode!r}")
    gold_report = validate(gold)
    if gold_report.tier is not Tier.VALID:
        raise ValueError(
            f"gold source is not valid Mermaid: {gold_report.error_message}")
    gold_norm = normalize_graph(gold_report.graph)

    if mode == MODE_JUDGE:
        if judge is None:
            raise ValueError("judge mode requires a judge provider config")
        sym = SymbolicScores(*_judge_scores(judge, pred, gold, 6, None))
        struct_vals = _judge_scores(judge, pred, gold, 5, STRUCTURAL_SCALES)
        structural = StructuralScores(
            *struct_vals, override_applied=all(v == 1.0 for v in struct_vals))
        cosine = semantic_similarity(pred, gold, embedder)
        return MetricReport(sym, structural, cosine, MODE_JUDGE)

    pred_report = validate(pred)
    sv = {Tier.VALID: 1.0, Tier.REPAIRED: 0.5, Tier.INVALID: 0.0}[pred_report.tier]
    if pred_report.graph is None:
        structural = StructuralScores(0.0, 0.0, sv, 0.0, 0.0)
        return MetricReport(_ZERO_SYMBOLIC, structural, 0.0, MODE_DETERMINISTIC)

    pred_norm = normalize_graph(pred_report.graph)
    sym = SymbolicScores(*entity_metrics(pred_norm, gold_norm),
                         *relation_metrics(pred_norm, gold_norm))
    cosine = semantic_similarity(pred, gold, embedder)
    if reconstructability(pred_norm, gold_norm):
        structural = StructuralScores(1.0, 1.0, 1.0, 1.0, 1.0, override_applied=True)
    else:
        structural = StructuralScores(
            structural_accuracy(pred_norm, gold_norm),
            flow_accuracy(pred_norm, gold_norm),
            sv,
            semantic_fidelity(pred_norm, gold_norm, embedder),
            completeness(pred_norm, gold_norm),
        )
    return MetricReport(sym, structural, cosine, MODE_DETERMINISTIC)


# Column names as they appear in the summary table.
SUMMARY_COLUMNS = ("Model", "Entity P", "Entity R", "Entity F1",
                   "Rel. P", "Rel. R", "Rel. F1", "Cosine Sim.",
                   "SA", "FA", "SV", "SF", "C")


def aggregate(records: Sequence[EvalRecord], model_id: str) -> dict[str, object]:
    """Arithmetic-mean summary row over per-record reports."""
    if not records:
        raise EmptyCorpus("no records to aggregate")

    def mean(values) -> float:
        values = list(values)
        return sum(values) / len(values)

    reports = [r.report for r in records]
    return {
        "Model": model_id,
        "Entity P": mean(r.symbolic.entity_p for r in reports),
        "Entity R": mean(r.symbolic.entity_r for r in reports),
        "Entity F1": mean(r.symbolic.entity_f1 for r in reports),
        "Rel. P": mean(r.symbolic.rel_p for r in reports),
        "Rel. R": mean(r.symbolic.rel_r for r in reports),
        "Rel. F1": mean(r.symbolic.rel_f1 for r in reports),
        "Cosine Sim.": mean(r.cosine_similarity for r in reports),
        "SA": mean(r.structural.structural_accuracy for r in reports),
        "FA": mean(r.structural.flow_accuracy for r in reports),
        "SV": mean(r.structural.syntax_validity for r in reports),
        "SF": mean(r.structural.semantic_fidelity for r in reports),
        "C": mean(r.structural.completeness for r in reports),
    }

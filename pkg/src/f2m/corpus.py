"""Batch evaluation over a corpus directory.

A corpus is a directory holding ``manifest.csv`` with columns
``id,image_path,gold_path`` (paths relative to the manifest).  Runs cache
predictions as ``<id>.<model>.mmd`` beside the manifest, write one
``report.<model>.csv`` row per record, and append a summary row to
``summary.csv``.  Per-record failures are flagged in the report and never
abort the run.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from . import metrics, prompts, providers
from .metrics import Embedder, EvalRecord, MetricReport, aggregate, evaluate_pair

REPORT_COLUMNS = ("id", "entity_p", "entity_r", "entity_f1", "rel_p", "rel_r",
                  "rel_f1", "cosine", "sa", "fa", "sv", "sf", "c", "override")

_MEDIA_TYPES = {".png": "image/png", ".jpg": "image/jpeg",
                ".jpeg": "image/jpeg", ".webp": "image/webp"}

_CACHE_INDEX = ".cache_index.json"


class ManifestError(Exception):
    """manifest.csv is missing, unreadable, or has the wrong columns."""


@dataclass(frozen=True)
class ManifestEntry:
    sample_id: str
    image_path: Path
    gold_path: Path


@dataclass
class RecordOutcome:
    sample_id: str
    record: Optional[EvalRecord] = None
    error: Optional[str] = None


def media_type_for(path: Path) -> str | None:
    return _MEDIA_TYPES.get(path.suffix.lower())


def read_manifest(manifest_path: str | os.PathLike) -> list[ManifestEntry]:
    """Load manifest.csv; relative paths resolve against its directory."""
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        raise ManifestError(f"manifest not found: {manifest_path}")
    base = manifest_path.parent
    entries: list[ManifestEntry] = []
    with open(manifest_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["id", "image_path", "gold_path"]:
            raise ManifestError(
                f"manifest must have columns id,image_path,gold_path, "
                f"got {reader.fieldnames}")
        for row in reader:
            entries.append(ManifestEntry(
                sample_id=row["id"].strip(),
                image_path=base / row["image_path"].strip(),
                gold_path=base / row["gold_path"].strip(),
            ))
    if not entries:
        raise ManifestError("manifest lists no records")
    return entries


def _atomic_write(path: Path, data: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class PredictionCache:
    """``<id>.<model>.mmd`` files plus an index keyed by prompt version."""

    def __init__(self, directory: Path, model: str):
        self.directory = directory
        self.model = model
        self.index_path = directory / _CACHE_INDEX
        self.prompt_version = prompts.CONVERT_PROMPT_VERSION
        self._lock = threading.Lock()
        try:
            self._index = json.loads(self.index_path.read_text("utf-8"))
        except (OSError, ValueError):
            self._index = {}

    def _path(self, sample_id: str) -> Path:
        return self.directory / f"{sample_id}.{self.model}.mmd"

    def get(self, sample_id: str) -> str | None:
        path = self._path(sample_id)
        if not path.is_file():
            return None
        if self._index.get(path.name) != self.prompt_version:
            return None  # produced under a different prompt: stale
        return path.read_text("utf-8")

    def put(self, sample_id: str, code: str) -> None:
        path = self._path(sample_id)
        _atomic_write(path, code)
        with self._lock:
            self._index[path.name] = self.prompt_version
            _atomic_write(self.index_path,
                          json.dumps(self._index, indent=0, sort_keys=True))


def _score_entry(entry: ManifestEntry, cache: PredictionCache,
                 cfg: providers.ProviderConfig, mode: str,
                 embedder: Embedder | None,
                 judge: providers.ProviderConfig | None) -> RecordOutcome:
    if not entry.gold_path.is_file():
        return RecordOutcome(entry.sample_id,
                             error=f"gold file missing: {entry.gold_path}")
    gold = entry.gold_path.read_text("utf-8")
    predicted = cache.get(entry.sample_id)
    if predicted is None:
        media_type = media_type_for(entry.image_path)
        if media_type is None:
            return RecordOutcome(entry.sample_id,
                                 error=f"unsupported image: {entry.image_path}")
        if not entry.image_path.is_file():
            return RecordOutcome(entry.sample_id,
                                 error=f"image missing: {entry.image_path}")
        try:
            result = providers.convert_image(cfg, entry.image_path.read_bytes(),
                                             media_type)
        except (providers.InvalidOutput, providers.ProviderUnreachable,
                providers.UnsupportedImageType) as exc:
            return RecordOutcome(entry.sample_id, error=str(exc))
        predicted = result.code
        cache.put(entry.sample_id, predicted)
    try:
        report = evaluate_pair(predicted, gold, mode=mode, embedder=embedder,
                               judge=judge)
    except Exception as exc:
        return RecordOutcome(entry.sample_id, error=str(exc))
    return RecordOutcome(entry.sample_id,
                         record=EvalRecord(entry.sample_id, predicted, gold,
                                           report, str(entry.image_path)))


def _report_row(outcome: RecordOutcome) -> list[str]:
    if outcome.record is None:
        return [outcome.sample_id] + [""] * (len(REPORT_COLUMNS) - 1)
    r: MetricReport = outcome.record.report
    values = (r.symbolic.entity_p, r.symbolic.entity_r, r.symbolic.entity_f1,
              r.symbolic.rel_p, r.symbolic.rel_r, r.symbolic.rel_f1,
              r.cosine_similarity, r.structural.structural_accuracy,
              r.structural.flow_accuracy, r.structural.syntax_validity,
              r.structural.semantic_fidelity, r.structural.completeness)
    return ([outcome.sample_id] + [repr(v) for v in values]
            + [str(r.structural.override_applied).lower()])


def write_report(outcomes: Sequence[RecordOutcome], path: Path) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for outcome in outcomes:
        writer.writerow(_report_row(outcome))
    _atomic_write(path, buf.getvalue())


def append_summary(row: dict[str, object], path: Path) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if not path.is_file():
        writer.writerow(metrics.SUMMARY_COLUMNS)
    values = [row["Model"]] + [f"{row[c]:.3f}" for c in metrics.SUMMARY_COLUMNS[1:]]
    writer.writerow(values)
    with open(path, "a", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


@dataclass
class EvalRunResult:
    outcomes: list[RecordOutcome]
    summary: Optional[dict[str, object]]
    report_path: Path
    summary_path: Path

    @property
    def records(self) -> list[EvalRecord]:
        return [o.record for o in self.outcomes if o.record is not None]

    @property
    def failures(self) -> list[RecordOutcome]:
        return [o for o in self.outcomes if o.record is None]


def run_eval(manifest_path: str | os.PathLike, model: str, *,
             mode: str = metrics.MODE_DETERMINISTIC,
             judge_model: str = "gpt-4.1",
             embedder: Embedder | None = None,
             jobs: int = 1,
             timeout: float = 60.0,
             max_retries: int = 2) -> EvalRunResult:
    """Convert (or reuse cached predictions) and score a whole corpus.

    Deterministic and idempotent given cached predictions: re-running
    writes byte-identical reports.
    """
    entries = read_manifest(manifest_path)
    directory = Path(manifest_path).parent
    cache = PredictionCache(directory, model)
    cfg = providers.config_for_model(model, timeout=timeout,
                                     max_retries=max_retries)
    judge = None
    if mode == metrics.MODE_JUDGE:
        judge = providers.config_for_model(judge_model, timeout=timeout,
                                           max_retries=max_retries)

    def work(entry: ManifestEntry) -> RecordOutcome:
        return _score_entry(entry, cache, cfg, mode, embedder, judge)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(work, entries))
    else:
        outcomes = [work(entry) for entry in entries]

    report_path = directory / f"report.{model}.csv"
    write_report(outcomes, report_path)
    summary_path = directory / "summary.csv"
    records = [o.record for o in outcomes if o.record is not None]
    summary = None
    if records:
        summary = aggregate(records, model)
        append_summary(summary, summary_path)
    return EvalRunResult(outcomes=outcomes, summary=summary,
                         report_path=report_path, summary_path=summary_path)

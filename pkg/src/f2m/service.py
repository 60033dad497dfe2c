"""HTTP facade binding conversion, editing, refinement, and evaluation.

Holds per-document sessions in memory (LRU-evicted) so interactive
clients can edit one diagram through a sequence of revisions.  The
session invariant is that the stored code always equals the serialization
of the stored graph; mutations to one document are applied under a
per-session lock so revisions never skip or repeat.
"""

from __future__ import annotations

import os
import threading
import time
import uuid
from collections import OrderedDict
from dataclasses import dataclass, field

from fastapi import FastAPI, Form, Request, UploadFile
from fastapi.responses import JSONResponse, PlainTextResponse

from . import edits, metrics, providers
from .mermaid import FlowGraph, parse_flowchart, serialize

DEFAULT_SESSION_CAP = 256
DEFAULT_MAX_IMAGE_BYTES = 8 * 1024 * 1024

ENV_PORT = "F2M_PORT"
ENV_SESSION_CAP = "F2M_SESSION_CAP"

# Model ids the demo server exposes; mock is always available, the rest
# require their provider credential at request time.
KNOWN_MODELS = ("mock", "gpt-4.1", "gpt-4.1-mini", "gpt-4o", "gpt-4o-mini",
                "gemini-2.5-flash")


@dataclass
class DocumentSession:
    document_id: str
    graph: FlowGraph
    code: str
    revision: int
    last_modified: float = field(default_factory=time.time)
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)


class SessionStore:
    """Thread-safe in-memory LRU store of DocumentSessions."""

    def __init__(self, capacity: int = DEFAULT_SESSION_CAP):
        self.capacity = capacity
        self._lock = threading.Lock()
        self._sessions: OrderedDict[str, DocumentSession] = OrderedDict()

    def create(self, graph: FlowGraph) -> DocumentSession:
        session = DocumentSession(document_id=uuid.uuid4().hex[:12],
                                  graph=graph, code=serialize(graph), revision=1)
        with self._lock:
            self._sessions[session.document_id] = session
            while len(self._sessions) > self.capacity:
                self._sessions.popitem(last=False)
        return session

    def get(self, document_id: str) -> DocumentSession | None:
        with self._lock:
            session = self._sessions.get(document_id)
            if session is not None:
                self._sessions.move_to_end(document_id)
            return session

    def __len__(self) -> int:
        with self._lock:
            return len(self._sessions)


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse({"error": message}, status_code=status)


def _media_type_of(upload: UploadFile) -> str:
    if upload.content_type and upload.content_type != "application/octet-stream":
        return upload.content_type
    suffixes = {".png": "image/png", ".jpg": "image/jpeg",
                ".jpeg": "image/jpeg", ".webp": "image/webp"}
    name = upload.filename or ""
    return suffixes.get(os.path.splitext(name)[1].lower(), "application/octet-stream")


def create_app(*, session_cap: int | None = None,
               max_image_bytes: int = DEFAULT_MAX_IMAGE_BYTES,
               models: tuple[str, ...] = KNOWN_MODELS,
               static_dir: str | os.PathLike | None = None) -> FastAPI:
    """Build the application; state is per-app so tests stay isolated."""
    if session_cap is None:
        session_cap = int(os.environ.get(ENV_SESSION_CAP, DEFAULT_SESSION_CAP))
    app = FastAPI(title="f2m", docs_url=None, redoc_url=None)
    store = SessionStore(session_cap)
    app.state.sessions = store

    @app.get("/api/health")
    def health():
        return {"status": "ok"}

    @app.get("/api/models")
    def list_models():
        available = []
        for model in models:
            name = providers.provider_name_for_model(model)
            configured = (name == "mock"
                          or (name == "openai" and os.environ.get(providers.ENV_OPENAI_KEY))
                          or (name == "gemini" and os.environ.get(providers.ENV_GEMINI_KEY)))
            available.append({"id": model, "provider": name,
                              "configured": bool(configured)})
        return {"models": available}

    @app.post("/api/convert")
    def convert(image: UploadFile, model: str = Form(...)):
        if model not in models:
            return _error(400, f"unknown model id {model!r}")
        data = image.file.read(max_image_bytes + 1)
        if len(data) > max_image_bytes:
            return _error(400, f"image exceeds the {max_image_bytes} byte limit")
        media_type = _media_type_of(image)
        cfg = providers.config_for_model(model)
        try:
            result = providers.convert_image(cfg, data, media_type)
        except providers.UnsupportedImageType as exc:
            return _error(400, str(exc))
        except providers.InvalidOutput as exc:
            return _error(422, str(exc))
        except providers.ProviderUnreachable as exc:
            return _error(502, str(exc))
        session = store.create(parse_flowchart(result.code))
        return {"document_id": session.document_id, "code": session.code,
                "revision": session.revision}

    @app.post("/api/edit")
    async def edit(request: Request):
        body = await request.json()
        document_id = body.get("document_id")
        session = store.get(document_id) if document_id else None
        if session is None:
            return _error(404, f"unknown document {document_id!r}")
        try:
            command = edits.command_from_json(body.get("command"))
        except ValueError as exc:
            return _error(400, str(exc))
        with session.lock:
            try:
                graph = edits.apply_edit(session.graph, command)
            except (edits.UnknownId, edits.DuplicateEdge) as exc:
                return _error(409, str(exc))
            except (edits.EmptyLabel, ValueError) as exc:
                return _error(400, str(exc))
            session.graph = graph
            session.code = serialize(graph)
            session.revision += 1
            session.last_modified = time.time()
            return {"code": session.code, "revision": session.revision}

    @app.post("/api/refine")
    async def refine(request: Request):
        body = await request.json()
        document_id = body.get("document_id")
        session = store.get(document_id) if document_id else None
        if session is None:
            return _error(404, f"unknown document {document_id!r}")
        instruction = (body.get("instruction") or "").strip()
        if not instruction:
            return _error(400, "instruction must be non-empty")
        model = body.get("model") or "mock"
        if model not in models:
            return _error(400, f"unknown model id {model!r}")
        cfg = providers.config_for_model(model)
        with session.lock:
            try:
                result = providers.refine_code(cfg, session.code, instruction)
            except providers.ProviderUnreachable as exc:
                return _error(502, str(exc))
            if result.warning is not None:
                return {"code": session.code, "revision": session.revision,
                        "warning": result.warning}
            session.graph = parse_flowchart(result.code)
            session.code = serialize(session.graph)
            session.revision += 1
            session.last_modified = time.time()
            return {"code": session.code, "revision": session.revision}

    @app.post("/api/evaluate")
    async def evaluate(request: Request):
        body = await request.json()
        pred = body.get("pred", "")
        gold = body.get("gold", "")
        mode = body.get("mode", metrics.MODE_DETERMINISTIC)
        judge = None
        if mode == metrics.MODE_JUDGE:
            judge = providers.config_for_model(body.get("judge_model", "gpt-4.1"))
        try:
            report = metrics.evaluate_pair(pred, gold, mode=mode, judge=judge)
        except ValueError as exc:
            return _error(400, str(exc))
        except (providers.ProviderUnreachable, metrics.MalformedJudgeOutput) as exc:
            return _error(502, str(exc))
        return report.to_dict()

    @app.get("/api/export/{document_id}")
    def export(document_id: str, format: str = "mmd"):
        session = store.get(document_id)
        if session is None:
            return _error(404, f"unknown document {document_id!r}")
        if format != "mmd":
            return _error(400, f"format {format!r} is not served here; "
                               "SVG export happens in the client")
        headers = {"Content-Disposition":
                   f'attachment; filename="{document_id}.mmd"'}
        return PlainTextResponse(session.code, headers=headers)

    if static_dir is not None and os.path.isdir(static_dir):
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=static_dir, html=True))
    return app


def main() -> None:
    """Entry point for ``f2m serve``."""
    import uvicorn
    port = int(os.environ.get(ENV_PORT, "8000"))
    frontend = os.path.join(os.path.dirname(__file__), "..", "..", "frontend", "dist")
    uvicorn.run(create_app(static_dir=frontend if os.path.isdir(frontend) else None),
                host="127.0.0.1", port=port)

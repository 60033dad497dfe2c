"""Vision-language provider clients: convert, refine, judge.

One request/response surface over two wire dialects (an OpenAI-style
chat-completions endpoint and a Gemini-style generate-content endpoint)
plus a deterministic mock for offline use.  Every request is sent with
temperature 0.  Credentials come from the environment and are kept out
of reprs, logs, and error messages.
"""

from __future__ import annotations

import base64
import hashlib
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Union

import httpx

from . import prompts
from .mermaid import (EmptyOutput, SyntaxReport, Tier, sanitize_model_output,
                      validate)

SUPPORTED_IMAGE_TYPES = ("image/png", "image/jpeg", "image/webp")

ENV_OPENAI_KEY = "F2M_OPENAI_API_KEY"
ENV_GEMINI_KEY = "F2M_GEMINI_API_KEY"
ENV_MOCK_FIXTURES = "F2M_MOCK_FIXTURES"
ENV_BASE_URL_PREFIX = "F2M_PROVIDER_BASE_URL_"

_DEFAULT_BASE_URLS = {
    "openai": "https://api.openai.com/v1",
    "gemini": "https://generativelanguage.googleapis.com/v1beta",
}


class UnsupportedImageType(Exception):
    """The image media type is not one of PNG, JPEG, or WEBP."""


class ProviderUnreachable(Exception):
    """The provider endpoint failed, or credentials are not configured."""


class InvalidOutput(Exception):
    """The model never produced Valid or Repaired Mermaid within the retry budget."""


class MalformedJudgeOutput(Exception):
    """The judge reply violates the one-line CSV contract."""


@dataclass
class ProviderConfig:
    """Connection settings for one model endpoint.

    The credential is environment-sourced and excluded from repr so it
    can never leak through logs or error messages.
    """

    name: str
    model: str
    base_url: Optional[str] = None
    api_key: Optional[str] = field(default=None, repr=False)
    timeout: float = 60.0
    max_retries: int = 2

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


@dataclass(frozen=True)
class ConvertRequest:
    image: bytes
    media_type: str


@dataclass(frozen=True)
class RefineRequest:
    code: str
    instruction: str


@dataclass(frozen=True)
class JudgeRequest:
    prompt: str


ProviderRequest = Union[ConvertRequest, RefineRequest, JudgeRequest]


@dataclass(frozen=True)
class ProviderResponse:
    """Raw reply text, captured verbatim before any sanitization."""

    text: str
    latency_ms: float
    provider: str
    model: str


def request_digest(request: ProviderRequest) -> str:
    """Stable content digest of a request; the mock fixture key."""
    h = hashlib.sha256()
    if isinstance(request, ConvertRequest):
        h.update(b"convert\x00")
        h.update(request.media_type.encode())
        h.update(b"\x00")
        h.update(request.image)
    elif isinstance(request, RefineRequest):
        h.update(b"refine\x00")
        h.update(request.code.encode())
        h.update(b"\x00")
        h.update(request.instruction.encode())
    else:
        h.update(b"judge\x00")
        h.update(request.prompt.encode())
    return h.hexdigest()


class MockProvider:
    """Deterministic offline provider backed by a fixture directory.

    Fixtures are ``<request digest>.txt`` files; byte-identical requests
    always replay byte-identical responses.  Requests without a fixture
    fall back to fixed defaults (a two-node diagram for conversion, the
    unchanged code for refinement, all-maximum judge lines) so every
    pipeline stays runnable offline without preparation.
    """

    DEFAULT_CONVERT = "flowchart TD\nA[Start] --> B[End]"
    DEFAULT_JUDGE_SYMBOLIC = "1.000,1.000,1.000,1.000,1.000,1.000"
    DEFAULT_JUDGE_STRUCTURAL = "5,5,2,5,3"

    def __init__(self, fixtures_dir: str | os.PathLike | None = None,
                 model: str = "mock"):
        self.fixtures_dir = Path(fixtures_dir) if fixtures_dir else None
        self.model = model

    def _fixture_path(self, request: ProviderRequest) -> Path | None:
        if self.fixtures_dir is None:
            return None
        return self.fixtures_dir / f"{request_digest(request)}.txt"

    def record(self, request: ProviderRequest, text: str) -> Path:
        """Write the fixture file this request will replay."""
        if self.fixtures_dir is None:
            raise ValueError("mock provider has no fixtures directory")
        self.fixtures_dir.mkdir(parents=True, exist_ok=True)
        path = self._fixture_path(request)
        path.write_text(text, encoding="utf-8")
        return path

    def complete(self, request: ProviderRequest) -> ProviderResponse:
        start = time.perf_counter()
        path = self._fixture_path(request)
        if path is not None and path.exists():
            text = path.read_text(encoding="utf-8")
        elif isinstance(request, ConvertRequest):
            text = self.DEFAULT_CONVERT
        elif isinstance(request, RefineRequest):
            text = request.code
        else:
            text = (self.DEFAULT_JUDGE_STRUCTURAL
                    if "structural_accuracy" in request.prompt
                    else self.DEFAULT_JUDGE_SYMBOLIC)
        latency = (time.perf_counter() - start) * 1000.0
        return ProviderResponse(text, latency, "mock", self.model)


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


class OpenAIChatClient:
    """Chat-completions dialect; images ride inline as base64 data URLs."""

    def __init__(self, cfg: ProviderConfig):
        self.cfg = cfg

    def _messages(self, request: ProviderRequest) -> list[dict]:
        if isinstance(request, ConvertRequest):
            data_url = f"data:{request.media_type};base64,{_b64(request.image)}"
            return [
                {"role": "system",
                 "content": prompts.load(prompts.CONVERT_PROMPT_VERSION)},
                {"role": "user", "content": [
                    {"type": "image_url", "image_url": {"url": data_url}},
                ]},
            ]
        if isinstance(request, RefineRequest):
            body = prompts.fill(prompts.load(prompts.REFINE_PROMPT_VERSION),
                                code=request.code, instruction=request.instruction)
            return [{"role": "user", "content": body}]
        return [{"role": "user", "content": request.prompt}]

    def build_payload(self, request: ProviderRequest) -> dict:
        return {
            "model": self.cfg.model,
            "messages": self._messages(request),
            "temperature": 0,
        }

    def complete(self, request: ProviderRequest) -> ProviderResponse:
        if not self.cfg.api_key:
            raise ProviderUnreachable(
                f"no API key configured for provider {self.cfg.name!r}")
        headers = {"Authorization": f"Bearer {self.cfg.api_key}"}
        start = time.perf_counter()
        try:
            resp = httpx.post(f"{self.cfg.base_url}/chat/completions",
                              json=self.build_payload(request), headers=headers,
                              timeout=self.cfg.timeout)
            resp.raise_for_status()
            text = resp.json()["choices"][0]["message"]["content"]
        except Exception as exc:
            raise ProviderUnreachable(
                f"provider {self.cfg.name!r} request failed: "
                f"{type(exc).__name__}") from exc
        latency = (time.perf_counter() - start) * 1000.0
        return ProviderResponse(text, latency, self.cfg.name, self.cfg.model)


class GeminiClient:
    """Generate-content dialect; images ride as inline_data parts."""

    def __init__(self, cfg: ProviderConfig):
        self.cfg = cfg

    def _parts(self, request: ProviderRequest) -> list[dict]:
        if isinstance(request, ConvertRequest):
            return [
                {"text": prompts.load(prompts.CONVERT_PROMPT_VERSION)},
                {"inline_data": {"mime_type": request.media_type,
                                 "data": _b64(request.image)}},
            ]
        if isinstance(request, RefineRequest):
            body = prompts.fill(prompts.load(prompts.REFINE_PROMPT_VERSION),
                                code=request.code, instruction=request.instruction)
            return [{"text": body}]
        return [{"text": request.prompt}]

    def build_payload(self, request: ProviderRequest) -> dict:
        return {
            "contents": [{"role": "user", "parts": self._parts(request)}],
            "generationConfig": {"temperature": 0},
        }

    def complete(self, request: ProviderRequest) -> ProviderResponse:
        if not self.cfg.api_key:
            raise ProviderUnreachable(
                f"no API key configured for provider {self.cfg.name!r}")
        url = (f"{self.cfg.base_url}/models/{self.cfg.model}:generateContent"
               f"?key={self.cfg.api_key}")
        start = time.perf_counter()
        try:
            resp = httpx.post(url, json=self.build_payload(request),
                              timeout=self.cfg.timeout)
            resp.raise_for_status()
            data = resp.json()
            text = data["candidates"][0]["content"]["parts"][0]["text"]
        except Exception as exc:
            raise ProviderUnreachable(
                f"provider {self.cfg.name!r} request failed: "
                f"{type(exc).__name__}") from exc
        latency = (time.perf_counter() - start) * 1000.0
        return ProviderResponse(text, latency, self.cfg.name, self.cfg.model)


def provider_name_for_model(model: str) -> str:
    if model == "mock" or model.startswith("mock-"):
        return "mock"
    if model.startswith("gemini"):
        return "gemini"
    return "openai"


def config_for_model(model: str, *, timeout: float = 60.0,
                     max_retries: int = 2) -> ProviderConfig:
    """Resolve a model id to a ProviderConfig using the environment.

    ``F2M_PROVIDER_BASE_URL_<NAME>`` overrides the per-provider base URL;
    for the mock provider the base URL is the fixtures directory (or
    ``F2M_MOCK_FIXTURES``).
    """
    name = provider_name_for_model(model)
    base_url = os.environ.get(ENV_BASE_URL_PREFIX + name.upper())
    api_key = None
    if name == "openai":
        api_key = os.environ.get(ENV_OPENAI_KEY)
    elif name == "gemini":
        api_key = os.environ.get(ENV_GEMINI_KEY)
    elif base_url is None:
        base_url = os.environ.get(ENV_MOCK_FIXTURES)
    if base_url is None:
        base_url = _DEFAULT_BASE_URLS.get(name)
    return ProviderConfig(name=name, model=model, base_url=base_url,
                          api_key=api_key, timeout=timeout,
                          max_retries=max_retries)


def get_client(cfg: ProviderConfig):
    if cfg.name == "mock":
        return MockProvider(cfg.base_url, model=cfg.model)
    if cfg.name == "gemini":
        return GeminiClient(cfg)
    return OpenAIChatClient(cfg)


BACKOFF_BASE_S = 0.5
BACKOFF_CAP_S = 8.0


def _backoff(attempt: int, sleep: Callable[[float], None]) -> None:
    sleep(min(BACKOFF_BASE_S * (2 ** attempt), BACKOFF_CAP_S))


def _complete_with_retries(cfg: ProviderConfig, request: ProviderRequest,
                           sleep: Callable[[float], None]) -> ProviderResponse:
    client = get_client(cfg)
    attempts = cfg.max_retries + 1
    for attempt in range(attempts):
        try:
            return client.complete(request)
        except ProviderUnreachable:
            if attempt + 1 == attempts:
                raise
            _backoff(attempt, sleep)
    raise AssertionError("unreachable")


@dataclass(frozen=True)
class ConvertResult:
    code: str
    tier: Tier
    raw: str


def convert_image(cfg: ProviderConfig, image: bytes, media_type: str,
                  sleep: Callable[[float], None] = time.sleep) -> ConvertResult:
    """Convert an image to sanitized, validated Mermaid source.

    The reply is sanitized and graded; an Invalid or empty reply is
    retried within the same attempt budget as network failures.  The
    returned code carries tier Valid or Repaired.
    """
    if media_type not in SUPPORTED_IMAGE_TYPES:
        raise UnsupportedImageType(
            f"media type {media_type!r} is not supported "
            f"(expected one of {', '.join(SUPPORTED_IMAGE_TYPES)})")
    request = ConvertRequest(image=image, media_type=media_type)
    client = get_client(cfg)
    attempts = cfg.max_retries + 1
    report: SyntaxReport | None = None
    for attempt in range(attempts):
        try:
            response = client.complete(request)
        except ProviderUnreachable:
            if attempt + 1 == attempts:
                raise
            _backoff(attempt, sleep)
            continue
        try:
            cleaned = sanitize_model_output(response.text)
        except EmptyOutput:
            continue  # deterministic reply defect: retry without backoff
        report = validate(cleaned)
        if report.tier is not Tier.INVALID:
            return ConvertResult(code=report.text, tier=report.tier,
                                 raw=response.text)
    detail = ""
    if report is not None and report.error_message:
        detail = (f" (last error: line {report.error_line}, "
                  f"column {report.error_column}: {report.error_message})")
    raise InvalidOutput(
        f"model produced no valid Mermaid after {attempts} attempt(s){detail}")


@dataclass(frozen=True)
class RefineResult:
    code: str
    warning: Optional[str] = None
    raw: Optional[str] = None


def refine_code(cfg: ProviderConfig, code: str, instruction: str,
                sleep: Callable[[float], None] = time.sleep) -> RefineResult:
    """Apply a natural-language instruction to existing Mermaid code.

    The reply is sanitized and validated; when it does not grade Valid or
    Repaired the original code is returned unchanged with a warning, so
    user state is never lost.
    """
    if not instruction or not instruction.strip():
        raise ValueError("instruction must be non-empty")
    request = RefineRequest(code=code, instruction=instruction.strip())
    response = _complete_with_retries(cfg, request, sleep)
    try:
        cleaned = sanitize_model_output(response.text)
    except EmptyOutput:
        return RefineResult(code=code, raw=response.text,
                            warning="model reply contained no Mermaid code; "
                                    "keeping the current diagram")
    report = validate(cleaned)
    if report.tier is Tier.INVALID:
        return RefineResult(code=code, raw=response.text,
                            warning="model reply was not valid Mermaid; "
                                    "keeping the current diagram")
    return RefineResult(code=report.text, raw=response.text)


def _judge(cfg: ProviderConfig, prompt_version: str, pred: str, gold: str,
           sleep: Callable[[float], None]) -> str:
    if not pred.strip() or not gold.strip():
        raise ValueError("judge inputs must be non-empty")
    prompt = prompts.fill(prompts.load(prompt_version), pred=pred, gold=gold)
    response = _complete_with_retries(cfg, JudgeRequest(prompt=prompt), sleep)
    line = response.text.strip()
    if not line or "\n" in line:
        raise MalformedJudgeOutput("judge reply must be exactly one line")
    return line


def judge_symbolic(cfg: ProviderConfig, pred: str, gold: str,
                   sleep: Callable[[float], None] = time.sleep) -> str:
    """Ask the judge for the six symbolic scores; returns the raw CSV line."""
    return _judge(cfg, prompts.JUDGE_SYMBOLIC_PROMPT_VERSION, pred, gold, sleep)


def judge_structural(cfg: ProviderConfig, pred: str, gold: str,
                     sleep: Callable[[float], None] = time.sleep) -> str:
    """Ask the judge for the five structural scores; returns the raw CSV line."""
    return _judge(cfg, prompts.JUDGE_STRUCTURAL_PROMPT_VERSION, pred, gold, sleep)

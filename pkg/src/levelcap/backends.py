"""Inference-backend abstraction: chat completion, text embedding, mocks.

The HTTP implementation speaks the OpenAI-compatible chat-completions wire
shape (messages with text and base64 image parts), which all target models
can be served behind. The scripted mock is fully deterministic and is what
tests and the synthetic demo run against.
"""

from __future__ import annotations

import base64
import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import requests

from .hashing import fnv1a64
from .jsonl import JsonlAppender
from .tokens import tokenize

logger = logging.getLogger(__name__)

MAX_IMAGES = 4
DEFAULT_MOCK_EMBED_DIM = 64


class BackendError(Exception):
    """Base class for backend call failures."""


class BackendTimeout(BackendError):
    """Request timed out or the endpoint was unreachable."""


class HttpStatusError(BackendError):
    def __init__(self, status: int, body: str = ""):
        super().__init__(f"HTTP {status}: {body[:200]}")
        self.status = status


class EmptyResponse(BackendError):
    """The endpoint answered with blank text."""


class AuthMissing(BackendError):
    """The profile's auth environment variable is unset."""


class DimensionMismatch(BackendError):
    """Embedding provider returned a vector of unexpected length."""


@dataclass
class BackendProfile:
    """Named inference endpoint plus sampling parameters for one stage."""

    name: str
    endpoint: str = "mock"
    model_id: str = "mock-model"
    temperature: float = 0.0
    top_p: float = 1.0
    repetition_penalty: float = 1.0
    max_output_tokens: int = 1024
    timeout_s: float = 60.0
    auth_env_var: str = ""
    quantization: str | None = None  # informational only; a server-side concern
    embedding_dim: int | None = None
    concurrency: int = 4

    def validate(self) -> None:
        if not self.name:
            raise ValueError("profile name must be non-empty")
        if self.temperature < 0:
            raise ValueError(f"{self.name}: temperature must be >= 0")
        if not (0 < self.top_p <= 1):
            raise ValueError(f"{self.name}: top_p must be in (0, 1]")
        if self.repetition_penalty < 1:
            raise ValueError(f"{self.name}: repetition_penalty must be >= 1")
        if self.max_output_tokens <= 0:
            raise ValueError(f"{self.name}: max_output_tokens must be positive")
        if self.timeout_s <= 0:
            raise ValueError(f"{self.name}: timeout_s must be positive")
        if self.concurrency <= 0:
            raise ValueError(f"{self.name}: concurrency must be positive")

    @property
    def is_mock(self) -> bool:
        return self.endpoint == "mock"


def default_profiles() -> dict[str, BackendProfile]:
    """Stage profiles with the production sampling settings."""
    return {
        "metadata_filter": BackendProfile(
            name="metadata_filter",
            endpoint="mock",
            model_id="Mistral-Nemo-Instruct-2407",
            temperature=0.3,
            top_p=0.95,
        ),
        "dense_description": BackendProfile(
            name="dense_description",
            endpoint="mock",
            model_id="InternVL2-40B",
            temperature=0.70,
            top_p=0.95,
            repetition_penalty=1.10,
        ),
        "level_elaboration": BackendProfile(
            name="level_elaboration",
            endpoint="mock",
            model_id="Qwen2.5-72B",
            temperature=0.70,
            top_p=0.80,
            repetition_penalty=1.05,
            quantization="8bit",
        ),
        "ethical_filter": BackendProfile(
            name="ethical_filter",
            endpoint="mock",
            model_id="Qwen2.5-14B",
            temperature=0.0,
            top_p=0.90,
        ),
        "embedding": BackendProfile(
            name="embedding",
            endpoint="mock",
            model_id="sentence-embedder",
            embedding_dim=DEFAULT_MOCK_EMBED_DIM,
        ),
    }


@dataclass
class CompletionRequest:
    system_prompt: str
    user_prompt: str
    images: list[str] = field(default_factory=list)
    profile: str = ""

    def __post_init__(self):
        if not self.system_prompt.strip() or not self.user_prompt.strip():
            raise ValueError("prompts must be non-empty")
        if len(self.images) > MAX_IMAGES:
            raise ValueError(f"at most {MAX_IMAGES} images per request, got {len(self.images)}")

    @property
    def text(self) -> str:
        return self.system_prompt + "\n" + self.user_prompt


class AuditLog:
    """Thread-safe JSONL request/response log; one line per attempt."""

    def __init__(self, path: str | Path):
        self._writer = JsonlAppender(path)
        self._lock = threading.Lock()

    def record(self, entry: dict) -> None:
        with self._lock:
            self._writer.append(entry)

    def close(self) -> None:
        self._writer.close()


def mock_embedding(text: str, dim: int = DEFAULT_MOCK_EMBED_DIM) -> np.ndarray:
    """Deterministic hashed bag-of-words embedding, L2-normalized.

    Order-insensitive by construction: tokens are counted into hash buckets,
    so any permutation of the same tokens embeds identically. All-punctuation
    text yields the zero vector.
    """
    vec = np.zeros(dim, dtype=np.float64)
    for token in tokenize(text):
        vec[fnv1a64(token) % dim] += 1.0
    norm = float(np.linalg.norm(vec))
    return vec / norm if norm > 0 else vec


@dataclass
class MockRule:
    """First matching rule answers. String matchers are substring tests."""

    match: str | Callable[[CompletionRequest], bool]
    response: str | Callable[[CompletionRequest], str]

    def matches(self, request: CompletionRequest) -> bool:
        if callable(self.match):
            return self.match(request)
        return self.match in request.text

    def answer(self, request: CompletionRequest) -> str:
        return self.response(request) if callable(self.response) else self.response


class ScriptedMockBackend:
    """Deterministic scripted backend; same request, same response, always."""

    def __init__(
        self,
        rules: Sequence[MockRule] = (),
        default: str | Callable[[CompletionRequest], str] = "",
        embed_dim: int = DEFAULT_MOCK_EMBED_DIM,
        profile: BackendProfile | None = None,
    ):
        self.rules = list(rules)
        self.default = default
        self.embed_dim = embed_dim
        self.profile = profile or BackendProfile(name="mock")
        self.requests: list[CompletionRequest] = []
        self.embed_calls: list[str] = []
        self._lock = threading.Lock()

    @property
    def call_count(self) -> int:
        return len(self.requests)

    def complete(self, request: CompletionRequest) -> str:
        with self._lock:
            self.requests.append(request)
        for rule in self.rules:
            if rule.matches(request):
                return rule.answer(request)
        return self.default(request) if callable(self.default) else self.default

    def embed(self, text: str) -> np.ndarray:
        if not text:
            raise ValueError("embed requires non-empty text")
        with self._lock:
            self.embed_calls.append(text)
        return mock_embedding(text, self.embed_dim)


class HttpBackend:
    """OpenAI-compatible chat/embeddings client with bounded retries.

    Retries up to 3 attempts with exponential backoff (1s base, factor 2)
    on timeouts and 5xx; 4xx errors are never retried. A per-profile
    semaphore bounds in-flight pressure on the inference server.
    """

    MAX_ATTEMPTS = 3
    BACKOFF_BASE_S = 1.0
    BACKOFF_FACTOR = 2.0

    def __init__(
        self,
        profile: BackendProfile,
        audit_log: AuditLog | None = None,
        sleep: Callable[[float], None] = time.sleep,
        session: requests.Session | None = None,
    ):
        profile.validate()
        self.profile = profile
        self.audit_log = audit_log
        self._sleep = sleep
        self._session = session or requests.Session()
        self._semaphore = threading.Semaphore(profile.concurrency)

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.profile.auth_env_var:
            token = os.environ.get(self.profile.auth_env_var)
            if not token:
                raise AuthMissing(
                    f"environment variable {self.profile.auth_env_var} is not set"
                )
            headers["Authorization"] = f"Bearer {token}"
        return headers

    @staticmethod
    def _image_part(image_path: str) -> dict:
        data = Path(image_path).read_bytes()
        encoded = base64.b64encode(data).decode("ascii")
        return {
            "type": "image_url",
            "image_url": {"url": f"data:image/png;base64,{encoded}"},
        }

    def _chat_payload(self, request: CompletionRequest) -> dict:
        content: list[dict] | str
        if request.images:
            content = [{"type": "text", "text": request.user_prompt}]
            content.extend(self._image_part(p) for p in request.images)
        else:
            content = request.user_prompt
        return {
            "model": self.profile.model_id,
            "messages": [
                {"role": "system", "content": request.system_prompt},
                {"role": "user", "content": content},
            ],
            "temperature": self.profile.temperature,
            "top_p": self.profile.top_p,
            "repetition_penalty": self.profile.repetition_penalty,
            "max_tokens": self.profile.max_output_tokens,
        }

    def _post_with_retries(self, url: str, payload: dict, kind: str) -> dict:
        headers = self._headers()
        last_error: BackendError | None = None
        for attempt in range(1, self.MAX_ATTEMPTS + 1):
            started = time.monotonic()
            error: BackendError | None = None
            try:
                resp = self._session.post(
                    url, json=payload, headers=headers, timeout=self.profile.timeout_s
                )
                if resp.status_code >= 400:
                    error = HttpStatusError(resp.status_code, resp.text)
                else:
                    self._audit(kind, attempt, time.monotonic() - started, ok=True)
                    return resp.json()
            except (requests.Timeout, requests.ConnectionError) as exc:
                error = BackendTimeout(str(exc))
            self._audit(kind, attempt, time.monotonic() - started, ok=False, error=error)
            last_error = error
            retryable = isinstance(error, BackendTimeout) or (
                isinstance(error, HttpStatusError) and error.status >= 500
            )
            if not retryable:
                raise error
            if attempt < self.MAX_ATTEMPTS:
                self._sleep(self.BACKOFF_BASE_S * self.BACKOFF_FACTOR ** (attempt - 1))
        raise last_error  # type: ignore[misc]

    def _audit(self, kind: str, attempt: int, latency: float, ok: bool, error=None) -> None:
        if self.audit_log is None:
            return
        self.audit_log.record(
            {
                "ts": time.time(),
                "profile": self.profile.name,
                "kind": kind,
                "attempt": attempt,
                "latency_s": round(latency, 6),
                "ok": ok,
                "error": str(error) if error else None,
            }
        )

    def complete(self, request: CompletionRequest) -> str:
        url = self.profile.endpoint.rstrip("/") + "/chat/completions"
        with self._semaphore:
            data = self._post_with_retries(url, self._chat_payload(request), "complete")
        try:
            text = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise EmptyResponse(f"malformed completion payload: {exc}") from exc
        if not text or not text.strip():
            raise EmptyResponse("endpoint returned blank text")
        return text

    def embed(self, text: str) -> np.ndarray:
        if not text:
            raise ValueError("embed requires non-empty text")
        url = self.profile.endpoint.rstrip("/") + "/embeddings"
        payload = {"model": self.profile.model_id, "input": text}
        with self._semaphore:
            data = self._post_with_retries(url, payload, "embed")
        try:
            vector = np.asarray(data["data"][0]["embedding"], dtype=np.float64)
        except (KeyError, IndexError, TypeError) as exc:
            raise EmptyResponse(f"malformed embedding payload: {exc}") from exc
        if self.profile.embedding_dim and vector.shape[0] != self.profile.embedding_dim:
            raise DimensionMismatch(
                f"expected {self.profile.embedding_dim} dims, got {vector.shape[0]}"
            )
        return vector


Backend = ScriptedMockBackend | HttpBackend


def _profile_from_dict(name: str, raw: dict) -> BackendProfile:
    known = {
        "endpoint",
        "model_id",
        "temperature",
        "top_p",
        "repetition_penalty",
        "max_output_tokens",
        "timeout_s",
        "auth_env_var",
        "quantization",
        "embedding_dim",
        "concurrency",
    }
    fields = {k: v for k, v in raw.items() if k in known}
    return BackendProfile(name=name, **fields)


def load_profiles(config: dict) -> dict[str, BackendProfile]:
    """Parse and range-validate profiles from a config mapping.

    Validation happens here, at load, not at call time.
    """
    profiles: dict[str, BackendProfile] = {}
    for name, raw in config.get("profiles", {}).items():
        profile = _profile_from_dict(name, raw)
        profile.validate()
        profiles[name] = profile
    return profiles


def build_backend(
    profile: BackendProfile,
    script: list[dict] | None = None,
    audit_log: AuditLog | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> Backend:
    """Instantiate the backend a profile points at (mock or HTTP)."""
    if profile.is_mock:
        rules = [MockRule(match=r["match"], response=r["response"]) for r in (script or [])]
        default = ""
        for r in script or []:
            if r.get("default"):
                default = r["response"]
        return ScriptedMockBackend(
            rules=rules,
            default=default,
            embed_dim=profile.embedding_dim or DEFAULT_MOCK_EMBED_DIM,
            profile=profile,
        )
    return HttpBackend(profile, audit_log=audit_log, sleep=sleep)


def load_backend_config(path: str | Path) -> dict:
    """Read a backend config file (JSON) and validate its profiles."""
    config = json.loads(Path(path).read_text(encoding="utf-8"))
    load_profiles(config)  # raises on invalid ranges
    return config

"""Model backends: a deterministic scripted backend and an HTTP chat-completion client.

Neither backend raises on model-side failure. Problems come back as a
``CompletionResult`` with ``backend_error`` set and empty text.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol, Sequence

import httpx

REASONING_LEVELS = ("none", "medium")


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    temperature: float = 0.0
    max_output_tokens: int = 16384
    reasoning_level: str = "none"
    model_name: str = ""
    # Routing key for scripted backends (normally the problem id); ignored by remote ones.
    key: str = ""

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")
        if self.max_output_tokens <= 0:
            raise ValueError(f"max_output_tokens must be > 0, got {self.max_output_tokens}")
        if self.reasoning_level not in REASONING_LEVELS:
            raise ValueError(f"reasoning_level must be one of {REASONING_LEVELS}, got {self.reasoning_level!r}")


@dataclass(frozen=True)
class CompletionResult:
    text: str
    prompt_tokens: int = 0
    completion_tokens: int = 0
    latency_ms: int = 0
    backend_error: str | None = None
    token_source: str = "proxy"

    @classmethod
    def failure(cls, error: str, prompt_tokens: int = 0, latency_ms: int = 0) -> CompletionResult:
        return cls("", prompt_tokens, 0, latency_ms, error)


def whitespace_tokens(text: str) -> int:
    return len(text.split())


class Backend(Protocol):
    def complete(self, request: CompletionRequest) -> CompletionResult: ...


def complete(backend: Backend, request: CompletionRequest) -> CompletionResult:
    return backend.complete(request)


Policy = Callable[[CompletionRequest, int], "str | None"]


class ScriptedBackend:
    """Replays canned completions.

    ``script`` is either a list (one global queue) or a mapping from request
    key to a list, so concurrent runs over different problems stay
    deterministic. A callable ``policy(request, ordinal)`` may be given
    instead; returning ``None`` means the script is exhausted.
    """

    def __init__(
        self,
        script: Sequence[str] | dict[str, Sequence[str]] | None = None,
        *,
        policy: Policy | None = None,
        default: Sequence[str] | None = None,
    ) -> None:
        if (script is None) == (policy is None):
            raise ValueError("give exactly one of script or policy")
        self._queues: dict[str, list[str]] | None = None
        if isinstance(script, dict):
            self._queues = {k: list(v) for k, v in script.items()}
        elif script is not None:
            self._queues = {"": list(script)}
        self._keyed = isinstance(script, dict)
        self._default = list(default) if default is not None else None
        self._policy = policy
        self._ordinals: dict[str, int] = {}
        self._lock = threading.Lock()
        self.calls: list[CompletionRequest] = []

    @classmethod
    def from_jsonl(cls, path: str | Path) -> ScriptedBackend:
        """Rows are ``{"key": ..., "text": ...}`` (or ``{"text": ...}`` for a global queue)."""
        keyed: dict[str, list[str]] = {}
        flat: list[str] = []
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                if not line.strip():
                    continue
                try:
                    row = json.loads(line)
                    text = row["text"]
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise ValueError(f"{path}: line {lineno}: bad script row ({exc})") from None
                if "key" in row:
                    keyed.setdefault(str(row["key"]), []).append(text)
                else:
                    flat.append(text)
        if keyed and flat:
            raise ValueError(f"{path}: mixes keyed and unkeyed rows")
        return cls(keyed if keyed else flat)

    def _next(self, request: CompletionRequest) -> str | None:
        key = request.key if self._keyed or self._policy else ""
        with self._lock:
            ordinal = self._ordinals.get(key, 0)
            self._ordinals[key] = ordinal + 1
            self.calls.append(request)
        if self._policy is not None:
            return self._policy(request, ordinal)
        queue = self._queues.get(key)
        if queue is None:
            queue = self._default
        if queue is None or ordinal >= len(queue):
            return None
        return queue[ordinal]

    def complete(self, request: CompletionRequest) -> CompletionResult:
        start = time.perf_counter()
        text = self._next(request)
        latency = int((time.perf_counter() - start) * 1000)
        ptoks = whitespace_tokens(request.prompt)
        if text is None:
            return CompletionResult.failure("script exhausted", ptoks, latency)
        if not text:
            return CompletionResult.failure("empty completion", ptoks, latency)
        return CompletionResult(text, ptoks, whitespace_tokens(text), latency, None, "proxy")


@dataclass
class RemoteConfig:
    base_url: str
    api_key: str = ""
    model: str = ""
    timeout_s: float = 600.0
    retries: int = 3
    backoff_s: float = 1.0
    extra_headers: dict = field(default_factory=dict)

    @classmethod
    def from_env(cls, environ: dict | None = None) -> RemoteConfig:
        env = os.environ if environ is None else environ
        base = env.get("REPOT_API_BASE", "")
        if not base:
            raise ValueError("REPOT_API_BASE is not set")
        return cls(base_url=base, api_key=env.get("REPOT_API_KEY", ""), model=env.get("REPOT_MODEL", ""))


class RemoteBackend:
    """OpenAI-style ``/chat/completions`` client with bounded retries."""

    def __init__(self, config: RemoteConfig, client: httpx.Client | None = None) -> None:
        self.config = config
        self._client = client or httpx.Client(timeout=config.timeout_s)

    def _payload(self, request: CompletionRequest) -> dict:
        body = {
            "model": request.model_name or self.config.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_output_tokens,
        }
        if request.reasoning_level != "none":
            body["reasoning_effort"] = request.reasoning_level
        return body

    def complete(self, request: CompletionRequest) -> CompletionResult:
        url = self.config.base_url.rstrip("/") + "/chat/completions"
        headers = {"Content-Type": "application/json", **self.config.extra_headers}
        if self.config.api_key:
            headers["Authorization"] = f"Bearer {self.config.api_key}"
        payload = self._payload(request)
        start = time.perf_counter()
        cause = "unknown error"
        for attempt in range(self.config.retries):
            if attempt:
                time.sleep(self.config.backoff_s * 2 ** (attempt - 1))
            try:
                resp = self._client.post(url, json=payload, headers=headers)
            except httpx.HTTPError as exc:
                cause = f"transport error: {exc.__class__.__name__}: {exc}"
                continue
            if resp.status_code in (401, 403):
                cause = f"auth failure: HTTP {resp.status_code}"
                break
            if resp.status_code >= 400:
                cause = f"HTTP {resp.status_code}: {resp.text[:200]}"
                if resp.status_code == 429 or resp.status_code >= 500:
                    continue
                break
            latency = max(1, int((time.perf_counter() - start) * 1000))
            try:
                data = resp.json()
                text = data["choices"][0]["message"]["content"] or ""
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                cause = f"malformed response: {exc}"
                break
            if not text:
                cause = "empty completion"
                break
            usage = data.get("usage") or {}
            if "prompt_tokens" in usage and "completion_tokens" in usage:
                return CompletionResult(
                    text, int(usage["prompt_tokens"]), int(usage["completion_tokens"]), latency, None, "usage"
                )
            return CompletionResult(
                text, whitespace_tokens(request.prompt), whitespace_tokens(text), latency, None, "proxy"
            )
        latency = int((time.perf_counter() - start) * 1000)
        return CompletionResult.failure(cause, whitespace_tokens(request.prompt), latency)

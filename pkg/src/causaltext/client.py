"""Completion backends: remote HTTP endpoint, template baseline, replay cache.

The template backend verbalizes each edge of the linearized component found
in the prompt as "A increases/decreases B." and is the calibration oracle
for the reference-based metrics. The replay cache stores every remote
completion keyed by a content hash of the request, so a finished run can be
re-executed bit-identically with zero network traffic.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import httpx

from .errors import (
    AuthError,
    BackendError,
    ReplayMissError,
    RetryExhaustedError,
)
from .graph import Component, Polarity
from .linearize import parse_linearized

API_KEY_ENV = "CAUSALTEXT_API_KEY"
DEFAULT_MAX_TOKENS = 256
RETRY_STATUS = (429, 500, 502, 503, 504)


@dataclass(frozen=True)
class CompletionRequest:
    model: str
    prompt: str
    temperature: float = 0.6
    max_tokens: int = DEFAULT_MAX_TOKENS

    def __post_init__(self):
        if not self.prompt:
            raise BackendError("prompt must be non-empty", code="empty-prompt")
        if not 0.0 <= self.temperature <= 2.0:
            raise BackendError(
                f"temperature must be in [0, 2] (got {self.temperature})", code="bad-temperature"
            )
        if self.max_tokens < 1:
            raise BackendError("max_tokens must be >= 1", code="bad-max-tokens")

    def cache_key(self) -> str:
        payload = json.dumps(
            {
                "model": self.model,
                "prompt": self.prompt,
                "temperature": self.temperature,
                "max_tokens": self.max_tokens,
            },
            sort_keys=True,
            ensure_ascii=False,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class CompletionResponse:
    text: str
    finish_reason: str  # stop | length | error
    latency_ms: float
    backend: str


def template_generate(component: Component) -> str:
    """One sentence per edge, in edge order: '{source} increases {target}.'"""
    sentences = []
    for src_label, polarity, tgt_label in component.labeled_edges():
        verb = "increases" if polarity is Polarity.POSITIVE else "decreases"
        sentences.append(f"{src_label} {verb} {tgt_label}.")
    return " ".join(sentences)


def extract_linearized(prompt: str) -> str:
    """Return the last <S>...<E> span in a prompt (the test query)."""
    start = prompt.rfind("<S>")
    if start < 0:
        raise BackendError("prompt contains no linearized span", code="no-span")
    end = prompt.find("<E>", start)
    if end < 0:
        raise BackendError("linearized span is not terminated", code="no-span")
    return prompt[start : end + len("<E>")]


class ReplayCache:
    """Append-only, content-addressed store of completions.

    One JSON record per line; writes are serialized and idempotent, so a
    request that is already cached never produces a second line.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._records: dict[str, dict] = {}
        if self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    record = json.loads(line)
                    self._records[record["request_hash"]] = record

    def __len__(self) -> int:
        return len(self._records)

    def get(self, request: CompletionRequest) -> str | None:
        record = self._records.get(request.cache_key())
        return record["text"] if record else None

    def put(self, request: CompletionRequest, text: str) -> None:
        key = request.cache_key()
        with self._lock:
            if key in self._records:
                return
            record = {
                "request_hash": key,
                "model": request.model,
                "prompt": request.prompt,
                "temperature": request.temperature,
                "max_tokens": request.max_tokens,
                "text": text,
            }
            self._records[key] = record
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as handle:
                handle.write(json.dumps(record, ensure_ascii=False) + "\n")


class TemplateBackend:
    """Deterministic per-edge verbalization; never touches the network."""

    name = "template"

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        started = time.perf_counter()
        span = extract_linearized(request.prompt)
        component, _ = parse_linearized(span)
        text = template_generate(component)
        latency = (time.perf_counter() - started) * 1000.0
        return CompletionResponse(
            text=text, finish_reason="stop", latency_ms=latency, backend=self.name
        )


class ReplayBackend:
    """Serve completions from a warm cache; a miss is an error."""

    name = "replay"

    def __init__(self, cache: ReplayCache | str | Path):
        self.cache = cache if isinstance(cache, ReplayCache) else ReplayCache(cache)

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        text = self.cache.get(request)
        if text is None:
            raise ReplayMissError(
                f"no cached completion for request {request.cache_key()[:12]}"
            )
        return CompletionResponse(text=text, finish_reason="stop", latency_ms=0.0, backend=self.name)


class RemoteBackend:
    """HTTP completion endpoint with bounded retries and exponential backoff.

    Retries only transient failures (timeouts, 429, 5xx). Successful
    responses are post-processed (whitespace trim, optional stop-sequence
    truncation) and recorded to the replay cache when one is attached.
    """

    name = "remote"

    def __init__(
        self,
        base_url: str,
        *,
        api_key: str | None = None,
        api_key_env: str = API_KEY_ENV,
        cache: ReplayCache | None = None,
        max_attempts: int = 5,
        backoff_start: float = 1.0,
        backoff_cap: float = 32.0,
        timeout: float = 30.0,
        stop: str | None = None,
        transport: httpx.BaseTransport | None = None,
        sleeper: Callable[[float], None] = time.sleep,
    ):
        self.base_url = base_url.rstrip("/")
        self._api_key = api_key if api_key is not None else os.environ.get(api_key_env)
        self._api_key_env = api_key_env
        self.cache = cache
        self.max_attempts = max_attempts
        self.backoff_start = backoff_start
        self.backoff_cap = backoff_cap
        self.stop = stop
        self._sleep = sleeper
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def close(self) -> None:
        self._client.close()

    def _postprocess(self, text: str) -> str:
        if self.stop and self.stop in text:
            text = text.split(self.stop, 1)[0]
        return text.strip()

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        if not self._api_key:
            raise AuthError(f"set {self._api_key_env} to use the remote backend")
        url = f"{self.base_url}/completions"
        headers = {"Authorization": f"Bearer {self._api_key}"}
        payload = {
            "model": request.model,
            "prompt": request.prompt,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        started = time.perf_counter()
        last_failure = "no attempt made"
        for attempt in range(1, self.max_attempts + 1):
            try:
                response = self._client.post(url, json=payload, headers=headers)
            except httpx.TimeoutException as exc:
                last_failure = f"timeout: {exc}"
            else:
                if response.status_code == 200:
                    body = response.json()
                    try:
                        choice = body["choices"][0]
                        text = self._postprocess(str(choice["text"]))
                        finish = str(choice.get("finish_reason") or "stop")
                    except (KeyError, IndexError, TypeError) as exc:
                        raise BackendError(
                            f"malformed completion response: {exc}", code="bad-response"
                        ) from exc
                    latency = (time.perf_counter() - started) * 1000.0
                    if self.cache is not None:
                        self.cache.put(request, text)
                    return CompletionResponse(
                        text=text, finish_reason=finish, latency_ms=latency, backend=self.name
                    )
                if response.status_code not in RETRY_STATUS:
                    raise BackendError(
                        f"endpoint returned {response.status_code}: {response.text[:200]}",
                        code="http-error",
                    )
                last_failure = f"status {response.status_code}"
            if attempt < self.max_attempts:
                delay = min(self.backoff_cap, self.backoff_start * 2 ** (attempt - 1))
                self._sleep(delay)
        raise RetryExhaustedError(
            f"gave up after {self.max_attempts} attempts (last failure: {last_failure})"
        )


class CachingBackend:
    """Consult the replay cache first; fall through to the inner backend."""

    def __init__(self, inner, cache: ReplayCache):
        self.inner = inner
        self.cache = cache
        self.name = inner.name

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        cached = self.cache.get(request)
        if cached is not None:
            return CompletionResponse(
                text=cached, finish_reason="stop", latency_ms=0.0, backend="replay"
            )
        response = self.inner.complete(request)
        self.cache.put(request, response.text)
        return response


def complete(request: CompletionRequest, backend) -> CompletionResponse:
    return backend.complete(request)


def complete_many(
    requests: Sequence[CompletionRequest],
    backend,
    *,
    max_workers: int = 4,
    return_exceptions: bool = False,
) -> list[CompletionResponse | Exception]:
    """Run requests with bounded concurrency, preserving input order."""
    from concurrent.futures import ThreadPoolExecutor

    def one(request: CompletionRequest):
        try:
            return backend.complete(request)
        except Exception as exc:
            if return_exceptions:
                return exc
            raise

    if max_workers <= 1 or len(requests) <= 1:
        return [one(r) for r in requests]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(one, requests))

"""Completion endpoint clients: live HTTP, response cache, offline replay.

The live client speaks the chat-completion wire protocol: a POST whose body
carries ``model``, ``messages``, ``temperature`` and ``max_tokens``, answered
by ``choices[0].message.content`` plus token usage.  Every completion is
reduced to a :class:`CompletionRecord` keyed by a hash of the request
parameters; records append to a JSONL file that serves both as a cache for
live runs and as a transcript for hermetic replay runs.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .errors import DataError, EndpointError

_RETRYABLE_STATUSES = frozenset({429, 500, 502, 503, 504})
_BACKOFF_BASE_SECONDS = 0.5
_REQUEST_TIMEOUT_SECONDS = 60.0


def prompt_hash(prompt: str, model: str, temperature: float, max_tokens: int) -> str:
    """Stable digest of everything that determines a completion request."""
    payload = json.dumps([prompt, model, temperature, max_tokens], ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    model: str
    api_key_env: str = "DRE_API_KEY"
    temperature: float = 0.0
    max_tokens: int = 256
    requests_per_minute: int = 600
    max_retries: int = 3

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 2.0:
            raise DataError(f"temperature out of range: {self.temperature}")
        if self.max_tokens < 1:
            raise DataError("max_tokens must be >= 1")
        if self.requests_per_minute < 1:
            raise DataError("requests_per_minute must be >= 1")
        if self.max_retries < 0:
            raise DataError("max_retries must be >= 0")

    def url(self) -> str:
        base = self.base_url.rstrip("/")
        if base.endswith("/chat/completions"):
            return base
        return base + "/chat/completions"


@dataclass(frozen=True)
class CompletionRecord:
    prompt_hash: str
    prompt: str
    response: str
    model: str
    prompt_tokens: int
    completion_tokens: int
    latency_ms: float
    timestamp: float


def record_to_dict(record: CompletionRecord) -> dict:
    return {
        "prompt_hash": record.prompt_hash,
        "prompt": record.prompt,
        "response": record.response,
        "model": record.model,
        "prompt_tokens": record.prompt_tokens,
        "completion_tokens": record.completion_tokens,
        "latency_ms": record.latency_ms,
        "timestamp": record.timestamp,
    }


def record_from_dict(data: dict) -> CompletionRecord:
    try:
        return CompletionRecord(
            prompt_hash=data["prompt_hash"],
            prompt=data["prompt"],
            response=data["response"],
            model=data["model"],
            prompt_tokens=int(data.get("prompt_tokens", 0)),
            completion_tokens=int(data.get("completion_tokens", 0)),
            latency_ms=float(data.get("latency_ms", 0.0)),
            timestamp=float(data.get("timestamp", 0.0)),
        )
    except KeyError as exc:
        raise DataError(f"transcript record is missing field {exc}") from None


def write_transcript(records: list[CompletionRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record_to_dict(record), ensure_ascii=False) + "\n")


def read_transcript(path: str | Path) -> list[CompletionRecord]:
    records = []
    try:
        with open(path, encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    records.append(record_from_dict(json.loads(line)))
                except json.JSONDecodeError:
                    raise DataError(f"{path}: line {lineno}: not valid JSON") from None
    except FileNotFoundError:
        raise DataError(f"transcript not found: {path}") from None
    return records


def make_record(
    prompt: str,
    response: str,
    model: str = "scripted",
    temperature: float = 0.0,
    max_tokens: int = 256,
) -> CompletionRecord:
    """A synthetic completion record with fixed timing fields."""
    return CompletionRecord(
        prompt_hash=prompt_hash(prompt, model, temperature, max_tokens),
        prompt=prompt,
        response=response,
        model=model,
        prompt_tokens=len(prompt.split()),
        completion_tokens=len(response.split()),
        latency_ms=0.0,
        timestamp=0.0,
    )


class CompletionClient:
    """Base class: counts completions served, under a lock for threaded runs."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self.calls = 0

    def _count(self) -> None:
        with self._lock:
            self.calls += 1

    def complete(self, prompt: str) -> CompletionRecord:  # pragma: no cover
        raise NotImplementedError


class ConstantClient(CompletionClient):
    """Answers every prompt with the same fixed text."""

    def __init__(self, response: str, model: str = "constant"):
        super().__init__()
        self.response = response
        self.model = model

    def complete(self, prompt: str) -> CompletionRecord:
        self._count()
        return make_record(prompt, self.response, model=self.model)


class ReplayClient(CompletionClient):
    """Serves completions from a recorded transcript; unknown prompts fail hard."""

    def __init__(self, source: str | Path | list[CompletionRecord]):
        super().__init__()
        records = source if isinstance(source, list) else read_transcript(source)
        self._by_prompt = {record.prompt: record for record in records}

    def complete(self, prompt: str) -> CompletionRecord:
        record = self._by_prompt.get(prompt)
        if record is None:
            digest = hashlib.sha256(prompt.encode("utf-8")).hexdigest()[:12]
            raise EndpointError(
                f"no transcript entry for prompt (sha256 {digest}): {prompt[:80]!r}"
            )
        self._count()
        return record


class HttpChatClient(CompletionClient):
    """Live chat-completion client with retries, rate limiting and a cache.

    ``transport`` abstracts the HTTP POST: it takes (url, headers, payload,
    timeout) and returns (status_code, parsed JSON body).  Tests inject
    scripted transports; the default uses ``requests``.  Transient failures
    (HTTP 429/5xx and transport exceptions) back off exponentially and retry
    up to ``max_retries`` times; other error statuses fail immediately.
    """

    def __init__(
        self,
        config: EndpointConfig,
        cache_path: str | Path | None = None,
        transport: Callable[[str, dict, dict, float], tuple[int, dict]] | None = None,
        sleeper: Callable[[float], None] = time.sleep,
        clock: Callable[[], float] = time.time,
    ):
        super().__init__()
        self.config = config
        self.network_requests = 0
        self._transport = transport or _requests_transport
        self._sleeper = sleeper
        self._clock = clock
        self._cache_path = Path(cache_path) if cache_path else None
        self._cache: dict[str, CompletionRecord] = {}
        if self._cache_path and self._cache_path.exists():
            for record in read_transcript(self._cache_path):
                self._cache[record.prompt_hash] = record
        self._min_interval = 60.0 / config.requests_per_minute
        self._last_request_at: float | None = None

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.config.api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        return headers

    def _respect_rate_limit(self) -> None:
        with self._lock:
            now = self._clock()
            if self._last_request_at is not None:
                wait = self._last_request_at + self._min_interval - now
                if wait > 0:
                    self._sleeper(wait)
                    now = self._clock()
            self._last_request_at = now

    def _store(self, record: CompletionRecord) -> None:
        with self._lock:
            self._cache[record.prompt_hash] = record
            if self._cache_path:
                with open(self._cache_path, "a", encoding="utf-8") as handle:
                    handle.write(json.dumps(record_to_dict(record), ensure_ascii=False) + "\n")

    def complete(self, prompt: str) -> CompletionRecord:
        digest = prompt_hash(
            prompt, self.config.model, self.config.temperature, self.config.max_tokens
        )
        cached = self._cache.get(digest)
        if cached is not None:
            self._count()
            return cached

        payload = {
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
        }
        url = self.config.url()
        headers = self._headers()
        last_failure = "no request attempted"
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                self._sleeper(_BACKOFF_BASE_SECONDS * 2 ** (attempt - 1))
            self._respect_rate_limit()
            started = self._clock()
            try:
                with self._lock:
                    self.network_requests += 1
                status, body = self._transport(url, headers, payload, _REQUEST_TIMEOUT_SECONDS)
            except Exception as exc:  # transport-level failure: retryable
                last_failure = f"transport error: {exc}"
                continue
            if status == 200:
                record = self._parse_success(prompt, digest, body, started)
                self._store(record)
                self._count()
                return record
            if status in _RETRYABLE_STATUSES:
                last_failure = f"HTTP {status}: {_error_detail(body)}"
                continue
            raise EndpointError(f"HTTP {status}: {_error_detail(body)}")
        raise EndpointError(
            f"giving up after {self.config.max_retries + 1} attempts; last failure: "
            f"{last_failure}"
        )

    def _parse_success(
        self, prompt: str, digest: str, body: dict, started: float
    ) -> CompletionRecord:
        try:
            content = body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise EndpointError(f"malformed completion body: {str(body)[:200]}") from None
        if not isinstance(content, str):
            raise EndpointError("completion content is not a string")
        usage = body.get("usage") or {}
        now = self._clock()
        return CompletionRecord(
            prompt_hash=digest,
            prompt=prompt,
            response=content,
            model=body.get("model", self.config.model),
            prompt_tokens=int(usage.get("prompt_tokens", 0)),
            completion_tokens=int(usage.get("completion_tokens", 0)),
            latency_ms=(now - started) * 1000.0,
            timestamp=now,
        )


def _error_detail(body) -> str:
    if isinstance(body, dict):
        error = body.get("error")
        if isinstance(error, dict) and "message" in error:
            return str(error["message"])
        return json.dumps(body)[:200]
    return str(body)[:200]


def _requests_transport(url: str, headers: dict, payload: dict, timeout: float):
    import requests

    response = requests.post(url, headers=headers, json=payload, timeout=timeout)
    try:
        body = response.json()
    except ValueError:
        body = {"error": {"message": response.text[:200]}}
    return response.status_code, body

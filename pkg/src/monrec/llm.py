"""LLM wire client plus offline stand-ins (stub, replay, recorder).

Wire contract: POST ``{"model", "prompt", "response_format"}`` to
``LLM_ENDPOINT`` and read ``{"text"}`` back. The model id always comes from
configuration.
"""
from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable


class LlmUnavailable(RuntimeError):
    pass


class LlmTransportError(RuntimeError):
    pass


def prompt_key(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class TokenBucket:
    """Global rate limit shared by concurrent callers."""

    def __init__(self, rate_per_s: float = 5.0, burst: int = 5):
        self.rate = rate_per_s
        self.capacity = burst
        self.tokens = float(burst)
        self.updated = time.monotonic()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = time.monotonic()
                self.tokens = min(self.capacity, self.tokens + (now - self.updated) * self.rate)
                self.updated = now
                if self.tokens >= 1:
                    self.tokens -= 1
                    return
                wait = (1 - self.tokens) / self.rate
            time.sleep(wait)


@dataclass
class LlmClient:
    endpoint: str | None = None
    api_key: str | None = None
    model: str = ""
    timeout: float = 60.0
    retries: int = 2
    mode: str = "disabled"
    bucket: TokenBucket | None = field(default=None, repr=False)

    @classmethod
    def from_env(cls, model: str = "", **kwargs) -> "LlmClient":
        endpoint = os.environ.get("LLM_ENDPOINT")
        if not endpoint:
            return cls(model=model, mode="disabled", **kwargs)
        return cls(endpoint=endpoint, api_key=os.environ.get("LLM_KEY"), model=model,
                   mode="external", bucket=TokenBucket(), **kwargs)

    @property
    def enabled(self) -> bool:
        return self.mode != "disabled"

    def complete(self, prompt: str, response_format: str = "text") -> str:
        if not self.enabled:
            raise LlmUnavailable("LLM client is disabled")
        import requests

        if self.bucket is not None:
            self.bucket.acquire()
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        payload = {"model": self.model, "prompt": prompt, "response_format": response_format}
        try:
            resp = requests.post(self.endpoint, json=payload, headers=headers, timeout=self.timeout)
            resp.raise_for_status()
            return str(resp.json()["text"])
        except Exception as exc:
            raise LlmTransportError(f"LLM request failed: {exc}") from exc


class StubClient(LlmClient):
    """Answers every prompt with ``respond(prompt)``; records the prompts."""

    def __init__(self, respond: Callable[[str], str] | str | list[str]):
        super().__init__(mode="stub", model="stub")
        if isinstance(respond, str):
            text = respond
            respond = lambda _p: text  # noqa: E731
        elif isinstance(respond, list):
            queue = list(respond)
            respond = lambda _p: queue.pop(0) if len(queue) > 1 else queue[0]  # noqa: E731
        self.respond = respond
        self.prompts: list[str] = []

    def complete(self, prompt: str, response_format: str = "text") -> str:
        self.prompts.append(prompt)
        return self.respond(prompt)


class ReplayClient(LlmClient):
    """Serves recorded responses keyed by prompt hash; misses are transport errors."""

    def __init__(self, fixtures: dict[str, str] | str | Path):
        super().__init__(mode="replay", model="replay")
        if not isinstance(fixtures, dict):
            fixtures = json.loads(Path(fixtures).read_text())
        self.fixtures = dict(fixtures)

    def complete(self, prompt: str, response_format: str = "text") -> str:
        try:
            return self.fixtures[prompt_key(prompt)]
        except KeyError:
            raise LlmTransportError("no recorded response for prompt") from None


class RecordingClient(LlmClient):
    """Wraps a live client and keeps every exchange for later replay."""

    def __init__(self, inner: LlmClient):
        super().__init__(mode="record", model=inner.model)
        self.inner = inner
        self.fixtures: dict[str, str] = {}

    def complete(self, prompt: str, response_format: str = "text") -> str:
        text = self.inner.complete(prompt, response_format)
        self.fixtures[prompt_key(prompt)] = text
        return text

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.fixtures, indent=2, sort_keys=True))

"""Prompt rendering and a record/replay chat-completions client.

Prompts follow the fixed training templates: a format-instruction system
prompt and a user message holding the instruction, the question, and the
sample's passages in shuffled order. Completions come from a
chat-completions endpoint; every response can be recorded to an
append-only replay store so downstream pipelines run deterministically
offline.
"""

from __future__ import annotations

import json
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

from .curriculum import TrainingSample

SYSTEM_PROMPT = (
    "Respond in the following format:\n"
    "<reasoning>\n"
    "...\n"
    "</reasoning>\n"
    "<answer>\n"
    "Final answer: final answer\n"
    "Supporting passages: title1, title2,...\n"
    "</answer>"
)

USER_INSTRUCTIONS = (
    "Answer the question using only the provided passages. Verify your "
    "answer directly against the text, and cite only the passages you "
    "used in your final answer."
)

# Declared decoding defaults; partitioning probes sample hotter than eval.
DEFAULT_EVAL_TEMPERATURE = 0.7
DEFAULT_PROBE_TEMPERATURE = 1.0

API_KEY_ENV = "HOPKIT_API_KEY"

_RETRYABLE_STATUS = {429, 500, 502, 503, 504}


class TransportError(Exception):
    """Endpoint unreachable or persistently failing for one sample."""

    def __init__(self, sample_id: str, message: str):
        super().__init__(f"{sample_id}: {message}")
        self.sample_id = sample_id


class ReplayMissError(Exception):
    """Requested completion absent from the replay store."""

    def __init__(self, sample_id: str, index: int):
        super().__init__(
            f"no recorded completion for sample {sample_id!r} index {index}"
        )
        self.sample_id = sample_id
        self.index = index


@dataclass(frozen=True)
class PromptBundle:
    system_text: str
    user_text: str
    sample_id: str


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str = "http://localhost:8000/v1"
    model_name: str = "model"
    temperature: float = DEFAULT_EVAL_TEMPERATURE
    max_tokens: int = 2048
    request_timeout: float = 120.0
    max_in_flight: int = 4
    retry_limit: int = 3
    retry_backoff: float = 0.5

    def __post_init__(self):
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        if self.retry_limit < 0:
            raise ValueError("retry_limit must be >= 0")


def render_prompt(sample: TrainingSample) -> PromptBundle:
    """Render one sample into the fixed system/user prompt pair."""
    blocks = [USER_INSTRUCTIONS, f"Question: {sample.question}"]
    blocks.extend(f"Title: {p.title}\n{p.body}" for p in sample.passages)
    return PromptBundle(
        system_text=SYSTEM_PROMPT,
        user_text="\n\n".join(blocks),
        sample_id=sample.record_id,
    )


class ReplayStore:
    """Append-only completion cache keyed by (sample_id, generation_index).

    Single writer, many readers: appends flush immediately; reads hit the
    in-memory index.
    """

    def __init__(self, path: str):
        self.path = path
        self._entries: dict[tuple[str, int], str] = {}
        self._lock = threading.Lock()
        if os.path.exists(path):
            with open(path, encoding="utf-8") as fp:
                for line in fp:
                    if not line.strip():
                        continue
                    obj = json.loads(line)
                    key = (str(obj["sample_id"]), int(obj["generation_index"]))
                    self._entries[key] = obj["completion"]

    def __len__(self) -> int:
        return len(self._entries)

    def has(self, sample_id: str, index: int) -> bool:
        return (sample_id, index) in self._entries

    def get(self, sample_id: str, index: int) -> str:
        try:
            return self._entries[(sample_id, index)]
        except KeyError:
            raise ReplayMissError(sample_id, index) from None

    def put(self, sample_id: str, index: int, completion: str) -> None:
        line = json.dumps(
            {"sample_id": sample_id, "generation_index": index, "completion": completion},
            ensure_ascii=False,
        )
        with self._lock:
            self._entries[(sample_id, index)] = completion
            with open(self.path, "a", encoding="utf-8") as fp:
                fp.write(line + "\n")
                fp.flush()


def _requests_transport(url: str, payload: dict, timeout: float):
    import requests

    headers = {"Content-Type": "application/json"}
    api_key = os.environ.get(API_KEY_ENV)
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    resp = requests.post(url, json=payload, headers=headers, timeout=timeout)
    return resp.status_code, resp.json()


class CompletionClient:
    """Chat-completions client with bounded concurrency and retry/backoff.

    ``mode`` is one of ``live``, ``record`` (live + persist to the replay
    store), or ``replay`` (store only; a miss raises instead of falling
    through to the network).
    """

    def __init__(
        self,
        endpoint: EndpointConfig,
        mode: str = "live",
        store: ReplayStore | None = None,
        transport: Callable[[str, dict, float], tuple[int, dict]] | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if mode not in ("live", "record", "replay"):
            raise ValueError(f"unknown mode {mode!r}")
        if mode in ("record", "replay") and store is None:
            raise ValueError(f"mode {mode!r} requires a replay store")
        self.endpoint = endpoint
        self.mode = mode
        self.store = store
        self._transport = transport or _requests_transport
        self._sleep = sleep
        self._gate = threading.Semaphore(endpoint.max_in_flight)
        self._lock = threading.Lock()
        self._in_flight = 0
        self.max_in_flight_seen = 0

    def sample_completions(self, bundle: PromptBundle, n: int) -> list[str]:
        """Exactly ``n`` completion texts for one prompt, in index order."""
        if n == 0:
            return []
        if self.mode == "replay":
            return [self.store.get(bundle.sample_id, i) for i in range(n)]
        texts: list[str] = []
        while len(texts) < n:
            texts.extend(self._request(bundle, n - len(texts)))
        texts = texts[:n]
        if self.mode == "record":
            for i, text in enumerate(texts):
                self.store.put(bundle.sample_id, i, text)
        return texts

    def _request(self, bundle: PromptBundle, n: int) -> list[str]:
        payload = {
            "model": self.endpoint.model_name,
            "messages": [
                {"role": "system", "content": bundle.system_text},
                {"role": "user", "content": bundle.user_text},
            ],
            "temperature": self.endpoint.temperature,
            "max_tokens": self.endpoint.max_tokens,
            "n": n,
        }
        url = self.endpoint.base_url.rstrip("/") + "/chat/completions"
        last_error = "no attempts made"
        for attempt in range(self.endpoint.retry_limit + 1):
            if attempt:
                self._sleep(self.endpoint.retry_backoff * 2 ** (attempt - 1))
            try:
                with self._gate:
                    self._track(+1)
                    try:
                        status, body = self._transport(
                            url, payload, self.endpoint.request_timeout
                        )
                    finally:
                        self._track(-1)
            except Exception as exc:
                last_error = str(exc)
                continue
            if status in _RETRYABLE_STATUS:
                last_error = f"HTTP {status}"
                continue
            if status != 200:
                raise TransportError(bundle.sample_id, f"HTTP {status}")
            choices = body.get("choices", [])
            if not choices:
                raise TransportError(bundle.sample_id, "response carried no choices")
            return [c["message"]["content"] for c in choices]
        raise TransportError(
            bundle.sample_id,
            f"gave up after {self.endpoint.retry_limit + 1} attempts ({last_error})",
        )

    def _track(self, delta: int) -> None:
        with self._lock:
            self._in_flight += delta
            if self._in_flight > self.max_in_flight_seen:
                self.max_in_flight_seen = self._in_flight


def sample_completions(
    bundle: PromptBundle,
    n: int,
    endpoint: EndpointConfig,
    mode: str = "live",
    store: ReplayStore | None = None,
    transport: Callable[[str, dict, float], tuple[int, dict]] | None = None,
) -> list[str]:
    """One-shot convenience wrapper around :class:`CompletionClient`."""
    client = CompletionClient(endpoint, mode=mode, store=store, transport=transport)
    return client.sample_completions(bundle, n)


def collect_generations(
    samples: Sequence[TrainingSample],
    n: int,
    client: CompletionClient,
) -> list[tuple[str, list[str]]]:
    """Fetch ``n`` generations per sample, bounded by ``max_in_flight``.

    Results come back in input order regardless of completion order.
    """
    bundles = [render_prompt(s) for s in samples]
    workers = max(1, client.endpoint.max_in_flight)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        texts = list(pool.map(lambda b: client.sample_completions(b, n), bundles))
    return [(b.sample_id, t) for b, t in zip(bundles, texts)]

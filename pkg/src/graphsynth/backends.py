"""Uniform access to text-generation, judging, and embedding backends.

The wire protocol is the de-facto OpenAI-compatible one: POST
``{endpoint}/chat/completions`` for generation/judging and
``{endpoint}/embeddings`` for vectors. A descriptor whose endpoint is the
marker string ``"mock"`` is routed to an in-process :class:`MockServer`
that speaks the same request/response shapes, so the whole pipeline runs
offline and reproducibly.
"""

from __future__ import annotations

import math
import os
import random
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
import requests

from ._util import canonicalize, stable_int
from .errors import ConfigurationError, ProtocolError, TransportError

ROLES = (
    "extractor",
    "generator",
    "rater",
    "solver_small",
    "solver_large",
    "judge",
    "embedder",
)

MOCK_ENDPOINT = "mock"

_RETRYABLE_STATUS = {408, 409, 425, 429, 500, 502, 503, 504}


@dataclass
class RequestParams:
    """Per-backend request knobs; all overridable from the run config."""

    temperature: float = 0.0
    max_output_tokens: int = 1024
    max_attempts: int = 4
    backoff_base: float = 0.5
    backoff_factor: float = 2.0
    backoff_jitter: float = 0.2
    timeout: float = 60.0

    def to_record(self) -> dict:
        return {
            "temperature": self.temperature,
            "max_output_tokens": self.max_output_tokens,
            "max_attempts": self.max_attempts,
            "backoff_base": self.backoff_base,
            "backoff_factor": self.backoff_factor,
            "backoff_jitter": self.backoff_jitter,
            "timeout": self.timeout,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "RequestParams":
        return cls(**{k: rec[k] for k in rec if k in cls.__dataclass_fields__})


@dataclass
class BackendDescriptor:
    """Where and how to reach one model endpoint for one pipeline role."""

    backend_id: str
    role: str
    endpoint: str
    model_name: str
    judge_weight: float | None = None
    request_params: RequestParams = field(default_factory=RequestParams)
    api_key_env: str | None = None

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ConfigurationError(
                f"backend {self.backend_id!r}: unknown role {self.role!r}"
            )
        if (self.judge_weight is not None) != (self.role == "judge"):
            raise ConfigurationError(
                f"backend {self.backend_id!r}: judge_weight must be present "
                "exactly for role 'judge'"
            )
        if self.judge_weight is not None:
            if not math.isfinite(self.judge_weight) or self.judge_weight < 0:
                raise ConfigurationError(
                    f"backend {self.backend_id!r}: judge_weight must be a finite "
                    "nonnegative number"
                )

    @property
    def is_mock(self) -> bool:
        return self.endpoint == MOCK_ENDPOINT


@dataclass
class CompletionExchange:
    """One prompt/response round trip with its token accounting."""

    prompt: str
    output: str
    input_tokens: int
    output_tokens: int
    latency: float

    def __post_init__(self) -> None:
        if self.input_tokens < 0 or self.output_tokens < 0:
            raise ProtocolError("token counts must be nonnegative")


class UsageTracker:
    """Thread-safe token/call totals per backend id."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._totals: dict[str, dict[str, int]] = {}

    def add(self, backend_id: str, input_tokens: int, output_tokens: int) -> None:
        with self._lock:
            entry = self._totals.setdefault(
                backend_id, {"input_tokens": 0, "output_tokens": 0, "calls": 0}
            )
            entry["input_tokens"] += input_tokens
            entry["output_tokens"] += output_tokens
            entry["calls"] += 1

    def totals(self) -> dict[str, dict[str, int]]:
        with self._lock:
            return {k: dict(v) for k, v in self._totals.items()}

    def grand_totals(self) -> dict[str, int]:
        out = {"input_tokens": 0, "output_tokens": 0, "calls": 0}
        for entry in self.totals().values():
            for key in out:
                out[key] += entry[key]
        return out


def _approx_tokens(text: str) -> int:
    return len(text.split())


class BackendClient:
    """Shared, thread-safe client for all configured backends.

    One instance serves every role; per-request state is kept on the stack,
    so concurrent callers are safe.
    """

    def __init__(self, mock: "MockServer | None" = None, session: requests.Session | None = None):
        self._mock = mock
        self._fixed_session = session
        self._thread_state = threading.local()
        self.usage = UsageTracker()
        self._meter_slot = threading.local()

    def metered(self) -> "_Meter":
        """Context manager that additionally records this thread's usage.

        Lets a pipeline task persist the token counts of exactly its own
        backend calls (the task runs wholly on one thread).
        """
        return _Meter(self)

    def _record(self, backend_id: str, input_tokens: int, output_tokens: int) -> None:
        self.usage.add(backend_id, input_tokens, output_tokens)
        meter = getattr(self._meter_slot, "active", None)
        if meter is not None:
            meter.input_tokens += input_tokens
            meter.output_tokens += output_tokens
            meter.calls += 1

    def _http(self) -> requests.Session:
        # requests.Session is not thread-safe; keep one per calling thread
        # unless the caller injected a session (tests).
        if self._fixed_session is not None:
            return self._fixed_session
        session = getattr(self._thread_state, "session", None)
        if session is None:
            session = requests.Session()
            self._thread_state.session = session
        return session

    def _mock_server(self) -> "MockServer":
        if self._mock is None:
            self._mock = MockServer()
        return self._mock

    def _headers(self, descriptor: BackendDescriptor) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if descriptor.api_key_env:
            token = os.environ.get(descriptor.api_key_env)
            if token:
                headers["Authorization"] = f"Bearer {token}"
        return headers

    def _post_with_retries(
        self, descriptor: BackendDescriptor, url: str, payload: dict
    ) -> dict:
        params = descriptor.request_params
        attempts = 0
        delay = params.backoff_base
        last_error: Exception | None = None
        while attempts < max(1, params.max_attempts):
            attempts += 1
            try:
                resp = self._http().post(
                    url, json=payload, headers=self._headers(descriptor),
                    timeout=params.timeout,
                )
                if resp.status_code in _RETRYABLE_STATUS:
                    last_error = TransportError(
                        f"{url} returned HTTP {resp.status_code}", attempts=attempts
                    )
                elif resp.status_code >= 400:
                    raise ProtocolError(
                        f"{url} returned HTTP {resp.status_code}: {resp.text[:200]}"
                    )
                else:
                    try:
                        return resp.json()
                    except ValueError as exc:
                        raise ProtocolError(f"{url}: response body is not JSON") from exc
            except ProtocolError:
                raise
            except requests.RequestException as exc:
                last_error = exc
            if attempts < params.max_attempts:
                jitter = 1.0 + random.uniform(-params.backoff_jitter, params.backoff_jitter)
                time.sleep(delay * jitter)
                delay *= params.backoff_factor
        raise TransportError(
            f"{url} unreachable after {attempts} attempts: {last_error}",
            attempts=attempts,
        )

    def complete(
        self,
        descriptor: BackendDescriptor,
        prompt: str,
        decode_params: dict | None = None,
    ) -> CompletionExchange:
        """Run one chat completion and return the exchange with token counts.

        Transient failures are retried with exponential backoff up to the
        descriptor's attempt limit, then surface as :class:`TransportError`.
        """
        if descriptor.role == "embedder":
            raise ConfigurationError(
                f"backend {descriptor.backend_id!r}: complete() needs a "
                "generation or judging role, not 'embedder'"
            )
        params = descriptor.request_params
        payload = {
            "model": descriptor.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": params.temperature,
            "max_tokens": params.max_output_tokens,
        }
        if decode_params:
            payload.update(decode_params)
        started = time.monotonic()
        if descriptor.is_mock:
            data = self._mock_server().chat_completion(payload)
        else:
            url = descriptor.endpoint.rstrip("/") + "/chat/completions"
            data = self._post_with_retries(descriptor, url, payload)
        latency = time.monotonic() - started
        try:
            output = data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProtocolError(
                f"backend {descriptor.backend_id!r}: malformed completion response"
            ) from exc
        usage = data.get("usage") or {}
        input_tokens = int(usage.get("prompt_tokens", _approx_tokens(prompt)))
        output_tokens = int(usage.get("completion_tokens", _approx_tokens(output)))
        self._record(descriptor.backend_id, input_tokens, output_tokens)
        return CompletionExchange(
            prompt=prompt,
            output=output,
            input_tokens=input_tokens,
            output_tokens=output_tokens,
            latency=latency,
        )

    def embed(self, descriptor: BackendDescriptor, texts: Sequence[str]) -> np.ndarray:
        """Embed ``texts`` and return an array of unit row vectors."""
        if descriptor.role != "embedder":
            raise ConfigurationError(
                f"backend {descriptor.backend_id!r}: embed() needs role 'embedder'"
            )
        if len(texts) == 0:
            raise ValueError("embed() requires a nonempty list of texts")
        payload = {"model": descriptor.model_name, "input": list(texts)}
        if descriptor.is_mock:
            data = self._mock_server().embeddings(payload)
        else:
            url = descriptor.endpoint.rstrip("/") + "/embeddings"
            data = self._post_with_retries(descriptor, url, payload)
        try:
            rows = sorted(data["data"], key=lambda d: d["index"])
            vectors = np.asarray([row["embedding"] for row in rows], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(
                f"backend {descriptor.backend_id!r}: malformed embeddings response"
            ) from exc
        if vectors.ndim != 2 or vectors.shape[0] != len(texts):
            raise ProtocolError(
                f"backend {descriptor.backend_id!r}: expected {len(texts)} vectors, "
                f"got shape {vectors.shape}"
            )
        norms = np.linalg.norm(vectors, axis=1, keepdims=True)
        if np.any(norms == 0):
            raise ProtocolError(
                f"backend {descriptor.backend_id!r}: embedding with zero norm"
            )
        usage = data.get("usage") or {}
        input_tokens = int(
            usage.get("prompt_tokens", sum(_approx_tokens(t) for t in texts))
        )
        self._record(descriptor.backend_id, input_tokens, 0)
        return vectors / norms


class _Meter:
    """Thread-local usage meter; see :meth:`BackendClient.metered`."""

    def __init__(self, client: BackendClient):
        self._client = client
        self.input_tokens = 0
        self.output_tokens = 0
        self.calls = 0

    def __enter__(self) -> "_Meter":
        self._client._meter_slot.active = self
        return self

    def __exit__(self, *exc_info) -> None:
        self._client._meter_slot.active = None

    def to_record(self) -> dict:
        return {
            "input_tokens": self.input_tokens,
            "output_tokens": self.output_tokens,
            "calls": self.calls,
        }


def run_bounded(
    tasks: Sequence[Callable[[], Any]],
    max_in_flight: int,
) -> list[Any]:
    """Run callables with at most ``max_in_flight`` executing at once.

    Results come back in input order regardless of completion order. A
    failing task does not abort the batch: its slot holds the exception
    instance instead of a value (mirroring ``asyncio.gather`` with
    ``return_exceptions=True``).
    """
    if max_in_flight < 1:
        raise ValueError("max_in_flight must be >= 1")
    results: list[Any] = [None] * len(tasks)
    if not tasks:
        return results
    with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
        futures = {pool.submit(task): idx for idx, task in enumerate(tasks)}
        for fut in as_completed(futures):
            idx = futures[fut]
            try:
                results[idx] = fut.result()
            except Exception as exc:  # per-slot failure, batch continues
                results[idx] = exc
    return results


# ---------------------------------------------------------------------------
# Deterministic in-process mock
# ---------------------------------------------------------------------------

GARBAGE_REPLY = "@@unparseable@@"

_BRACKET_RE = re.compile(r"\[([^\[\]]{2,80})\]")


@dataclass
class MockBehaviors:
    """Optional scripted behaviors for the mock; defaults are all-pass.

    Keys into text-indexed maps are canonicalized (whitespace-collapsed).
    """

    quality_flags: dict[str, str] = field(default_factory=dict)
    synonym_yes: set[frozenset[str]] = field(default_factory=set)
    representative_picks: dict[frozenset[str], str] = field(default_factory=dict)
    problem_score: float | None = None
    problem_score_by_kind: dict[str, float] = field(default_factory=dict)
    problem_score_by_model: dict[str, float] = field(default_factory=dict)
    solution_vote: int | None = None
    solution_vote_by_model: dict[str, int] = field(default_factory=dict)
    difficulty: str | None = None
    embedding_overrides: dict[str, list[float]] = field(default_factory=dict)
    garbage_prompt_substrings: list[str] = field(default_factory=list)
    latency: float = 0.0

    @classmethod
    def from_record(cls, rec: dict) -> "MockBehaviors":
        return cls(
            quality_flags={canonicalize(k): v for k, v in rec.get("quality_flags", {}).items()},
            synonym_yes={
                frozenset(canonicalize(t) for t in pair)
                for pair in rec.get("synonym_yes", [])
            },
            representative_picks={
                frozenset(canonicalize(t) for t in entry["members"]): entry["pick"]
                for entry in rec.get("representative_picks", [])
            },
            problem_score=rec.get("problem_score"),
            problem_score_by_kind=dict(rec.get("problem_score_by_kind", {})),
            problem_score_by_model=dict(rec.get("problem_score_by_model", {})),
            solution_vote=rec.get("solution_vote"),
            solution_vote_by_model=dict(rec.get("solution_vote_by_model", {})),
            difficulty=rec.get("difficulty"),
            embedding_overrides=dict(rec.get("embedding_overrides", {})),
            garbage_prompt_substrings=list(rec.get("garbage_prompt_substrings", [])),
            latency=float(rec.get("latency", 0.0)),
        )


class MockServer:
    """In-process stand-in for an OpenAI-compatible endpoint.

    Every reply is a pure function of (model name, prompt, configured seed),
    so repeated runs produce byte-identical pipelines. Task dispatch keys on
    marker lines that the package's own prompt builders emit.
    """

    def __init__(
        self,
        seed: int = 0,
        behaviors: MockBehaviors | None = None,
        embedding_dim: int = 32,
    ):
        self.seed = seed
        self.behaviors = behaviors or MockBehaviors()
        self.embedding_dim = embedding_dim

    # -- wire surface -------------------------------------------------------

    def chat_completion(self, request: dict) -> dict:
        model = request.get("model", "mock")
        prompt = "\n".join(
            str(m.get("content", "")) for m in request.get("messages", [])
        )
        if self.behaviors.latency > 0:
            time.sleep(self.behaviors.latency)
        output = self._reply(model, prompt)
        return {
            "choices": [{"index": 0, "message": {"role": "assistant", "content": output}}],
            "model": model,
            "usage": {
                "prompt_tokens": _approx_tokens(prompt),
                "completion_tokens": _approx_tokens(output),
            },
        }

    def embeddings(self, request: dict) -> dict:
        texts = request.get("input", [])
        model = request.get("model", "mock")
        data = []
        for idx, text in enumerate(texts):
            data.append({"index": idx, "embedding": self._vector(model, text).tolist()})
        return {
            "data": data,
            "model": model,
            "usage": {"prompt_tokens": sum(_approx_tokens(t) for t in texts)},
        }

    # -- helpers ------------------------------------------------------------

    def _rand(self, *parts: str) -> float:
        """Deterministic uniform [0,1) from hashed parts plus the seed."""
        return (stable_int(str(self.seed), *parts) % 10**9) / 10**9

    def _vector(self, model: str, text: str) -> np.ndarray:
        key = canonicalize(text)
        override = self.behaviors.embedding_overrides.get(key)
        if override is not None:
            vec = np.asarray(override, dtype=np.float64)
        else:
            rng = np.random.Generator(
                np.random.PCG64(stable_int(str(self.seed), model, key))
            )
            vec = rng.normal(size=self.embedding_dim)
        norm = np.linalg.norm(vec)
        if norm == 0:
            vec = np.ones_like(vec)
            norm = np.linalg.norm(vec)
        return vec / norm

    def _reply(self, model: str, prompt: str) -> str:
        for marker in self.behaviors.garbage_prompt_substrings:
            if marker and marker in prompt:
                return GARBAGE_REPLY
        first_line = prompt.splitlines()[0] if prompt else ""
        if "TASK: extract-concepts" in first_line:
            return self._extract_reply(model, prompt)
        if "TASK: quality-check" in first_line:
            return self._quality_reply(prompt)
        if "TASK: synonym-check" in first_line:
            return self._synonym_reply(prompt)
        if "TASK: pick-representative" in first_line:
            return self._representative_reply(prompt)
        if "TASK: write-problem" in first_line:
            return self._problem_reply(model, prompt)
        if "TASK: rate-difficulty" in first_line:
            return self._difficulty_reply(model, prompt)
        if "TASK: solve" in first_line:
            return self._solution_reply(model, prompt)
        if "TASK: score-problem" in first_line:
            return self._score_reply(model, prompt)
        if "TASK: vote-solution" in first_line:
            return self._vote_reply(model, prompt)
        # Unknown prompts get a stable echo so ad-hoc use stays deterministic.
        return f"mock:{stable_int(str(self.seed), model, prompt) % 10**8:08d}"

    def _extract_reply(self, model: str, prompt: str) -> str:
        phrases: list[str] = []
        for match in _BRACKET_RE.findall(prompt):
            phrase = canonicalize(match)
            if phrase and phrase not in phrases:
                phrases.append(phrase)
        if not phrases:
            count = 1 + stable_int(str(self.seed), model, prompt, "n") % 3
            phrases = [
                f"notion {stable_int(str(self.seed), model, prompt, str(i)) % 10**6:06d}"
                for i in range(count)
            ]
        return "\n".join(f"{i}. {p}" for i, p in enumerate(phrases, start=1))

    def _quoted(self, prompt: str, label: str) -> str:
        match = re.search(rf'^{label}: "(.*)"$', prompt, flags=re.MULTILINE)
        return canonicalize(match.group(1)) if match else ""

    def _quality_reply(self, prompt: str) -> str:
        concept = self._quoted(prompt, "Concept")
        return self.behaviors.quality_flags.get(concept, "ok")

    def _synonym_reply(self, prompt: str) -> str:
        a = self._quoted(prompt, "A")
        b = self._quoted(prompt, "B")
        if a and a == b:
            return "YES"
        return "YES" if frozenset((a, b)) in self.behaviors.synonym_yes else "NO"

    def _representative_reply(self, prompt: str) -> str:
        members = [canonicalize(m) for m in re.findall(r"^\d+\. (.+)$", prompt, re.MULTILINE)]
        pick = self.behaviors.representative_picks.get(frozenset(members))
        if pick is not None:
            return pick
        if not members:
            return GARBAGE_REPLY
        return min(members, key=lambda m: (len(m), m))

    def _problem_reply(self, model: str, prompt: str) -> str:
        concepts = re.findall(r"^- (.+)$", prompt, flags=re.MULTILINE)
        nonce = stable_int(str(self.seed), model, prompt) % 10**6
        joined = " and ".join(f"[{canonicalize(c)}]" for c in concepts)
        return (
            f"A quantity q{nonce} is defined so that finding it requires {joined}. "
            f"Determine q{nonce}."
        )

    def _difficulty_reply(self, model: str, prompt: str) -> str:
        if self.behaviors.difficulty is not None:
            return self.behaviors.difficulty
        levels = ("low", "medium", "high")
        return levels[stable_int(str(self.seed), model, prompt) % 3]

    def _solution_reply(self, model: str, prompt: str) -> str:
        nonce = stable_int(str(self.seed), model, prompt) % 10**6
        return (
            f"Set up the relation, simplify, and evaluate. "
            f"The final value is {nonce % 997}."
        )

    def _score_reply(self, model: str, prompt: str) -> str:
        match = re.search(r"^Relationship type: (\w+)$", prompt, flags=re.MULTILINE)
        kind = match.group(1) if match else ""
        score: float | None = None
        if kind and kind in self.behaviors.problem_score_by_kind:
            score = self.behaviors.problem_score_by_kind[kind]
        elif model in self.behaviors.problem_score_by_model:
            score = self.behaviors.problem_score_by_model[model]
        elif self.behaviors.problem_score is not None:
            score = self.behaviors.problem_score
        if score is None:
            score = round(self._rand(model, prompt, "score"), 2)
        return f"{score}"

    def _vote_reply(self, model: str, prompt: str) -> str:
        vote: int | None = None
        if model in self.behaviors.solution_vote_by_model:
            vote = self.behaviors.solution_vote_by_model[model]
        elif self.behaviors.solution_vote is not None:
            vote = self.behaviors.solution_vote
        if vote is None:
            vote = 1
        return "YES" if int(vote) == 1 else "NO"

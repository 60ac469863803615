"""Chat-completion gateway: live providers plus a record/replay cassette.

Every LLM call in the pipeline goes through :class:`LlmGateway`. In
``live`` mode requests hit an OpenAI-style chat-completions API; in
``record`` mode responses are additionally persisted to a JSON-lines
cassette; in ``replay`` mode the cassette is the only source and an
unmatched request is a hard error, never a network call.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import requests

from .errors import ConfigError, ProviderError, ReplayMissError
from .tokens import TokenEstimator, count_tokens


@dataclass
class TokenUsage:
    prompt_tokens: int = 0
    completion_tokens: int = 0
    estimated_cost: float = 0.0

    @property
    def total_tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens

    def to_dict(self) -> dict:
        return {
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
            "estimated_cost": self.estimated_cost,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TokenUsage":
        return cls(
            prompt_tokens=int(d.get("prompt_tokens", 0)),
            completion_tokens=int(d.get("completion_tokens", 0)),
            estimated_cost=float(d.get("estimated_cost", 0.0)),
        )


@dataclass
class ChatMessage:
    role: str  # system | user | assistant
    text: str


@dataclass
class ChatExchange:
    model_ref: str
    messages: list[ChatMessage]
    temperature: float = 0.0
    response: Optional[str] = None
    usage: Optional[TokenUsage] = None


@dataclass
class BudgetLedger:
    """Cumulative per-session token and cost accounting."""

    prompt_tokens: int = 0
    completion_tokens: int = 0
    estimated_cost: float = 0.0
    calls: int = 0

    def add(self, usage: TokenUsage) -> None:
        self.prompt_tokens += usage.prompt_tokens
        self.completion_tokens += usage.completion_tokens
        self.estimated_cost += usage.estimated_cost
        self.calls += 1

    @property
    def total_tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens

    def to_dict(self) -> dict:
        return {
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
            "total_tokens": self.total_tokens,
            "estimated_cost": self.estimated_cost,
            "calls": self.calls,
        }


# Per-token (rate_in, rate_out) pairs; defaults to free because published
# dollar figures are provider-specific and dated.
RateTable = dict[str, tuple[float, float]]


def request_fingerprint(model_ref: str, messages: Sequence[ChatMessage]) -> str:
    payload = {
        "model": model_ref,
        "messages": [{"role": m.role, "text": m.text} for m in messages],
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass
class CassetteEntry:
    fingerprint: str
    request: dict
    response: str
    usage: TokenUsage
    consumed: bool = False


class Cassette:
    """Ordered collection of canned exchanges, one JSON line per entry.

    Replay consumes entries by fingerprint match: identical requests
    recorded twice are served back in recording order.
    """

    def __init__(self, entries: Optional[list[CassetteEntry]] = None):
        self.entries: list[CassetteEntry] = entries or []

    @classmethod
    def load(cls, path: str | Path) -> "Cassette":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"cassette not found: {path}")
        entries = []
        for line in path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            d = json.loads(line)
            entries.append(
                CassetteEntry(
                    fingerprint=d["fingerprint"],
                    request=d["request"],
                    response=d["response"],
                    usage=TokenUsage.from_dict(d["usage"]),
                )
            )
        return cls(entries)

    def take(self, fingerprint: str) -> Optional[CassetteEntry]:
        for entry in self.entries:
            if not entry.consumed and entry.fingerprint == fingerprint:
                entry.consumed = True
                return entry
        return None

    @staticmethod
    def append_to_file(path: str | Path, entry: CassetteEntry) -> None:
        line = json.dumps(
            {
                "fingerprint": entry.fingerprint,
                "request": entry.request,
                "response": entry.response,
                "usage": entry.usage.to_dict(),
            },
            ensure_ascii=True,
        )
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")


class ChatProvider:
    """Interface for live chat-completion backends."""

    def complete(
        self, model_ref: str, messages: Sequence[ChatMessage], temperature: float
    ) -> tuple[str, TokenUsage]:
        raise NotImplementedError


class HttpChatProvider(ChatProvider):
    """OpenAI-compatible chat-completions endpoint.

    Endpoint and key come from the environment (METABOQA_LLM_BASE_URL,
    METABOQA_LLM_API_KEY) unless given explicitly.
    """

    def __init__(
        self,
        base_url: Optional[str] = None,
        api_key: Optional[str] = None,
        timeout: float = 60.0,
        session: Optional[requests.Session] = None,
    ):
        self.base_url = (base_url or os.environ.get("METABOQA_LLM_BASE_URL", "")).rstrip("/")
        self.api_key = api_key or os.environ.get("METABOQA_LLM_API_KEY", "")
        if not self.base_url:
            raise ConfigError("live provider needs METABOQA_LLM_BASE_URL")
        self.timeout = timeout
        self.session = session or requests.Session()

    def complete(self, model_ref, messages, temperature):
        body = {
            "model": model_ref,
            "messages": [{"role": m.role, "content": m.text} for m in messages],
            "temperature": temperature,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            resp = self.session.post(
                f"{self.base_url}/chat/completions",
                json=body,
                headers=headers,
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise ProviderError(f"provider unreachable: {exc}", retriable=True)
        if resp.status_code >= 500 or resp.status_code == 429:
            raise ProviderError(f"provider HTTP {resp.status_code}", retriable=True)
        if resp.status_code != 200:
            raise ProviderError(f"provider HTTP {resp.status_code}: {resp.text[:200]}")
        data = resp.json()
        text = data["choices"][0]["message"]["content"]
        u = data.get("usage", {})
        usage = TokenUsage(
            prompt_tokens=int(u.get("prompt_tokens", 0)),
            completion_tokens=int(u.get("completion_tokens", 0)),
        )
        return text, usage


class ScriptedChatProvider(ChatProvider):
    """Demonstration-mode provider with canned responses.

    Rules are (needle, response) pairs consumed first-match-first: a rule
    fires when its needle appears in the request's concatenated message
    text. Used to cut cassettes offline and to run the demo without API
    credentials.
    """

    def __init__(self, rules: Sequence[tuple[str, str]], estimate: TokenEstimator = count_tokens):
        self.rules: list[tuple[str, str]] = list(rules)
        self.estimate = estimate
        self.requests_seen: list[ChatExchange] = []

    def complete(self, model_ref, messages, temperature):
        text_blob = "\n".join(m.text for m in messages)
        self.requests_seen.append(
            ChatExchange(model_ref=model_ref, messages=list(messages), temperature=temperature)
        )
        for i, (needle, response) in enumerate(self.rules):
            if needle in text_blob:
                self.rules.pop(i)
                usage = TokenUsage(
                    prompt_tokens=sum(self.estimate(m.text) for m in messages),
                    completion_tokens=self.estimate(response),
                )
                return response, usage
        raise ProviderError(
            f"scripted provider has no rule matching request starting "
            f"{text_blob[:80]!r}"
        )


class LlmGateway:
    """Uniform completion interface with usage ledgering.

    Modes: ``live`` (provider only), ``record`` (provider + cassette
    append), ``replay`` (cassette only).
    """

    MAX_RETRIES = 2

    def __init__(
        self,
        mode: str = "live",
        provider: Optional[ChatProvider] = None,
        cassette: Optional[Cassette] = None,
        cassette_path: Optional[str | Path] = None,
        rate_table: Optional[RateTable] = None,
        estimate: TokenEstimator = count_tokens,
        retry_base_delay: float = 0.5,
    ):
        if mode not in {"live", "record", "replay"}:
            raise ConfigError(f"unknown gateway mode {mode!r}")
        if mode in {"live", "record"} and provider is None:
            raise ConfigError(f"{mode} mode requires a provider")
        if mode == "record" and cassette_path is None:
            raise ConfigError("record mode requires a cassette path")
        if mode == "replay":
            if cassette is None and cassette_path is None:
                raise ConfigError("replay mode requires a cassette")
            if cassette is None:
                cassette = Cassette.load(cassette_path)
        self.mode = mode
        self.provider = provider
        self.cassette = cassette
        self.cassette_path = Path(cassette_path) if cassette_path else None
        self.rate_table: RateTable = rate_table or {}
        self.estimate = estimate
        self.retry_base_delay = retry_base_delay

    def set_estimator(self, estimate: TokenEstimator) -> None:
        self.estimate = estimate

    def _price(self, model_ref: str, usage: TokenUsage) -> TokenUsage:
        rate_in, rate_out = self.rate_table.get(model_ref, (0.0, 0.0))
        usage.estimated_cost = usage.prompt_tokens * rate_in + usage.completion_tokens * rate_out
        return usage

    def complete(
        self,
        model_ref: str,
        messages: Sequence[ChatMessage],
        temperature: float = 0.0,
        ledger: Optional[BudgetLedger] = None,
    ) -> ChatExchange:
        messages = list(messages)
        fingerprint = request_fingerprint(model_ref, messages)

        if self.mode == "replay":
            entry = self.cassette.take(fingerprint)
            if entry is None:
                raise ReplayMissError(fingerprint)
            exchange = ChatExchange(
                model_ref=model_ref,
                messages=messages,
                temperature=temperature,
                response=entry.response,
                usage=entry.usage,
            )
        else:
            text, usage = self._call_with_retry(model_ref, messages, temperature)
            usage = self._price(model_ref, usage)
            exchange = ChatExchange(
                model_ref=model_ref,
                messages=messages,
                temperature=temperature,
                response=text,
                usage=usage,
            )
            if self.mode == "record":
                Cassette.append_to_file(
                    self.cassette_path,
                    CassetteEntry(
                        fingerprint=fingerprint,
                        request={
                            "model": model_ref,
                            "messages": [{"role": m.role, "text": m.text} for m in messages],
                        },
                        response=text,
                        usage=usage,
                    ),
                )

        if ledger is not None:
            ledger.add(exchange.usage)
        return exchange

    def _call_with_retry(self, model_ref, messages, temperature):
        attempt = 0
        while True:
            try:
                return self.provider.complete(model_ref, messages, temperature)
            except ProviderError as exc:
                if not exc.retriable or attempt >= self.MAX_RETRIES:
                    raise
                time.sleep(self.retry_base_delay * (2**attempt))
                attempt += 1

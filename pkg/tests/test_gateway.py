import pytest

from metaboqa.errors import ConfigError, ProviderError, ReplayMissError
from metaboqa.gateway import (
    BudgetLedger,
    Cassette,
    ChatMessage,
    ChatProvider,
    LlmGateway,
    ScriptedChatProvider,
    TokenUsage,
    request_fingerprint,
)

MSG = [ChatMessage("user", "What bioactive compounds are found in Tabernaemontana coffeoides?")]


def record_then_load(tmp_path, rules, calls):
    path = tmp_path / "cassette.jsonl"
    gw = LlmGateway(
        mode="record",
        provider=ScriptedChatProvider(rules),
        cassette_path=path,
        retry_base_delay=0,
    )
    for messages in calls:
        gw.complete("gpt-test", messages)
    return path


def test_record_then_replay_verbatim(tmp_path):
    path = record_then_load(tmp_path, [("bioactive", "canned answer")], [MSG])
    replay = LlmGateway(mode="replay", cassette_path=path)
    exchange = replay.complete("gpt-test", MSG)
    assert exchange.response == "canned answer"
    assert exchange.usage.total_tokens > 0


def test_replay_miss_is_hard_error(tmp_path):
    path = record_then_load(tmp_path, [("bioactive", "canned")], [MSG])
    replay = LlmGateway(mode="replay", cassette_path=path)
    other = [ChatMessage("user", "a different request entirely")]
    with pytest.raises(ReplayMissError) as err:
        replay.complete("gpt-test", other)
    assert err.value.fingerprint == request_fingerprint("gpt-test", other)


def test_identical_requests_record_two_entries_in_order(tmp_path):
    rules = [("bioactive", "first"), ("bioactive", "second")]
    path = record_then_load(tmp_path, rules, [MSG, MSG])
    cassette = Cassette.load(path)
    assert len(cassette.entries) == 2
    assert [e.response for e in cassette.entries] == ["first", "second"]
    # replay consumes them in order
    replay = LlmGateway(mode="replay", cassette=cassette)
    assert replay.complete("gpt-test", MSG).response == "first"
    assert replay.complete("gpt-test", MSG).response == "second"
    with pytest.raises(ReplayMissError):
        replay.complete("gpt-test", MSG)


def test_replay_mode_requires_cassette():
    with pytest.raises(ConfigError):
        LlmGateway(mode="replay")


def test_ledger_accumulates_usage():
    gw = LlmGateway(
        mode="live",
        provider=ScriptedChatProvider([("q1", "r1"), ("q2", "r2")]),
        retry_base_delay=0,
    )
    ledger = BudgetLedger()
    gw.complete("m", [ChatMessage("user", "q1")], ledger=ledger)
    gw.complete("m", [ChatMessage("user", "q2")], ledger=ledger)
    assert ledger.calls == 2
    assert ledger.total_tokens == ledger.prompt_tokens + ledger.completion_tokens
    assert ledger.total_tokens > 0


def test_rate_table_prices_usage():
    gw = LlmGateway(
        mode="live",
        provider=ScriptedChatProvider([("", "xyz")]),
        rate_table={"m": (0.5, 2.0)},
        retry_base_delay=0,
    )
    exchange = gw.complete("m", [ChatMessage("user", "abcdef")])
    expected = exchange.usage.prompt_tokens * 0.5 + exchange.usage.completion_tokens * 2.0
    assert exchange.usage.estimated_cost == pytest.approx(expected)


class FlakyProvider(ChatProvider):
    def __init__(self, fail_times):
        self.fail_times = fail_times
        self.attempts = 0

    def complete(self, model_ref, messages, temperature):
        self.attempts += 1
        if self.attempts <= self.fail_times:
            raise ProviderError("boom", retriable=True)
        return "recovered", TokenUsage(1, 1)


def test_retries_retriable_failures_twice():
    provider = FlakyProvider(fail_times=2)
    gw = LlmGateway(mode="live", provider=provider, retry_base_delay=0)
    assert gw.complete("m", MSG).response == "recovered"
    assert provider.attempts == 3


def test_gives_up_after_two_retries():
    provider = FlakyProvider(fail_times=3)
    gw = LlmGateway(mode="live", provider=provider, retry_base_delay=0)
    with pytest.raises(ProviderError):
        gw.complete("m", MSG)
    assert provider.attempts == 3


def test_non_retriable_fails_fast():
    class Hard(ChatProvider):
        def __init__(self):
            self.attempts = 0

        def complete(self, *a):
            self.attempts += 1
            raise ProviderError("bad request", retriable=False)

    provider = Hard()
    gw = LlmGateway(mode="live", provider=provider, retry_base_delay=0)
    with pytest.raises(ProviderError):
        gw.complete("m", MSG)
    assert provider.attempts == 1


def test_http_provider_parses_chat_completions():
    from conftest import StubResponse, StubSession
    from metaboqa.gateway import HttpChatProvider

    payload = {
        "choices": [{"message": {"role": "assistant", "content": "the answer"}}],
        "usage": {"prompt_tokens": 12, "completion_tokens": 5},
    }
    session = StubSession().add("/chat/completions", StubResponse(json_data=payload))
    provider = HttpChatProvider(base_url="https://llm.test/v1", api_key="k", session=session)
    text, usage = provider.complete("gpt-test", MSG, 0.0)
    assert text == "the answer"
    assert usage.prompt_tokens == 12 and usage.completion_tokens == 5


def test_http_provider_error_classification():
    from conftest import DownSession, StubResponse, StubSession
    from metaboqa.gateway import HttpChatProvider

    for status, retriable in ((429, True), (503, True), (400, False)):
        session = StubSession().add("/chat/completions", StubResponse(status_code=status, text="x"))
        provider = HttpChatProvider(base_url="https://llm.test/v1", session=session)
        with pytest.raises(ProviderError) as err:
            provider.complete("m", MSG, 0.0)
        assert err.value.retriable is retriable, status

    provider = HttpChatProvider(base_url="https://llm.test/v1", session=DownSession())
    with pytest.raises(ProviderError) as err:
        provider.complete("m", MSG, 0.0)
    assert err.value.retriable


def test_http_provider_requires_base_url(monkeypatch):
    from metaboqa.gateway import HttpChatProvider

    monkeypatch.delenv("METABOQA_LLM_BASE_URL", raising=False)
    with pytest.raises(ConfigError, match="METABOQA_LLM_BASE_URL"):
        HttpChatProvider()


def test_temperature_defaults_to_zero():
    provider = ScriptedChatProvider([("", "r")])
    gw = LlmGateway(mode="live", provider=provider, retry_base_delay=0)
    gw.complete("m", MSG)
    assert provider.requests_seen[0].temperature == 0.0


def test_cassette_preserves_unicode(tmp_path):
    response = "counts: 3 µg/mL — «Tabernæmontana», 片仮名"
    path = record_then_load(tmp_path, [("bioactive", response)], [MSG])
    replay = LlmGateway(mode="replay", cassette_path=path)
    assert replay.complete("gpt-test", MSG).response == response


def test_fingerprint_covers_model_and_messages():
    f1 = request_fingerprint("m1", MSG)
    f2 = request_fingerprint("m2", MSG)
    f3 = request_fingerprint("m1", [ChatMessage("user", "other")])
    assert len({f1, f2, f3}) == 3

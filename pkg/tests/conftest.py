from __future__ import annotations

from pathlib import Path

import pytest
import requests

from metaboqa.endpoints import LocalGraphEndpoint
from metaboqa.gateway import LlmGateway, ScriptedChatProvider
from metaboqa.prompts import PromptLibrary
from metaboqa.schema import SchemaDocument, load_schema_file

FIXTURES = Path(__file__).parent.parent / "fixtures"


class StubResponse:
    def __init__(self, status_code=200, text="", json_data=None):
        self.status_code = status_code
        self._json = json_data
        self.text = text if text or json_data is None else ""

    def json(self):
        if self._json is None:
            raise ValueError("no JSON body")
        return self._json


class StubSession:
    """requests.Session stand-in: routes by URL substring, records calls."""

    def __init__(self):
        self.routes: list[tuple[str, StubResponse]] = []
        self.calls: list[tuple[str, dict]] = []

    def add(self, needle: str, response: StubResponse):
        self.routes.append((needle, response))
        return self

    def _dispatch(self, url, params):
        self.calls.append((url, dict(params or {})))
        for needle, response in self.routes:
            if needle in url:
                return response
        return StubResponse(status_code=404, text="stub: no route")

    def get(self, url, params=None, headers=None, timeout=None, **kw):
        return self._dispatch(url, params)

    def post(self, url, data=None, json=None, params=None, headers=None, timeout=None, **kw):
        return self._dispatch(url, data or params)


class DownSession:
    """Simulates an unreachable host."""

    def get(self, *a, **kw):
        raise requests.ConnectionError("stub: host down")

    post = get


@pytest.fixture(scope="session")
def schema() -> SchemaDocument:
    return load_schema_file(FIXTURES / "schema.ttl")


@pytest.fixture(scope="session")
def graph_endpoint() -> LocalGraphEndpoint:
    return LocalGraphEndpoint.from_turtle_file(FIXTURES / "graph.ttl")


@pytest.fixture(scope="session")
def wikidata_endpoint() -> LocalGraphEndpoint:
    return LocalGraphEndpoint.from_turtle_file(FIXTURES / "wikidata.ttl")


@pytest.fixture(scope="session")
def prompts() -> PromptLibrary:
    return PromptLibrary()


def scripted_gateway(rules: list[tuple[str, str]]) -> LlmGateway:
    return LlmGateway(mode="live", provider=ScriptedChatProvider(rules), retry_base_delay=0)


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES

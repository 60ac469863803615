"""Service configuration and engine assembly."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import requests

from .agents.runtime import Engine
from .endpoints import endpoint_from_location
from .errors import ConfigError
from .gateway import Cassette, HttpChatProvider, LlmGateway
from .prompts import PromptLibrary
from .refinement import RefinementStore
from .resolvers import ChemblTargetResolver, ChemicalIndex, GnpsStructureResolver, PlantDb
from .schema import load_schema_file

MODES = ("live", "replay", "record")


@dataclass
class ServiceConfig:
    kg_endpoint: str
    wikidata_endpoint: str
    schema_path: str
    plant_csv: str
    chemical_csv: str
    refinement_csv: Optional[str] = None
    prompts_dir: Optional[str] = None
    artifacts_root: str = "artifacts"
    mode: str = "live"
    cassette_path: Optional[str] = None
    model_ref: str = "gpt-4o"
    chembl_base_url: str = "https://www.ebi.ac.uk"
    gnps_base_url: str = "https://structure.gnps2.org"
    rate_in: float = 0.0  # per prompt token
    rate_out: float = 0.0  # per completion token
    upload_cap_bytes: int = 50 * 1024 * 1024
    step_cap: int = 12
    request_timeout: float = 10.0
    sse_idle_timeout: float = 10.0

    @classmethod
    def from_file(cls, path: str | Path) -> "ServiceConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}")
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        config = cls(**raw)
        # relative paths resolve against the config file's directory
        base = path.parent
        for attr in (
            "schema_path",
            "plant_csv",
            "chemical_csv",
            "refinement_csv",
            "prompts_dir",
            "artifacts_root",
            "cassette_path",
            "kg_endpoint",
            "wikidata_endpoint",
        ):
            value = getattr(config, attr)
            if value and not str(value).startswith(("http://", "https://")) and not Path(value).is_absolute():
                setattr(config, attr, str(base / value))
        return config

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "replay" and not self.cassette_path:
            raise ConfigError("replay mode requires cassette_path")
        if self.mode == "record" and not self.cassette_path:
            raise ConfigError("record mode requires cassette_path")
        for label, value in (
            ("schema_path", self.schema_path),
            ("plant_csv", self.plant_csv),
            ("chemical_csv", self.chemical_csv),
        ):
            if not Path(value).is_file():
                raise ConfigError(f"{label} not found: {value}")
        if self.refinement_csv and not Path(self.refinement_csv).is_file():
            raise ConfigError(f"refinement_csv not found: {self.refinement_csv}")
        if self.mode == "replay" and not Path(self.cassette_path).is_file():
            raise ConfigError(f"cassette not found: {self.cassette_path}")


def build_engine(config: ServiceConfig, provider=None) -> Engine:
    """Wire an Engine from configuration.

    ``provider`` overrides the live LLM backend (used by the recording
    script and tests); replay mode forbids any provider.
    """
    config.validate()
    if config.mode == "replay":
        if provider is not None:
            raise ConfigError("replay mode must not be given a live provider")
        gateway = LlmGateway(
            mode="replay",
            cassette=Cassette.load(config.cassette_path),
            rate_table={config.model_ref: (config.rate_in, config.rate_out)},
        )
    else:
        if provider is None:
            provider = HttpChatProvider(timeout=max(config.request_timeout, 30.0))
        gateway = LlmGateway(
            mode=config.mode,
            provider=provider,
            cassette_path=config.cassette_path,
            rate_table={config.model_ref: (config.rate_in, config.rate_out)},
        )

    session = requests.Session()
    store = (
        RefinementStore.from_csv(config.refinement_csv)
        if config.refinement_csv
        else RefinementStore([])
    )
    return Engine(
        schema=load_schema_file(config.schema_path),
        plant_db=PlantDb.from_csv(config.plant_csv),
        chemical_index=ChemicalIndex.from_csv(config.chemical_csv),
        kg_endpoint=endpoint_from_location(config.kg_endpoint, timeout=config.request_timeout),
        wikidata_endpoint=endpoint_from_location(
            config.wikidata_endpoint, timeout=config.request_timeout
        ),
        gateway=gateway,
        prompts=PromptLibrary(config.prompts_dir) if config.prompts_dir else PromptLibrary(),
        refinement_store=store,
        target_resolver=ChemblTargetResolver(
            base_url=config.chembl_base_url, session=session, timeout=config.request_timeout
        ),
        structure_resolver=GnpsStructureResolver(
            base_url=config.gnps_base_url, session=session, timeout=config.request_timeout
        ),
        artifacts_root=config.artifacts_root,
        model_ref=config.model_ref,
        step_cap=config.step_cap,
    )

"""Resolvers backed by external services: GNPS, ChEMBL, Wikidata.

Each takes an injectable ``requests.Session``-compatible transport (or a
SPARQL endpoint for Wikidata) so tests run fully offline against pinned
fixtures. Results are memoized in-process only; calls carry per-call
timeouts.
"""

from __future__ import annotations

import logging
import xml.etree.ElementTree as ET
from typing import Optional

import requests

from ..endpoints import SparqlEndpoint
from ..errors import AmbiguousEntity, EndpointError, ResolutionNotFound, ResolverError
from .base import INCHIKEY_PATTERN, ResolvedEntity

logger = logging.getLogger(__name__)

CHEMBL_TARGET_IRI_TEMPLATE = "https://www.ebi.ac.uk/chembl/target_report_card/{chembl_id}"

WD_ENTITY_NS = "http://www.wikidata.org/entity/"
WDT_TAXON_NAME = "http://www.wikidata.org/prop/direct/P225"
RDFS_LABEL = "http://www.w3.org/2000/01/rdf-schema#label"


def _sparql_string(value: str) -> str:
    return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'


class GnpsStructureResolver:
    """SMILES -> InChIKey via the GNPS structure API."""

    def __init__(
        self,
        base_url: str = "https://structure.gnps2.org",
        session: Optional[requests.Session] = None,
        timeout: float = 10.0,
    ):
        self.base_url = base_url.rstrip("/")
        self.session = session or requests.Session()
        self.timeout = timeout
        self._cache: dict[str, ResolvedEntity] = {}

    def resolve(self, smiles: str) -> ResolvedEntity:
        smiles = smiles.strip()
        if not smiles:
            raise ResolverError("empty structure: a SMILES string is required")
        if smiles in self._cache:
            return self._cache[smiles]
        logger.info("GNPS inchikey lookup for %r", smiles)
        try:
            resp = self.session.get(
                f"{self.base_url}/inchikey",
                params={"smiles": smiles},
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            logger.warning("GNPS request failed: %s", exc)
            raise ResolverError(f"GNPS API unreachable: {exc}", retriable=True)
        if resp.status_code != 200:
            logger.warning("GNPS rejected %r: HTTP %s", smiles, resp.status_code)
            raise ResolverError(
                f"GNPS API error HTTP {resp.status_code}: {resp.text.strip()[:200]}"
            )
        key = resp.text.strip().strip('"')
        if not INCHIKEY_PATTERN.match(key):
            raise ResolverError(f"GNPS returned a malformed InChIKey: {key!r}")
        entity = ResolvedEntity(
            surface=smiles, kind="structure", identifier=key, source="gnps_api"
        )
        self._cache[smiles] = entity
        logger.info("GNPS resolved %r -> %s", smiles, key)
        return entity


class ChemblTargetResolver:
    """Biological-target name -> ChEMBL target IRI (XML search API)."""

    def __init__(
        self,
        base_url: str = "https://www.ebi.ac.uk",
        session: Optional[requests.Session] = None,
        timeout: float = 10.0,
    ):
        self.base_url = base_url.rstrip("/")
        self.session = session or requests.Session()
        self.timeout = timeout
        self._cache: dict[str, ResolvedEntity] = {}

    def resolve(self, name: str) -> ResolvedEntity:
        name = name.strip()
        if not name:
            raise ResolverError("empty target name")
        if name in self._cache:
            return self._cache[name]
        try:
            resp = self.session.get(
                f"{self.base_url}/chembl/api/data/target/search",
                params={"q": name},
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            logger.warning("ChEMBL request failed: %s", exc)
            raise ResolverError(f"ChEMBL API unreachable: {exc}", retriable=True)
        if resp.status_code != 200:
            raise ResolverError(
                f"ChEMBL API error HTTP {resp.status_code}", retriable=resp.status_code >= 500
            )
        hits = self._parse_targets(resp.text)
        if not hits:
            logger.info("ChEMBL: no match for %r", name)
            raise ResolutionNotFound(
                f"no ChEMBL target matches {name!r}; try the full protein name, "
                "the organism name, or a common synonym"
            )
        chembl_id = self._pick(name, hits)
        entity = ResolvedEntity(
            surface=name,
            kind="target",
            identifier=CHEMBL_TARGET_IRI_TEMPLATE.format(chembl_id=chembl_id),
            source="chembl_api",
        )
        self._cache[name] = entity
        logger.info("ChEMBL resolved %r -> %s", name, chembl_id)
        return entity

    @staticmethod
    def _parse_targets(xml_text: str) -> list[tuple[str, str]]:
        try:
            root = ET.fromstring(xml_text)
        except ET.ParseError as exc:
            raise ResolverError(f"ChEMBL returned unparseable XML: {exc}")
        hits = []
        for target in root.iter("target"):
            chembl_id = target.findtext("target_chembl_id") or ""
            pref_name = target.findtext("pref_name") or ""
            if chembl_id:
                hits.append((chembl_id, pref_name))
        return hits

    @staticmethod
    def _pick(name: str, hits: list[tuple[str, str]]) -> str:
        lowered = name.casefold()
        for chembl_id, pref_name in hits:
            if pref_name.casefold() == lowered:
                return chembl_id
        return hits[0][0]


class WikidataTaxonResolver:
    """Taxon name -> Wikidata entity IRI via SPARQL.

    Tries an exact taxon-name (P225) match first, then an English-label
    fallback; several candidates are disambiguated by exact taxon name or
    reported as ambiguous.
    """

    def __init__(self, endpoint: SparqlEndpoint):
        self.endpoint = endpoint
        self._cache: dict[str, ResolvedEntity] = {}

    def resolve(self, name: str) -> ResolvedEntity:
        name = name.strip()
        if not name:
            raise ResolverError("empty taxon name")
        if name in self._cache:
            return self._cache[name]
        candidates = self._query_taxon_name(name)
        if not candidates:
            candidates = self._query_label(name)
        if not candidates:
            raise ResolutionNotFound(f"no Wikidata taxon found for {name!r}")
        iri = self._disambiguate(name, candidates)
        entity = ResolvedEntity(
            surface=name, kind="taxon", identifier=iri, source="wikidata_endpoint"
        )
        self._cache[name] = entity
        logger.info("Wikidata resolved taxon %r -> %s", name, iri)
        return entity

    def _query_taxon_name(self, name: str) -> list[tuple[str, str]]:
        query = (
            f"SELECT ?taxon ?name WHERE {{ "
            f"?taxon <{WDT_TAXON_NAME}> {_sparql_string(name)} . "
            f"?taxon <{WDT_TAXON_NAME}> ?name }}"
        )
        return self._run(query)

    def _query_label(self, name: str) -> list[tuple[str, str]]:
        query = (
            f"SELECT ?taxon ?name WHERE {{ "
            f"?taxon <{RDFS_LABEL}> {_sparql_string(name)}@en . "
            f"?taxon <{WDT_TAXON_NAME}> ?name }}"
        )
        return self._run(query)

    def _run(self, query: str) -> list[tuple[str, str]]:
        try:
            result = self.endpoint.select(query)
        except EndpointError as exc:
            raise ResolverError(f"Wikidata endpoint failed: {exc}", retriable=True)
        seen: dict[str, str] = {}
        for row in result.rows:
            iri = row.get("taxon", "")
            if iri:
                seen.setdefault(iri, row.get("name", ""))
        return sorted(seen.items())

    @staticmethod
    def _disambiguate(name: str, candidates: list[tuple[str, str]]) -> str:
        if len(candidates) == 1:
            return candidates[0][0]
        exact = [iri for iri, taxon_name in candidates if taxon_name == name]
        if len(exact) == 1:
            return exact[0]
        raise AmbiguousEntity(name, [iri for iri, _ in candidates])

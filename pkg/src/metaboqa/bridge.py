"""Genus-level Wikidata compound lookup and ENPKG/Wikidata id merging."""

from __future__ import annotations

import csv
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .endpoints import SparqlEndpoint
from .errors import EndpointError, MetaboqaError, ResolverError

logger = logging.getLogger(__name__)

WD_ENTITY_NS = "http://www.wikidata.org/entity/"
_QID = re.compile(r"^Q\d+$")
_FULL_IRI = re.compile(r"^https?://www\.wikidata\.org/(?:entity|wiki)/(Q\d+)$")


def canonical_wd_iri(value: str) -> Optional[str]:
    """Canonicalize a bare Q-id or Wikidata entity IRI to the full
    http entity IRI; None when the value is neither."""
    value = value.strip()
    if _QID.match(value):
        return WD_ENTITY_NS + value
    m = _FULL_IRI.match(value)
    if m:
        return WD_ENTITY_NS + m.group(1)
    return None


def _qid_number(iri: str) -> int:
    return int(iri.rsplit("Q", 1)[1])


@dataclass
class WikidataProperties:
    """Property identifiers for the genus walk; configurable because the
    upstream tool's exact choices are unpublished."""

    parent_taxon: str = "P171"
    taxon_rank: str = "P105"
    genus_rank: str = "Q34740"
    found_in_taxon: str = "P703"


@dataclass
class CompoundIdList:
    spill_path: str
    ids: list[str]  # canonical full entity IRIs, deduplicated


def genus_compounds(
    taxon_wd_id: str,
    endpoint: SparqlEndpoint,
    spill_path: str | Path,
    properties: Optional[WikidataProperties] = None,
    row_cap: int = 10000,
) -> Optional[CompoundIdList]:
    """Compounds annotated to species within the genus of the given taxon.

    Walk: input taxon -> (parent taxon, transitive) -> genus-ranked node;
    then every species under that genus -> compounds found in it.
    Returns None when the query matches nothing.
    """
    canonical = canonical_wd_iri(taxon_wd_id)
    if canonical is None:
        raise ResolverError(f"malformed Wikidata id {taxon_wd_id!r}")
    props = properties or WikidataProperties()
    wdt = "http://www.wikidata.org/prop/direct/"
    query = (
        "SELECT DISTINCT ?compound WHERE {\n"
        f"  <{canonical}> <{wdt}{props.parent_taxon}>* ?genus .\n"
        f"  ?genus <{wdt}{props.taxon_rank}> <{WD_ENTITY_NS}{props.genus_rank}> .\n"
        f"  ?species <{wdt}{props.parent_taxon}>* ?genus .\n"
        f"  ?compound <{wdt}{props.found_in_taxon}> ?species .\n"
        f"}} LIMIT {row_cap}"
    )
    try:
        result = endpoint.select(query)
    except EndpointError as exc:
        raise ResolverError(f"Wikidata genus query failed: {exc}", retriable=True)
    ids = sorted(
        {c for v in result.column("compound") if (c := canonical_wd_iri(v))},
        key=_qid_number,
    )
    if not ids:
        logger.info("no genus compounds for %s", canonical)
        return None
    spill_path = Path(spill_path)
    spill_path.parent.mkdir(parents=True, exist_ok=True)
    with open(spill_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["compound"])
        for iri in ids:
            writer.writerow([iri])
    return CompoundIdList(spill_path=str(spill_path), ids=ids)


def _read_id_column(path: Path) -> list[str]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise MetaboqaError(f"cannot read id CSV {path}: {exc}")
    if not rows:
        return []
    header, data = rows[0], rows[1:]
    if not data:
        return []
    # the id column is the first one whose values canonicalize to Wikidata ids
    for col in range(len(header)):
        values = [row[col] for row in data if col < len(row) and row[col].strip()]
        if values and any(canonical_wd_iri(v) for v in values):
            return values
    raise MetaboqaError(f"no Wikidata id column found in {path} (columns: {header})")


def merge_outputs(
    enpkg_csv: str | Path, wikidata_csv: str | Path, out_path: str | Path
) -> Path:
    """Intersection of the two files' Wikidata ids after canonicalization,
    deduplicated, sorted ascending by numeric Q-id."""
    for path in (enpkg_csv, wikidata_csv):
        if not Path(path).is_file():
            raise MetaboqaError(f"merge input not readable: {path}")
    left = {c for v in _read_id_column(Path(enpkg_csv)) if (c := canonical_wd_iri(v))}
    right = {c for v in _read_id_column(Path(wikidata_csv)) if (c := canonical_wd_iri(v))}
    common = sorted(left & right, key=_qid_number)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id"])
        for iri in common:
            writer.writerow([iri])
    return out_path

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional
from urllib.parse import urlparse

INCHIKEY_PATTERN = re.compile(r"^[A-Z]{14}-[A-Z]{10}-[A-Z]$")

KINDS = ("taxon", "chemical_class", "target", "structure")
SOURCES = ("plant_db", "chemical_index", "gnps_api", "chembl_api", "wikidata_endpoint")


def is_valid_iri(value: str) -> bool:
    parsed = urlparse(value)
    return parsed.scheme in ("http", "https") and bool(parsed.netloc)


@dataclass(frozen=True)
class ResolvedEntity:
    """A surface form mapped to a canonical identifier, with provenance."""

    surface: str
    kind: str
    identifier: str  # IRI, or InChIKey for structures
    source: str
    score: Optional[float] = None  # similarity; chemical_class only

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown entity kind {self.kind!r}")
        if self.source not in SOURCES:
            raise ValueError(f"unknown entity source {self.source!r}")
        if self.kind == "structure":
            if not INCHIKEY_PATTERN.match(self.identifier):
                raise ValueError(f"not an InChIKey: {self.identifier!r}")
        elif not is_valid_iri(self.identifier):
            raise ValueError(f"not an IRI: {self.identifier!r}")
        if (self.score is not None) != (self.kind == "chemical_class"):
            raise ValueError("similarity score is set iff kind is chemical_class")

    def to_dict(self) -> dict:
        d = {
            "surface": self.surface,
            "kind": self.kind,
            "identifier": self.identifier,
            "source": self.source,
        }
        if self.score is not None:
            d["score"] = self.score
        return d

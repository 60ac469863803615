"""KG-agent toolset: map surface mentions to canonical identifiers.

Every resolver returns identifiers verbatim from its source (CSV row,
index entry, or API payload); nothing is ever synthesized locally.
"""

from .base import ResolvedEntity, INCHIKEY_PATTERN, is_valid_iri  # noqa: F401
from .plants import PlantDb  # noqa: F401
from .chemicals import ChemicalIndex  # noqa: F401
from .external import (  # noqa: F401
    ChemblTargetResolver,
    GnpsStructureResolver,
    WikidataTaxonResolver,
)

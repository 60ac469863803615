"""Chemical-class name resolution via similarity search.

The index is built from a precompiled class CSV. The default backend is
a deterministic character-trigram TF-IDF cosine index (no network); an
embedding-based vector index can be dropped in behind the same surface.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Optional

from sklearn.feature_extraction.text import TfidfVectorizer

from ..errors import ConfigError
from .base import ResolvedEntity

DEFAULT_THRESHOLD = 0.25


def _normalize(text: str) -> str:
    return " ".join(text.split()).casefold()


class ChemicalIndex:
    """label -> chemical-class IRI with top-1 cosine retrieval."""

    def __init__(self, entries: list[tuple[str, str]], threshold: float = DEFAULT_THRESHOLD):
        if not entries:
            raise ConfigError("chemical index needs at least one entry")
        self.entries = list(entries)
        self.threshold = threshold
        self._vectorizer = TfidfVectorizer(analyzer="char", ngram_range=(3, 3), lowercase=False)
        self._matrix = self._vectorizer.fit_transform(
            [_normalize(label) for label, _ in self.entries]
        )

    @classmethod
    def from_csv(
        cls,
        path: str | Path,
        label_column: str = "label",
        iri_column: str = "iri",
        threshold: float = DEFAULT_THRESHOLD,
    ) -> "ChemicalIndex":
        path = Path(path)
        try:
            with open(path, newline="", encoding="utf-8") as fh:
                reader = csv.DictReader(fh)
                fields = reader.fieldnames or []
                if label_column not in fields or iri_column not in fields:
                    raise ConfigError(
                        f"chemical CSV {path} needs columns "
                        f"({label_column}, {iri_column}), has {fields}"
                    )
                entries = [(row[label_column], row[iri_column]) for row in reader]
        except OSError as exc:
            raise ConfigError(f"cannot read chemical CSV {path}: {exc}")
        return cls(entries, threshold=threshold)

    def resolve(self, name: str) -> Optional[ResolvedEntity]:
        """Top-1 hit with its score, or None below the threshold."""
        normalized = _normalize(name)
        if not normalized:
            return None
        vector = self._vectorizer.transform([normalized])
        similarities = (self._matrix @ vector.T).toarray().ravel()
        best = int(similarities.argmax())
        score = float(similarities[best])
        if score < self.threshold:
            return None
        label, iri = self.entries[best]
        return ResolvedEntity(
            surface=name,
            kind="chemical_class",
            identifier=iri,
            source="chemical_index",
            score=round(score, 6),
        )

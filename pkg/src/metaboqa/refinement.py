"""Exemplar store for single-pass query refinement.

Holds (natural question, reference SPARQL) pairs behind a deterministic
similarity index; retrieval returns exactly one exemplar.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Optional

from sklearn.feature_extraction.text import TfidfVectorizer

from .errors import ConfigError


class RefinementStore:
    def __init__(self, entries: list[tuple[str, str]]):
        self.entries = [(q, s) for q, s in entries if q.strip() and s.strip()]
        self._vectorizer = None
        self._matrix = None
        if self.entries:
            self._vectorizer = TfidfVectorizer(analyzer="char", ngram_range=(3, 3), lowercase=True)
            self._matrix = self._vectorizer.fit_transform([q for q, _ in self.entries])

    def __len__(self) -> int:
        return len(self.entries)

    @classmethod
    def from_csv(
        cls,
        path: str | Path,
        question_column: str = "question",
        query_column: str = "reference_query",
    ) -> "RefinementStore":
        path = Path(path)
        try:
            with open(path, newline="", encoding="utf-8") as fh:
                reader = csv.DictReader(fh)
                fields = reader.fieldnames or []
                if question_column not in fields or query_column not in fields:
                    raise ConfigError(
                        f"refinement store {path} needs columns "
                        f"({question_column}, {query_column}), has {fields}"
                    )
                entries = [(row[question_column], row[query_column]) for row in reader]
        except OSError as exc:
            raise ConfigError(f"cannot read refinement store {path}: {exc}")
        return cls(entries)

    def without_question(self, question: str) -> "RefinementStore":
        """Copy excluding exemplars for the given question (evaluation
        leakage control)."""
        needle = question.strip().casefold()
        return RefinementStore(
            [(q, s) for q, s in self.entries if q.strip().casefold() != needle]
        )

    def retrieve(self, text: str) -> Optional[tuple[str, str]]:
        """Single most-similar exemplar, or None when the store is empty."""
        if not self.entries:
            return None
        vector = self._vectorizer.transform([text])
        similarities = (self._matrix @ vector.T).toarray().ravel()
        return self.entries[int(similarities.argmax())]

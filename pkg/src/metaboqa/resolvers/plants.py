"""Plant-name presence checks against the curated CSV."""

from __future__ import annotations

import csv
from pathlib import Path

from ..errors import ConfigError


def normalize_plant_name(name: str) -> str:
    """Trim, case-fold, collapse internal whitespace."""
    return " ".join(name.split()).casefold()


class PlantDb:
    """Exact-match lookup over normalized plant names."""

    def __init__(self, names):
        self._names = {normalize_plant_name(n) for n in names if n.strip()}

    def __len__(self) -> int:
        return len(self._names)

    @classmethod
    def from_csv(cls, path: str | Path, column: str = "plant_name") -> "PlantDb":
        path = Path(path)
        try:
            with open(path, newline="", encoding="utf-8") as fh:
                reader = csv.DictReader(fh)
                if reader.fieldnames is None or column not in reader.fieldnames:
                    raise ConfigError(
                        f"plant database {path} lacks column {column!r} "
                        f"(has {reader.fieldnames})"
                    )
                return cls(row[column] or "" for row in reader)
        except OSError as exc:
            raise ConfigError(f"cannot read plant database {path}: {exc}")

    def contains(self, name: str) -> bool:
        """Present/Absent check; empty input never matches."""
        normalized = normalize_plant_name(name)
        return bool(normalized) and normalized in self._names

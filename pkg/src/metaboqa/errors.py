"""Exception hierarchy shared across the package."""


class MetaboqaError(Exception):
    """Base class for all package errors."""


class ConfigError(MetaboqaError):
    """Bad or missing configuration (unreadable files, invalid modes)."""


class ProviderError(MetaboqaError):
    """LLM provider call failed.

    ``retriable`` marks transport-level failures that a retry may fix.
    """

    def __init__(self, message: str, retriable: bool = False):
        super().__init__(message)
        self.retriable = retriable


class ReplayMissError(MetaboqaError):
    """Replay-mode request had no matching cassette entry. Never falls
    through to a live call."""

    def __init__(self, fingerprint: str):
        super().__init__(f"no cassette entry for request fingerprint {fingerprint}")
        self.fingerprint = fingerprint


class ResolverError(MetaboqaError):
    """External resolution failed (API unreachable, malformed payload)."""

    def __init__(self, message: str, retriable: bool = False):
        super().__init__(message)
        self.retriable = retriable


class ResolutionNotFound(MetaboqaError):
    """The source answered but had no match; carries a refinement hint."""


class AmbiguousEntity(MetaboqaError):
    """Several candidates and no exact-name winner."""

    def __init__(self, name: str, candidates: list):
        listing = ", ".join(str(c) for c in candidates)
        super().__init__(f"ambiguous entity {name!r}: candidates {listing}")
        self.candidates = candidates


class TurtleParseError(MetaboqaError):
    """Turtle document failed to parse; ``line`` is 1-based."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class SparqlParseError(MetaboqaError):
    """Query text is not a parseable SPARQL SELECT."""


class UnsupportedSparql(SparqlParseError):
    """Syntactically plausible SPARQL using features outside the local
    engine's subset (the HTTP endpoint path accepts full SPARQL 1.1)."""


class EndpointError(MetaboqaError):
    """SPARQL endpoint returned an error or was unreachable."""


class ArtifactSecurityError(MetaboqaError):
    """Attempted path escape outside a session's artifact directory."""


class ChartSpecError(MetaboqaError):
    """Chart request cannot be satisfied by the available columns."""

"""Prompt templates: external text files keyed by prompt_ref.

Templates ship as best-effort reconstructions and are explicitly
replaceable: point ``PromptLibrary`` at another directory to swap them.
Loaded once at startup (no hot reload while running); placeholders use
``string.Template`` syntax ($name).
"""

from __future__ import annotations

from pathlib import Path
from string import Template

from ..errors import ConfigError

_TEMPLATES_DIR = Path(__file__).parent / "templates"


class PromptLibrary:
    def __init__(self, directory: str | Path = _TEMPLATES_DIR):
        directory = Path(directory)
        if not directory.is_dir():
            raise ConfigError(f"prompt template directory not found: {directory}")
        self._templates: dict[str, Template] = {}
        for path in sorted(directory.glob("*.txt")):
            self._templates[path.stem] = Template(path.read_text(encoding="utf-8"))
        if not self._templates:
            raise ConfigError(f"no prompt templates in {directory}")

    def refs(self) -> list[str]:
        return sorted(self._templates)

    def render(self, prompt_ref: str, **values: str) -> str:
        template = self._templates.get(prompt_ref)
        if template is None:
            raise ConfigError(f"unknown prompt_ref {prompt_ref!r} (have {self.refs()})")
        try:
            return template.substitute(**values)
        except KeyError as exc:
            raise ConfigError(f"prompt {prompt_ref!r} is missing value for {exc}")

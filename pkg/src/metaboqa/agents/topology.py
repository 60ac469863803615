"""The fixed directed graph hosting the six agents.

Messages travel along edges; the supervisor is the hub. The edge set is
validated at startup: unknown tools, missing agents, or unreachable
nodes fail fast rather than at routing time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import ConfigError

AGENT_IDS = ("entry", "validator", "supervisor", "kg", "sparql_runner", "interpreter")
TERMINAL = "terminal"

EDGES: frozenset[tuple[str, str]] = frozenset(
    {
        ("entry", "validator"),
        ("entry", "supervisor"),  # follow-up questions skip validation
        ("entry", TERMINAL),  # empty-question rejection
        ("validator", "supervisor"),
        ("validator", TERMINAL),  # invalid-question rejection
        ("supervisor", "kg"),
        ("kg", "supervisor"),
        ("supervisor", "sparql_runner"),
        ("sparql_runner", "supervisor"),
        ("supervisor", "interpreter"),
        ("interpreter", "supervisor"),
        ("supervisor", TERMINAL),
    }
)

DEFAULT_TOOL_REFS = {
    "entry": ["file_analyzer"],
    "validator": ["plant_db_checker"],
    "supervisor": [],
    "kg": ["taxon_resolver", "chemical_resolver", "target_resolver", "smiles_resolver"],
    "sparql_runner": ["sparql_chain", "wikidata_structure_search", "output_merger"],
    "interpreter": ["result_summarizer", "chart_spec", "spectrum_plotter"],
}

PROMPT_REFS = {
    "entry": "entry",
    "validator": "validator",
    "supervisor": "supervisor",
    "kg": "kg",
    "sparql_runner": "sparql_runner",
    "interpreter": "interpreter_summary",
}


@dataclass(frozen=True)
class AgentNode:
    id: str
    model_ref: str
    prompt_ref: str
    tool_refs: tuple[str, ...] = ()


@dataclass
class GraphTopology:
    nodes: dict[str, AgentNode]
    edges: frozenset[tuple[str, str]] = EDGES
    entry_id: str = "entry"

    def validate(self, registered_tools: set[str]) -> None:
        ids = list(self.nodes)
        if sorted(ids) != sorted(AGENT_IDS):
            raise ConfigError(f"topology must contain exactly {AGENT_IDS}, has {ids}")
        if self.entry_id != "entry":
            raise ConfigError("topology entry point must be the entry agent")
        for node in self.nodes.values():
            unknown = set(node.tool_refs) - registered_tools
            if unknown:
                raise ConfigError(f"agent {node.id} references unknown tools {sorted(unknown)}")
        # every agent reachable from entry
        reachable = {self.entry_id}
        frontier = [self.entry_id]
        while frontier:
            current = frontier.pop()
            for src, dst in self.edges:
                if src == current and dst not in reachable:
                    reachable.add(dst)
                    frontier.append(dst)
        missing = set(AGENT_IDS) - reachable
        if missing:
            raise ConfigError(f"agents unreachable from entry: {sorted(missing)}")

    def successors(self, agent_id: str) -> set[str]:
        return {dst for src, dst in self.edges if src == agent_id}

    def has_edge(self, src: str, dst: str) -> bool:
        return (src, dst) in self.edges


def build_topology(model_ref: str) -> GraphTopology:
    nodes = {
        agent_id: AgentNode(
            id=agent_id,
            model_ref=model_ref,
            prompt_ref=PROMPT_REFS[agent_id],
            tool_refs=tuple(DEFAULT_TOOL_REFS[agent_id]),
        )
        for agent_id in AGENT_IDS
    }
    return GraphTopology(nodes=nodes)

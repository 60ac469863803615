from .messages import AgentMessage, SessionState, TraceEvent  # noqa: F401
from .topology import AGENT_IDS, AgentNode, GraphTopology, TERMINAL, build_topology  # noqa: F401
from .runtime import Engine  # noqa: F401

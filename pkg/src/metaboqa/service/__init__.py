from .app import create_app  # noqa: F401
from .store import SessionService  # noqa: F401

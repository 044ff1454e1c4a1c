"""Reference server for the stdio JSON model protocol."""

from .oracle import ReferenceOracle
from .server import ServerConfig, build_model, handle_request, serve

__version__ = "0.1.0"

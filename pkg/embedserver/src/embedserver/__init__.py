"""Contextual embedding service with a newline-delimited JSON protocol."""

from .encoders import HashEncoder, make_encoder
from .server import handle_line, serve_stream, serve_tcp

__version__ = "0.1.0"

__all__ = ["HashEncoder", "make_encoder", "handle_line", "serve_stream", "serve_tcp", "__version__"]

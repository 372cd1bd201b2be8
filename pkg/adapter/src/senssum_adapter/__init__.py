"""Serve transducer models behind the senssum wire protocol.

The pipeline talks to its backends over two transports: newline-delimited
JSON on a subprocess's stdio, and JSON arrays POSTed to an HTTP endpoint.
This package is the production side of that contract. It loads a model per
role (asr, tsum, e2e), answers each request with exactly one response, and
never reorders or retries; ordering and timeouts belong to the caller.

Model choice is configuration, not code: the CLI takes ``--model
role=family:identifier`` flags and an ``echo`` engine ships for protocol
work on machines without any model weights installed.
"""

from .engines import AdapterConfig, AdapterError, Engine, load_engine
from .server import ServeOptions, handle_payload, serve_http, serve_stdio

__version__ = "0.1.0"

__all__ = [
    "AdapterConfig",
    "AdapterError",
    "Engine",
    "ServeOptions",
    "handle_payload",
    "load_engine",
    "serve_http",
    "serve_stdio",
]

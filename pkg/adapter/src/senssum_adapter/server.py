"""Both transports of the wire protocol.

Every request gets exactly one response object with exactly the keys id,
output, score, error; error is null on success. A response that cannot
name its request (unparseable line, missing id) carries id "". The server
may answer in any order; sequencing and timeouts are the caller's job, so
nothing here retries or buffers for ordering.

ServeOptions carries fault-injection hooks (jitter, injected failures,
dropped ids) used by the protocol test harness. They are inert by default
and cost nothing in production paths.
"""

from __future__ import annotations

import json
import sys
import threading
import time
import zlib
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import IO

from .engines import KINDS, AdapterConfig, Engine

# a dropped request must outlive any sane client deadline
_DROP_SLEEP_SEC = 600.0


@dataclass(frozen=True)
class ServeOptions:
    host: str = "127.0.0.1"
    port: int = 0
    jitter_ms: int = 0
    fail_ids: tuple[str, ...] = ()
    drop_ids: tuple[str, ...] = ()


def _response(rid: str, output: str = "", score: float | None = None,
              error: str | None = None) -> dict:
    return {"id": rid, "output": output, "score": score, "error": error}


def _jitter_sec(rid: str, jitter_ms: int) -> float:
    # stable per id so reruns see the same interleaving pressure
    return (zlib.crc32(rid.encode("utf-8")) % 1000) / 1000.0 * jitter_ms / 1000.0


def handle_payload(payload: object, engine: Engine, config: AdapterConfig,
                   options: ServeOptions) -> dict | None:
    """One decoded wire request to one wire response.

    Returns None for ids configured to be dropped; the stdio loop then
    writes nothing and the HTTP handler stalls instead.
    """
    if not isinstance(payload, dict):
        return _response("", error="malformed: request must be a JSON object")
    rid = payload.get("id")
    if not isinstance(rid, str) or not rid:
        return _response("", error="malformed: missing or empty id")
    kind = payload.get("kind")
    if kind not in KINDS:
        return _response(rid, error=f"malformed: unknown kind {kind!r}")
    text = payload.get("input")
    if not isinstance(text, str):
        return _response(rid, error="malformed: missing input")
    beam = payload.get("beam_width", config.beam_width)
    if not isinstance(beam, int) or isinstance(beam, bool) or beam < 1:
        return _response(rid, error=f"malformed: bad beam_width {beam!r}")

    if rid in options.drop_ids:
        return None
    if options.jitter_ms:
        time.sleep(_jitter_sec(rid, options.jitter_ms))
    if rid in options.fail_ids:
        return _response(rid, error="injected failure")

    try:
        output = engine.run(text, kind, beam)
    except Exception as exc:
        return _response(rid, error=f"inference failed: {exc}")
    return _response(rid, output=output)


def _handle_line(line: str, engine: Engine, config: AdapterConfig,
                 options: ServeOptions) -> dict | None:
    try:
        payload = json.loads(line)
    except ValueError as exc:
        return _response("", error=f"malformed: not JSON ({exc})")
    return handle_payload(payload, engine, config, options)


def serve_stdio(engine: Engine, config: AdapterConfig, options: ServeOptions,
                stdin: IO[str] | None = None, stdout: IO[str] | None = None) -> None:
    """Answer newline-delimited JSON requests until EOF.

    Each line is handled on its own thread so injected jitter and drops
    cannot stall the requests behind them; a lock keeps output lines whole.
    """
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    write_lock = threading.Lock()
    workers: list[threading.Thread] = []

    def answer(line: str) -> None:
        resp = _handle_line(line, engine, config, options)
        if resp is None:
            return
        with write_lock:
            stdout.write(json.dumps(resp, sort_keys=True) + "\n")
            stdout.flush()

    for line in stdin:
        if not line.strip():
            continue
        worker = threading.Thread(target=answer, args=(line,), daemon=True)
        worker.start()
        workers.append(worker)

    for worker in workers:
        worker.join(timeout=_DROP_SLEEP_SEC)


def serve_http(engine: Engine, config: AdapterConfig, options: ServeOptions) -> None:
    """POST /transduce with a JSON array of requests, answered as an array.

    A single object body is accepted and wrapped. Binds the configured
    host and port (port 0 picks a free one) and prints
    ``listening on HOST:PORT`` to stderr once ready.
    """

    class Handler(BaseHTTPRequestHandler):
        def do_POST(self) -> None:  # noqa: N802 (http.server API)
            if self.path != "/transduce":
                self.send_error(404, "unknown path")
                return
            length = int(self.headers.get("Content-Length", "0"))
            body = self.rfile.read(length)
            try:
                payload = json.loads(body.decode("utf-8"))
            except (UnicodeDecodeError, ValueError):
                self.send_error(400, "body is not JSON")
                return
            items = payload if isinstance(payload, list) else [payload]
            out = []
            for item in items:
                resp = handle_payload(item, engine, config, options)
                if resp is None:
                    # dropped: stall past the client deadline
                    time.sleep(_DROP_SLEEP_SEC)
                    resp = _response("", error="dropped")
                out.append(resp)
            data = json.dumps(out, sort_keys=True).encode("utf-8")
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def log_message(self, format: str, *args: object) -> None:
            pass

    httpd = ThreadingHTTPServer((options.host, options.port), Handler)
    host, port = httpd.server_address[:2]
    print(f"listening on {host}:{port}", file=sys.stderr, flush=True)
    try:
        httpd.serve_forever()
    finally:
        httpd.server_close()

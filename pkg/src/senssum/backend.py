"""Transducer backends behind a tiny JSON wire protocol.

A backend turns an input string (text, an audio path, or a corrupted
text surrogate) into an output string. Real models and deterministic
toys sit behind the same two transports:

* subprocess_stdio: newline-delimited JSON on the child's stdin/stdout,
  one response line per request line, any completion order.
* http: POST /transduce with a JSON array of requests, JSON array back.

The driver is the sole reorderer: callers always get responses in
request order. At most max_inflight requests are outstanding at once.
A request that exceeds its deadline yields an error response and the
batch keeps going; transport-level failures are retried with
exponential backoff and only then raise, naming every unresolved id.
"""

from __future__ import annotations

import json
import os
import queue
import shlex
import subprocess
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import requests as _requests

from .errors import BackendError, InvalidInput

KINDS = ("asr", "tsum", "e2e", "judge")
TRANSPORTS = ("subprocess_stdio", "http")

RETRY_ATTEMPTS = 3
RETRY_BASE_SEC = 0.25

JUDGE_KEY_ENV = "SENSSUM_JUDGE_KEY"

DEFAULT_BEAM_WIDTH = 4


@dataclass(frozen=True)
class TransduceRequest:
    id: str
    input: str
    beam_width: int = DEFAULT_BEAM_WIDTH

    def __post_init__(self):
        if not self.id:
            raise InvalidInput("request id must be non-empty")
        if self.beam_width < 1:
            raise InvalidInput(f"beam_width must be >= 1, got {self.beam_width}")

    def to_wire(self, kind: str) -> dict:
        return {"id": self.id, "kind": kind, "input": self.input,
                "beam_width": self.beam_width}


@dataclass(frozen=True)
class TransduceResponse:
    id: str
    output: str
    score: float | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_wire(self) -> dict:
        return {"id": self.id, "output": self.output,
                "score": self.score, "error": self.error}

    @classmethod
    def from_wire(cls, payload: dict) -> "TransduceResponse":
        if not isinstance(payload, dict) or "id" not in payload:
            raise InvalidInput(f"malformed response payload: {payload!r}")
        score = payload.get("score")
        return cls(
            id=str(payload["id"]),
            output=str(payload.get("output") or ""),
            score=float(score) if score is not None else None,
            error=payload.get("error"),
        )


def parse_request(payload: dict) -> tuple[TransduceRequest, str]:
    """Wire dict to (request, kind); used by servers."""
    if not isinstance(payload, dict):
        raise InvalidInput("request is not a JSON object")
    for key in ("id", "kind", "input"):
        if key not in payload:
            raise InvalidInput(f"request missing {key!r}")
    kind = payload["kind"]
    if kind not in KINDS:
        raise InvalidInput(f"unknown kind {kind!r}")
    req = TransduceRequest(
        id=str(payload["id"]),
        input=str(payload["input"]),
        beam_width=int(payload.get("beam_width", DEFAULT_BEAM_WIDTH)),
    )
    return req, kind


@dataclass(frozen=True)
class BackendEndpoint:
    """Where a transducer lives.

    `address` is a command line for subprocess_stdio or a base URL for
    http. Endpoints are immutable and safe to share across threads.
    """

    kind: str
    transport: str
    address: str
    timeout_sec: float = 30.0
    max_inflight: int = 8

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInput(f"unknown backend kind {self.kind!r}")
        if self.transport not in TRANSPORTS:
            raise InvalidInput(f"unknown transport {self.transport!r}")
        if self.timeout_sec <= 0:
            raise InvalidInput("timeout_sec must be positive")
        if self.max_inflight < 1:
            raise InvalidInput("max_inflight must be >= 1")


@dataclass(frozen=True)
class InProcessBackend:
    """A plain function dressed up as a backend, for tests and toys."""

    kind: str
    fn: Callable[[str], str] = field(compare=False)
    max_inflight: int = 8

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInput(f"unknown backend kind {self.kind!r}")


Backend = BackendEndpoint | InProcessBackend


# ---------------------------------------------------------------------------
# Batch driver
# ---------------------------------------------------------------------------


def transduce_batch(
    endpoint: Backend,
    reqs: Sequence[TransduceRequest],
    latency_out: list | None = None,
) -> list[TransduceResponse]:
    """Run a batch and return responses in request order.

    Pass `latency_out` to collect per-request wall-clock latencies as
    (id, seconds) tuples for pipeline logs.
    """
    ids = [r.id for r in reqs]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise InvalidInput(f"duplicate request ids: {', '.join(dupes)}")
    if not reqs:
        return []
    if isinstance(endpoint, InProcessBackend):
        return _transduce_inprocess(endpoint, reqs, latency_out)
    if endpoint.transport == "subprocess_stdio":
        return _transduce_stdio(endpoint, reqs, latency_out)
    return _transduce_http(endpoint, reqs, latency_out)


def _transduce_inprocess(endpoint, reqs, latency_out):
    out = []
    for req in reqs:
        start = time.monotonic()
        try:
            result = endpoint.fn(req.input)
            out.append(TransduceResponse(id=req.id, output=result))
        except Exception as exc:
            out.append(TransduceResponse(id=req.id, output="", error=str(exc)))
        if latency_out is not None:
            latency_out.append((req.id, time.monotonic() - start))
    return out


# -- subprocess_stdio --------------------------------------------------------


def _transduce_stdio(endpoint, reqs, latency_out):
    resolved: dict[str, TransduceResponse] = {}
    pending = list(reqs)
    for attempt in range(RETRY_ATTEMPTS):
        if attempt > 0:
            time.sleep(RETRY_BASE_SEC * 2 ** (attempt - 1))
        pending = _stdio_round(endpoint, pending, resolved, latency_out)
        if not pending:
            break
    if pending:
        raise BackendError(
            f"stdio backend {endpoint.address!r} failed after {RETRY_ATTEMPTS} attempts",
            failed_ids=[r.id for r in pending],
        )
    return [resolved[r.id] for r in reqs]


def _stdio_round(endpoint, reqs, resolved, latency_out):
    """One process lifetime. Returns the requests still unresolved."""
    try:
        proc = subprocess.Popen(
            shlex.split(endpoint.address),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
            text=True,
            encoding="utf-8",
        )
    except OSError:
        return list(reqs)

    lines: queue.Queue = queue.Queue()
    reader = threading.Thread(target=_pump_lines, args=(proc.stdout, lines), daemon=True)
    reader.start()

    todo = list(reqs)
    inflight: dict[str, tuple[TransduceRequest, float, float]] = {}
    next_index = 0
    broken = False
    try:
        while next_index < len(todo) or inflight:
            while next_index < len(todo) and len(inflight) < endpoint.max_inflight and not broken:
                req = todo[next_index]
                next_index += 1
                start = time.monotonic()
                try:
                    proc.stdin.write(json.dumps(req.to_wire(endpoint.kind)) + "\n")
                    proc.stdin.flush()
                except (BrokenPipeError, OSError, ValueError):
                    broken = True
                    next_index -= 1
                    break
                inflight[req.id] = (req, start, start + endpoint.timeout_sec)

            if not inflight:
                if broken:
                    break
                continue

            wait = max(0.0, min(d for _, _, d in inflight.values()) - time.monotonic())
            try:
                item = lines.get(timeout=wait)
            except queue.Empty:
                item = None

            if item is _EOF:
                broken = True
                _expire(inflight, resolved, latency_out, expire_all=False)
                break
            if item is not None:
                resp = _parse_response_line(item)
                if resp is not None and resp.id in inflight:
                    req, start, _ = inflight.pop(resp.id)
                    resolved[resp.id] = resp
                    if latency_out is not None:
                        latency_out.append((resp.id, time.monotonic() - start))
            _expire(inflight, resolved, latency_out, expire_all=False)
    finally:
        for stream in (proc.stdin, proc.stdout):
            try:
                stream.close()
            except OSError:
                pass
        try:
            proc.terminate()
            proc.wait(timeout=5)
        except (OSError, subprocess.TimeoutExpired):
            proc.kill()

    return [r for r in todo if r.id not in resolved]


_EOF = object()


def _pump_lines(stream, lines: queue.Queue):
    try:
        for line in stream:
            lines.put(line)
    except (OSError, ValueError):
        pass
    lines.put(_EOF)


def _parse_response_line(line: str) -> TransduceResponse | None:
    line = line.strip()
    if not line:
        return None
    try:
        return TransduceResponse.from_wire(json.loads(line))
    except (json.JSONDecodeError, InvalidInput, TypeError, ValueError):
        # Garbage on stdout is not a protocol response; the deadline
        # sweep will catch the request if a real reply never comes.
        return None


def _expire(inflight, resolved, latency_out, expire_all):
    now = time.monotonic()
    for rid in [rid for rid, (_, _, deadline) in inflight.items()
                if expire_all or now >= deadline]:
        req, start, _ = inflight.pop(rid)
        resolved[rid] = TransduceResponse(
            id=rid, output="", error=f"timeout after {now - start:.3f}s",
        )
        if latency_out is not None:
            latency_out.append((rid, now - start))


# -- http ---------------------------------------------------------------------


def _transduce_http(endpoint, reqs, latency_out):
    from concurrent.futures import ThreadPoolExecutor

    url = endpoint.address.rstrip("/") + "/transduce"
    headers = {"Content-Type": "application/json"}
    key = os.environ.get(JUDGE_KEY_ENV)
    if key and endpoint.kind == "judge":
        headers["Authorization"] = f"Bearer {key}"

    def one(req: TransduceRequest):
        start = time.monotonic()
        last_error = "unreachable"
        for attempt in range(RETRY_ATTEMPTS):
            if attempt > 0:
                time.sleep(RETRY_BASE_SEC * 2 ** (attempt - 1))
            try:
                resp = _requests.post(
                    url,
                    json=[req.to_wire(endpoint.kind)],
                    headers=headers,
                    timeout=endpoint.timeout_sec,
                )
            except _requests.Timeout:
                elapsed = time.monotonic() - start
                return TransduceResponse(
                    id=req.id, output="", error=f"timeout after {elapsed:.3f}s",
                ), elapsed
            except _requests.RequestException as exc:
                last_error = f"transport: {exc}"
                continue
            if resp.status_code != 200:
                last_error = f"http status {resp.status_code}"
                continue
            try:
                body = resp.json()
                parsed = [TransduceResponse.from_wire(p) for p in body]
            except (ValueError, InvalidInput):
                last_error = "unparseable response body"
                continue
            match = next((p for p in parsed if p.id == req.id), None)
            if match is None:
                last_error = "response missing request id"
                continue
            return match, time.monotonic() - start
        return None, last_error

    with ThreadPoolExecutor(max_workers=endpoint.max_inflight) as pool:
        results = list(pool.map(one, reqs))

    failed = [req.id for req, (resp, _) in zip(reqs, results) if resp is None]
    if failed:
        detail = next(info for resp, info in results if resp is None)
        raise BackendError(
            f"http backend {endpoint.address!r} failed after {RETRY_ATTEMPTS} attempts ({detail})",
            failed_ids=failed,
        )
    out = []
    for req, (resp, elapsed) in zip(reqs, results):
        out.append(resp)
        if latency_out is not None:
            latency_out.append((req.id, elapsed))
    return out


# ---------------------------------------------------------------------------
# Composition
# ---------------------------------------------------------------------------


def cascade_transduce(
    asr: Backend,
    tsum: Backend,
    reqs: Sequence[TransduceRequest],
    latency_out: list | None = None,
) -> list[TransduceResponse]:
    """Two-stage transduction: recognize, then summarize the transcript.

    A request that fails in the recognition stage is not forwarded; its
    error comes back tagged with the stage that produced it.
    """
    _check_kind(asr, "asr")
    _check_kind(tsum, "tsum")
    first = transduce_batch(asr, reqs, latency_out)
    forward = []
    for req, resp in zip(reqs, first):
        if resp.ok:
            forward.append(TransduceRequest(
                id=req.id, input=resp.output, beam_width=req.beam_width,
            ))
    second = {r.id: r for r in transduce_batch(tsum, forward, latency_out)}
    out = []
    for req, resp in zip(reqs, first):
        if not resp.ok:
            out.append(TransduceResponse(
                id=req.id, output="", score=resp.score,
                error=f"asr: {resp.error}",
            ))
            continue
        final = second[req.id]
        if final.ok:
            out.append(final)
        else:
            out.append(TransduceResponse(
                id=req.id, output="", score=final.score,
                error=f"tsum: {final.error}",
            ))
    return out


def e2e_transduce(
    e2e: Backend,
    reqs: Sequence[TransduceRequest],
    latency_out: list | None = None,
) -> list[TransduceResponse]:
    """Single-stage transduction straight from input to summary."""
    _check_kind(e2e, "e2e")
    return transduce_batch(e2e, reqs, latency_out)


def _check_kind(endpoint: Backend, expected: str):
    if endpoint.kind != expected:
        raise InvalidInput(f"expected a {expected} backend, got kind {endpoint.kind!r}")

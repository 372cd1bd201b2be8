"""Toy backend servers speaking the transduction wire protocol.

Run as a module: `python -m senssum.serve --transport stdio --role echo`.
These servers exist so the batch driver, the conformance suite, and any
external adapter can be exercised against known-good endpoints. The
misbehavior knobs (--sleep-ms, --jitter-ms, --fail-ids, --drop-ids,
--crash-after) simulate slow, flaky, and dying backends.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import threading
import time
from dataclasses import dataclass, field

from .backend import parse_request
from .errors import InvalidInput, SenssumError
from .judge import parse_judge_prompt, rouge_f_vs_transcription
from .prng import fnv1a64
from .toys import (
    CorruptionChannel,
    SalienceModel,
    SyntheticTaskConfig,
    corrupt,
    default_task_config,
    infer_salience,
    oracle_tsum,
)
from .metrics import TokenSeq

ROLES = ("echo", "corrupt", "oracle-tsum", "salience", "judge-rl")


@dataclass
class ServerConfig:
    role: str = "echo"
    sleep_ms: float = 0.0
    jitter_ms: float = 0.0
    fail_ids: frozenset[str] = frozenset()
    drop_ids: frozenset[str] = frozenset()
    crash_after: int = 0
    crash_once_flag: str = ""
    sub_rate: float = 0.0
    del_rate: float = 0.0
    ins_rate: float = 0.0
    channel_seed: int = 0
    model_path: str = ""
    max_edit: int = 1
    _model: SalienceModel | None = field(default=None, repr=False)
    _task: SyntheticTaskConfig | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.role not in ROLES:
            raise InvalidInput(f"unknown role {self.role!r}")
        if self.role == "salience":
            if not self.model_path:
                raise InvalidInput("salience role needs --model")
            self._model = SalienceModel.load(self.model_path)
        if self.role in ("corrupt", "oracle-tsum"):
            self._task = default_task_config()


def handle(cfg: ServerConfig, payload: dict) -> dict:
    """One request dict to one response dict (or None-like drop)."""
    try:
        req, _kind = parse_request(payload)
    except (InvalidInput, TypeError, ValueError) as exc:
        return {"id": str(payload.get("id", "")) if isinstance(payload, dict) else "",
                "output": "", "score": None, "error": f"malformed: {exc}"}

    _delay(cfg, req.id)
    if req.id in cfg.fail_ids:
        return {"id": req.id, "output": "", "score": None,
                "error": "injected failure"}

    try:
        output = _produce(cfg, req.input)
    except SenssumError as exc:
        return {"id": req.id, "output": "", "score": None, "error": str(exc)}
    return {"id": req.id, "output": output, "score": None, "error": None}


def _delay(cfg: ServerConfig, rid: str):
    wait = cfg.sleep_ms
    if cfg.jitter_ms > 0:
        wait += (fnv1a64(rid) % 1000) / 1000.0 * cfg.jitter_ms
    if wait > 0:
        time.sleep(wait / 1000.0)


def _produce(cfg: ServerConfig, text: str) -> str:
    if cfg.role == "echo":
        return text
    if cfg.role == "corrupt":
        channel = CorruptionChannel(
            sub_rate=cfg.sub_rate, del_rate=cfg.del_rate, ins_rate=cfg.ins_rate,
            alphabet=cfg._task.alphabet(), seed=cfg.channel_seed,
        )
        return corrupt(text, channel, fnv1a64(text))
    if cfg.role == "oracle-tsum":
        return oracle_tsum(text, cfg._task, max_edit=cfg.max_edit)
    if cfg.role == "salience":
        kept = infer_salience(cfg._model, TokenSeq.from_text(text))
        return " ".join(kept.tokens)
    if cfg.role == "judge-rl":
        parsed = parse_judge_prompt(text)
        fa = rouge_f_vs_transcription(parsed["summary_a"], parsed["transcription"])
        fb = rouge_f_vs_transcription(parsed["summary_b"], parsed["transcription"])
        return "B" if fb > fa else "A"
    raise InvalidInput(f"unhandled role {cfg.role!r}")


class _CrashCounter:
    """Counts responses and kills the process at the configured point."""

    def __init__(self, cfg: ServerConfig):
        self.cfg = cfg
        self.count = 0
        self.lock = threading.Lock()
        self.armed = cfg.crash_after > 0
        if self.armed and cfg.crash_once_flag and os.path.exists(cfg.crash_once_flag):
            self.armed = False

    def tick(self):
        if not self.armed:
            return
        with self.lock:
            self.count += 1
            if self.count >= self.cfg.crash_after:
                if self.cfg.crash_once_flag:
                    with open(self.cfg.crash_once_flag, "w", encoding="utf-8") as fh:
                        fh.write("crashed\n")
                os._exit(1)


# ---------------------------------------------------------------------------
# Transports
# ---------------------------------------------------------------------------


def serve_stdio(cfg: ServerConfig):
    """Read request lines, answer out of order as work completes."""
    crash = _CrashCounter(cfg)
    write_lock = threading.Lock()
    workers: list[threading.Thread] = []

    def respond(payload):
        resp = handle(cfg, payload)
        if resp["id"] in cfg.drop_ids:
            return
        with write_lock:
            sys.stdout.write(json.dumps(resp, ensure_ascii=False) + "\n")
            sys.stdout.flush()
        crash.tick()

    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        try:
            payload = json.loads(line)
        except json.JSONDecodeError:
            payload = {"id": ""}
        worker = threading.Thread(target=respond, args=(payload,), daemon=True)
        worker.start()
        workers.append(worker)
    for worker in workers:
        worker.join(timeout=60)


def serve_http(cfg: ServerConfig, host: str, port: int):
    from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

    crash = _CrashCounter(cfg)

    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args):
            pass

        def do_POST(self):
            if self.path.rstrip("/") != "/transduce":
                self.send_error(404)
                return
            length = int(self.headers.get("Content-Length", "0"))
            try:
                body = json.loads(self.rfile.read(length).decode("utf-8"))
            except (json.JSONDecodeError, UnicodeDecodeError):
                self.send_error(400, "bad json")
                return
            if not isinstance(body, list):
                body = [body]
            out = []
            for payload in body:
                resp = handle(cfg, payload)
                if resp["id"] in cfg.drop_ids:
                    time.sleep(600)   # simulate a hung backend
                out.append(resp)
            blob = json.dumps(out, ensure_ascii=False).encode("utf-8")
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(blob)))
            self.end_headers()
            self.wfile.write(blob)
            for _ in out:
                crash.tick()

    server = ThreadingHTTPServer((host, port), Handler)
    sys.stderr.write(f"listening on {host}:{server.server_address[1]}\n")
    sys.stderr.flush()
    server.serve_forever()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="senssum-serve", description="toy transduction backends",
    )
    parser.add_argument("--transport", choices=("stdio", "http"), default="stdio")
    parser.add_argument("--role", choices=ROLES, default="echo")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=0)
    parser.add_argument("--sleep-ms", type=float, default=0.0)
    parser.add_argument("--jitter-ms", type=float, default=0.0)
    parser.add_argument("--fail-ids", default="")
    parser.add_argument("--drop-ids", default="")
    parser.add_argument("--crash-after", type=int, default=0)
    parser.add_argument("--crash-once-flag", default="")
    parser.add_argument("--sub-rate", type=float, default=0.0)
    parser.add_argument("--del-rate", type=float, default=0.0)
    parser.add_argument("--ins-rate", type=float, default=0.0)
    parser.add_argument("--channel-seed", type=int, default=0)
    parser.add_argument("--model", default="")
    parser.add_argument("--max-edit", type=int, default=1)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = ServerConfig(
        role=args.role,
        sleep_ms=args.sleep_ms,
        jitter_ms=args.jitter_ms,
        fail_ids=frozenset(x for x in args.fail_ids.split(",") if x),
        drop_ids=frozenset(x for x in args.drop_ids.split(",") if x),
        crash_after=args.crash_after,
        crash_once_flag=args.crash_once_flag,
        sub_rate=args.sub_rate,
        del_rate=args.del_rate,
        ins_rate=args.ins_rate,
        channel_seed=args.channel_seed,
        model_path=args.model,
        max_edit=args.max_edit,
    )
    if args.transport == "stdio":
        serve_stdio(cfg)
    else:
        serve_http(cfg, args.host, args.port)
    return 0


if __name__ == "__main__":
    sys.exit(main())

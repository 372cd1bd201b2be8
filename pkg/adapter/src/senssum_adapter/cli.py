"""Command-line entry: pick models, pick a transport, serve.

Exit codes: 0 clean shutdown, 1 model or configuration failure, 2 usage.
"""

from __future__ import annotations

import argparse
import sys

from .engines import AdapterConfig, AdapterError, load_engine
from .server import ServeOptions, serve_http, serve_stdio


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="senssum-adapter",
        description="Serve transducer models over the senssum wire protocol.",
        allow_abbrev=False,
    )
    parser.add_argument(
        "--transport", choices=("stdio", "http"), default="stdio",
        help="newline-delimited JSON on stdio, or JSON arrays over HTTP")
    parser.add_argument(
        "--model", action="append", default=[], metavar="ROLE=FAMILY:ID",
        help="model for a request kind, e.g. asr=whisper:tiny or "
             "tsum=hf:t5-small; repeatable; with none given every kind echoes")
    parser.add_argument("--device", default="cpu", help="where models run")
    parser.add_argument(
        "--beam-width", type=int, default=4,
        help="default beam when a request omits beam_width; a request's own "
             "value is always forwarded unchanged")
    parser.add_argument("--batch-size", type=int, default=1,
                        help="inference batch size hint for loaded models")
    parser.add_argument("--host", default="127.0.0.1", help="http bind host")
    parser.add_argument("--port", type=int, default=0,
                        help="http bind port, 0 picks a free one")
    hooks = parser.add_argument_group("fault injection (test hooks)")
    hooks.add_argument("--jitter-ms", type=int, default=0,
                       help="per-id deterministic response delay")
    hooks.add_argument("--fail-ids", default="",
                       help="comma-separated ids answered with an error")
    hooks.add_argument("--drop-ids", default="",
                       help="comma-separated ids never answered")
    return parser


def _parse_models(parser: argparse.ArgumentParser, items: list[str]) -> dict[str, str]:
    models: dict[str, str] = {}
    for item in items:
        role, sep, spec = item.partition("=")
        if not sep or not role or not spec:
            parser.error(f"--model expects ROLE=FAMILY:ID, got {item!r}")
        models[role] = spec
    return models


def _split_ids(raw: str) -> tuple[str, ...]:
    return tuple(part for part in raw.split(",") if part)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = AdapterConfig(
            models=_parse_models(parser, args.model),
            device=args.device,
            beam_width=args.beam_width,
            batch_size=args.batch_size,
        )
        engine = load_engine(config)
    except AdapterError as exc:
        print(f"senssum-adapter: error: {exc}", file=sys.stderr)
        return 1

    options = ServeOptions(
        host=args.host,
        port=args.port,
        jitter_ms=args.jitter_ms,
        fail_ids=_split_ids(args.fail_ids),
        drop_ids=_split_ids(args.drop_ids),
    )
    if args.transport == "stdio":
        serve_stdio(engine, config, options)
    else:
        serve_http(engine, config, options)
    return 0


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()

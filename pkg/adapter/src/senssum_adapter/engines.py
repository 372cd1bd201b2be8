"""Model loading and the request-execution surface.

An engine is one callable behind all request kinds: ``run(text, kind,
beam_width) -> str``. The built-in echo engine answers every kind with its
input unchanged, which is all the protocol tests need. Real model families
(``hf:`` for transformers pipelines, ``whisper:`` for OpenAI Whisper) are
imported lazily so the package works on hosts without them installed; a
missing dependency surfaces as a load-time failure, not a server crash
halfway through a batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

KINDS = ("asr", "tsum", "e2e", "judge")


class AdapterError(Exception):
    """Configuration or model-loading failure; fatal before serving starts."""


@dataclass(frozen=True)
class AdapterConfig:
    """What to serve and how.

    models maps a request kind to a model spec string such as
    ``whisper:tiny`` or ``hf:t5-small``. Empty means echo mode.
    beam_width is the default used when a request omits the field; a
    request that carries its own value wins, always.
    """

    models: dict[str, str] = field(default_factory=dict)
    device: str = "cpu"
    beam_width: int = 4
    batch_size: int = 1

    def __post_init__(self) -> None:
        for role in self.models:
            if role not in KINDS:
                raise AdapterError(
                    f"unknown model role {role!r}, expected one of {', '.join(KINDS)}")
        if not self.device:
            raise AdapterError("device must be non-empty")
        if self.beam_width < 1:
            raise AdapterError(f"beam_width must be >= 1, got {self.beam_width}")
        if self.batch_size < 1:
            raise AdapterError(f"batch_size must be >= 1, got {self.batch_size}")


@dataclass(frozen=True)
class Engine:
    name: str
    fn: Callable[[str, str, int], str]

    def run(self, text: str, kind: str, beam_width: int) -> str:
        return self.fn(text, kind, beam_width)


def load_engine(config: AdapterConfig) -> Engine:
    """Build the engine for a config; echo when no models are named.

    Raises AdapterError when any named model cannot be loaded. Loading is
    eager on purpose: a bad model id should kill the server at startup
    with a diagnostic, never answer live traffic with errors.
    """
    if not config.models:
        return Engine(name="echo", fn=lambda text, kind, beam_width: text)

    loaders = {"hf": _load_transformers, "whisper": _load_whisper}
    fns: dict[str, Callable[[str, int], str]] = {}
    for role, spec in sorted(config.models.items()):
        family, sep, ident = spec.partition(":")
        loader = loaders.get(family)
        if loader is None or not sep or not ident:
            raise AdapterError(
                f"cannot load {role} model {spec!r}: expected 'family:identifier' "
                f"with family one of {', '.join(sorted(loaders))}")
        fns[role] = loader(role, ident, config)

    def dispatch(text: str, kind: str, beam_width: int) -> str:
        fn = fns.get(kind)
        if fn is None:
            # per-request condition, reported in the response error field
            raise RuntimeError(f"no model configured for kind {kind!r}")
        return fn(text, beam_width)

    return Engine(name="+".join(sorted(config.models)), fn=dispatch)


def _load_transformers(role: str, ident: str, config: AdapterConfig) -> Callable[[str, int], str]:
    try:
        from transformers import pipeline
    except ImportError:
        raise AdapterError(
            f"cannot load hf:{ident} for {role}: the 'transformers' package "
            "is not installed") from None

    tasks = {
        "asr": "automatic-speech-recognition",
        "tsum": "summarization",
        "e2e": "summarization",
        "judge": "text2text-generation",
    }
    device = -1 if config.device == "cpu" else config.device
    try:
        pipe = pipeline(tasks[role], model=ident, device=device)
    except Exception as exc:
        raise AdapterError(f"cannot load hf:{ident} for {role}: {exc}") from exc

    def fn(text: str, beam_width: int) -> str:
        result = pipe(text, generate_kwargs={"num_beams": beam_width})
        first = result[0] if isinstance(result, list) and result else result
        if isinstance(first, dict):
            for key in ("summary_text", "generated_text", "text"):
                if key in first:
                    return str(first[key])
        return str(first)

    return fn


def _load_whisper(role: str, ident: str, config: AdapterConfig) -> Callable[[str, int], str]:
    if role != "asr":
        raise AdapterError(f"whisper:{ident} only serves the asr role, not {role!r}")
    try:
        import whisper
    except ImportError:
        raise AdapterError(
            f"cannot load whisper:{ident}: the 'whisper' package is not "
            "installed") from None
    try:
        model = whisper.load_model(ident, device=config.device)
    except Exception as exc:
        raise AdapterError(f"cannot load whisper:{ident}: {exc}") from exc

    def fn(text: str, beam_width: int) -> str:
        # asr inputs name audio on disk
        result = model.transcribe(text, beam_size=beam_width)
        return str(result["text"]).strip()

    return fn

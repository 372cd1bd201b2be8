"""Pairwise A/B preference evaluation with position-swap hygiene.

Every item is judged twice, once in each presentation order. The two
verdicts must agree to count as a win; disagreement becomes a tie, and
unparseable or failed replies become failures. This cancels position
bias at the cost of statistical power, which is the right trade for an
automated judge.

The mock judge needs no network: it prefers the summary with the higher
ROUGE-L F against the transcription and is exactly reproducible.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .backend import Backend, TransduceRequest, transduce_batch
from .errors import BackendError, InvalidInput
from .metrics import TokenSeq, rouge_l

DEFAULT_PROMPT_TEMPLATE = """You are comparing two candidate summaries of a spoken sentence.
Considering the reference transcription, select the better summary.

TRANSCRIPTION:
{transcription}

SUMMARY A:
{summary_a}

SUMMARY B:
{summary_b}

Answer with exactly one letter: A or B."""

_SECTION_RE = re.compile(
    r"TRANSCRIPTION:\n(?P<transcription>.*?)\n\nSUMMARY A:\n(?P<summary_a>.*?)"
    r"\n\nSUMMARY B:\n(?P<summary_b>.*?)\n\nAnswer",
    re.DOTALL,
)

_ANSWER_RE = re.compile(r"(?<![0-9A-Za-z])([AB])(?![0-9A-Za-z])")


@dataclass(frozen=True)
class ABItem:
    """One comparison: two system outputs for the same sentence."""

    id: str
    transcription: str
    summary_a: str
    summary_b: str
    system_a: str
    system_b: str
    degenerate: bool = False

    def __post_init__(self):
        if self.system_a == self.system_b:
            raise InvalidInput(f"item {self.id}: system labels must differ")
        if (not self.summary_a or not self.summary_b) and not self.degenerate:
            raise InvalidInput(
                f"item {self.id}: empty summary must be flagged degenerate"
            )

    def swapped(self) -> "ABItem":
        return ABItem(
            id=self.id, transcription=self.transcription,
            summary_a=self.summary_b, summary_b=self.summary_a,
            system_a=self.system_b, system_b=self.system_a,
            degenerate=self.degenerate,
        )


@dataclass(frozen=True)
class ItemJudgement:
    id: str
    status: str                      # win | tie | failure
    winner: str | None = None        # system label when status == win
    first_pass: str | None = None    # letter from the A-first prompt
    second_pass: str | None = None   # letter from the swapped prompt
    notes: tuple[str, ...] = ()


@dataclass(frozen=True)
class PreferenceResult:
    system_a: str
    system_b: str
    wins_a: int
    wins_b: int
    ties: int
    failures: int

    @property
    def n_items(self) -> int:
        return self.wins_a + self.wins_b + self.ties + self.failures

    @property
    def pct_a(self) -> float:
        decided = self.wins_a + self.wins_b
        return 100.0 * self.wins_a / decided if decided else 0.0

    @property
    def pct_b(self) -> float:
        decided = self.wins_a + self.wins_b
        return 100.0 * self.wins_b / decided if decided else 0.0

    def pct_for(self, system: str) -> float:
        if system == self.system_a:
            return self.pct_a
        if system == self.system_b:
            return self.pct_b
        raise InvalidInput(f"system {system!r} not in this comparison")

    def to_payload(self) -> dict:
        return {
            "system_a": self.system_a, "system_b": self.system_b,
            "wins_a": self.wins_a, "wins_b": self.wins_b,
            "ties": self.ties, "failures": self.failures,
            "pct_a": self.pct_a, "pct_b": self.pct_b,
        }


# ---------------------------------------------------------------------------
# Prompts
# ---------------------------------------------------------------------------


def build_prompts(item: ABItem, template: str = DEFAULT_PROMPT_TEMPLATE) -> tuple[str, str]:
    """The judging prompt and its position-swapped twin."""
    prompt = template.format(
        transcription=item.transcription,
        summary_a=item.summary_a,
        summary_b=item.summary_b,
    )
    swapped_item = item.swapped()
    swapped = template.format(
        transcription=swapped_item.transcription,
        summary_a=swapped_item.summary_a,
        summary_b=swapped_item.summary_b,
    )
    return prompt, swapped


def parse_judge_prompt(prompt: str) -> dict[str, str]:
    """Recover the sections of a default-template prompt; used by the
    toy judge server to answer honestly."""
    match = _SECTION_RE.search(prompt)
    if not match:
        raise InvalidInput("prompt does not follow the judging template")
    return match.groupdict()


def parse_answer(reply: str) -> str | None:
    """First standalone A or B in the reply, or None."""
    match = _ANSWER_RE.search(reply)
    return match.group(1) if match else None


# ---------------------------------------------------------------------------
# Judges
# ---------------------------------------------------------------------------


def rouge_f_vs_transcription(summary: str, transcription: str) -> float:
    return rouge_l(
        TokenSeq.from_text(summary), TokenSeq.from_text(transcription)
    ).f


class MockRougeJudge:
    """Deterministic judge: higher ROUGE-L F against the transcription
    wins; an exact tie answers "A", which the swapped pass turns into a
    recorded tie."""

    def decide(self, transcription: str, first: str, second: str) -> str:
        f_first = rouge_f_vs_transcription(first, transcription)
        f_second = rouge_f_vs_transcription(second, transcription)
        return "B" if f_second > f_first else "A"


def judge_items(
    items: Sequence[ABItem],
    judge: "MockRougeJudge | Backend",
    template: str = DEFAULT_PROMPT_TEMPLATE,
) -> list[ItemJudgement]:
    """Judge every item twice and fold the passes into verdicts.

    A transport failure that survives the driver's retries marks the
    whole batch as failures rather than raising.
    """
    ids = [item.id for item in items]
    if len(set(ids)) != len(ids):
        raise InvalidInput("duplicate item ids")
    letters: dict[str, tuple[str | None, str | None]] = {}
    notes: dict[str, list[str]] = {item.id: [] for item in items}
    for item in items:
        if item.degenerate:
            notes[item.id].append("degenerate summary")
        if not item.transcription:
            notes[item.id].append("empty transcription")

    if isinstance(judge, MockRougeJudge):
        for item in items:
            first = judge.decide(item.transcription, item.summary_a, item.summary_b)
            second = judge.decide(item.transcription, item.summary_b, item.summary_a)
            letters[item.id] = (first, second)
    else:
        reqs = []
        for item in items:
            prompt, swapped = build_prompts(item, template)
            reqs.append(TransduceRequest(id=f"{item.id}#1", input=prompt))
            reqs.append(TransduceRequest(id=f"{item.id}#2", input=swapped))
        try:
            responses = {r.id: r for r in transduce_batch(judge, reqs)}
        except BackendError as exc:
            for item in items:
                notes[item.id].append(f"transport: {exc}")
                letters[item.id] = (None, None)
            responses = {}
        if responses:
            for item in items:
                pair = []
                for tag in ("#1", "#2"):
                    resp = responses.get(item.id + tag)
                    if resp is None or not resp.ok:
                        if resp is not None and resp.error:
                            notes[item.id].append(f"judge error: {resp.error}")
                        pair.append(None)
                    else:
                        letter = parse_answer(resp.output)
                        if letter is None:
                            notes[item.id].append("unparseable reply")
                        pair.append(letter)
                letters[item.id] = (pair[0], pair[1])

    out = []
    for item in items:
        first, second = letters[item.id]
        out.append(_fold(item, first, second, tuple(notes[item.id])))
    return out


def _fold(item: ABItem, first: str | None, second: str | None,
          notes: tuple[str, ...]) -> ItemJudgement:
    if first is None or second is None:
        return ItemJudgement(id=item.id, status="failure",
                             first_pass=first, second_pass=second, notes=notes)
    winner_first = item.system_a if first == "A" else item.system_b
    winner_second = item.system_b if second == "A" else item.system_a
    if winner_first == winner_second:
        return ItemJudgement(id=item.id, status="win", winner=winner_first,
                             first_pass=first, second_pass=second, notes=notes)
    return ItemJudgement(id=item.id, status="tie",
                         first_pass=first, second_pass=second, notes=notes)


def aggregate(items: Sequence[ABItem], judgements: Sequence[ItemJudgement]) -> PreferenceResult:
    if not items:
        raise InvalidInput("nothing to aggregate")
    system_a = items[0].system_a
    system_b = items[0].system_b
    for item in items:
        if (item.system_a, item.system_b) != (system_a, system_b):
            raise InvalidInput("mixed system pairs in one comparison")
    wins = {system_a: 0, system_b: 0}
    ties = failures = 0
    for j in judgements:
        if j.status == "win":
            wins[j.winner] += 1
        elif j.status == "tie":
            ties += 1
        else:
            failures += 1
    return PreferenceResult(
        system_a=system_a, system_b=system_b,
        wins_a=wins[system_a], wins_b=wins[system_b],
        ties=ties, failures=failures,
    )


def judge_batch(
    items: Sequence[ABItem],
    judge: "MockRougeJudge | Backend",
    template: str = DEFAULT_PROMPT_TEMPLATE,
) -> PreferenceResult:
    return aggregate(items, judge_items(items, judge, template))


def make_items(
    records: Sequence,
    outputs_a: Mapping[str, str],
    outputs_b: Mapping[str, str],
    system_a: str,
    system_b: str,
) -> list[ABItem]:
    """Pair two systems' outputs over manifest records into judge items.

    Records missing from either output map are skipped; empty outputs
    are kept but flagged degenerate.
    """
    items = []
    for rec in records:
        if rec.id not in outputs_a or rec.id not in outputs_b:
            continue
        sa = outputs_a[rec.id]
        sb = outputs_b[rec.id]
        items.append(ABItem(
            id=rec.id, transcription=rec.transcription or "",
            summary_a=sa, summary_b=sb,
            system_a=system_a, system_b=system_b,
            degenerate=(not sa or not sb),
        ))
    return items


# ---------------------------------------------------------------------------
# Curves and persistence
# ---------------------------------------------------------------------------


def preference_curve(
    results_by_size: Mapping[int, PreferenceResult],
    system: str,
) -> list[tuple[int, float]]:
    """Preference percentage for one system across mix sizes."""
    if len(results_by_size) < 2:
        raise InvalidInput("need results for at least two mix sizes")
    return [
        (size, results_by_size[size].pct_for(system))
        for size in sorted(results_by_size)
    ]


def save_results(path: str, judgements: Sequence[ItemJudgement],
                 result: PreferenceResult):
    payload = {
        "per_item": [
            {
                "id": j.id, "status": j.status, "winner": j.winner,
                "first_pass": j.first_pass, "second_pass": j.second_pass,
                "notes": list(j.notes),
            }
            for j in judgements
        ],
        "aggregate": result.to_payload(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, indent=2, sort_keys=True)
        fh.write("\n")

"""Result tables in the two-column style of summarization papers."""

from __future__ import annotations

from typing import Mapping, Sequence

from .errors import DataError
from .metrics import MetricSummary

# Canonical column order; anything else is appended alphabetically.
_KNOWN_COLUMNS = ("rouge_l", "bertscore", "cr")

_LABELS = {"rouge_l": "ROUGE-L", "bertscore": "BERTScore", "cr": "CR"}


def format_mean_halfwidth(mean: float, halfwidth: float) -> str:
    """One-decimal "mean±halfwidth" cell, e.g. 35.97/1.54 -> 36.0±1.5."""
    return f"{mean:.1f}±{halfwidth:.1f}"


def format_summary(summary: MetricSummary) -> str:
    return format_mean_halfwidth(summary.mean, summary.halfwidth)


def render_report(results: Mapping[str, Mapping[str, MetricSummary]]) -> str:
    """One row per system, sorted by ROUGE-L mean descending.

    Every system must report the same metric set; values are rendered
    as mean±halfwidth at one decimal, so callers should pass summaries
    already on their display scale (percent for ROUGE and CR).
    """
    if not results:
        raise DataError("no systems to report")
    metric_sets = {name: frozenset(metrics) for name, metrics in results.items()}
    reference = next(iter(metric_sets.values()))
    ragged = {name for name, keys in metric_sets.items() if keys != reference}
    if ragged:
        raise DataError(f"systems with differing metric sets: {', '.join(sorted(ragged))}")

    columns = [c for c in _KNOWN_COLUMNS if c in reference]
    columns += sorted(reference - set(_KNOWN_COLUMNS))
    if not columns:
        raise DataError("no metrics to report")

    names = list(results)
    if "rouge_l" in reference:
        names.sort(key=lambda n: results[n]["rouge_l"].mean, reverse=True)

    header = ["system"] + [_LABELS.get(c, c) for c in columns]
    rows = [header]
    for name in names:
        rows.append([name] + [format_summary(results[name][c]) for c in columns])

    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    lines = []
    for idx, row in enumerate(rows):
        cells = [row[0].ljust(widths[0])]
        cells += [cell.rjust(widths[i + 1]) for i, cell in enumerate(row[1:])]
        lines.append("  ".join(cells).rstrip())
        if idx == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"

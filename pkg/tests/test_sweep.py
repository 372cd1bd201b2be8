"""Small-scale checks of the distillation sweep driver.

The full-size run has its own acceptance checks; these use a corpus
small enough to run the sweep twice and still stay fast.
"""

import pytest

from senssum.errors import ConfigError
from senssum.sweep import SweepConfig, run_sweep

SMALL = SweepConfig(
    seed=3,
    n_core=120,
    n_pool=700,
    n_eval=60,
    pseudo_sizes=(100, 300, 700),
    bootstrap_b=200,
)


@pytest.fixture(scope="module")
def runs():
    return run_sweep(SMALL), run_sweep(SMALL)


def test_result_covers_every_system(runs):
    result = runs[0]
    expected = {"cascade", "e2e_base"}
    expected.update(f"e2e_kd_{origin}_{size}"
                    for origin in ("hyp", "ref") for size in SMALL.pseudo_sizes)
    assert set(result.summaries) == expected
    for name, metrics in result.summaries.items():
        assert set(metrics) == {"rouge_l", "cr"}
        assert metrics["rouge_l"].n == SMALL.n_eval
        assert metrics["cr"].b == SMALL.bootstrap_b


def test_every_system_answers_every_eval_record(runs):
    outputs = runs[0].outputs
    key_sets = {name: frozenset(outs) for name, outs in outputs.items()}
    assert len(set(key_sets.values())) == 1
    assert len(next(iter(key_sets.values()))) == SMALL.n_eval


def test_repeat_runs_are_identical(runs):
    first, second = runs
    assert first.summaries == second.summaries
    assert first.outputs == second.outputs
    assert {size: res.to_payload()
            for size, res in first.preference_by_size.items()} == \
           {size: res.to_payload()
            for size, res in second.preference_by_size.items()}
    assert first.extractiveness == second.extractiveness


def test_reference_teacher_never_trails_the_hypothesis_teacher(runs):
    # Reference-mode students train on a superset of the hypothesis
    # students' records, so their scores cannot fall behind.
    result = runs[0]
    for size in SMALL.pseudo_sizes:
        ref = result.summaries[f"e2e_kd_ref_{size}"]["rouge_l"].mean
        hyp = result.summaries[f"e2e_kd_hyp_{size}"]["rouge_l"].mean
        assert ref >= hyp


def test_preference_is_judged_at_every_pool_size(runs):
    result = runs[0]
    assert set(result.preference_by_size) == set(SMALL.pseudo_sizes)
    for res in result.preference_by_size.values():
        assert res.system_a == "cascade" and res.system_b == "e2e"
        assert res.n_items == SMALL.n_eval
        if res.wins_a + res.wins_b:
            assert res.pct_a + res.pct_b == pytest.approx(100.0)


def test_copy_prone_teacher_is_more_extractive(runs):
    ext = runs[0].extractiveness
    assert ext["rl_pseudo_vs_transcript"].mean > ext["rl_human_vs_transcript"].mean
    assert ext["skipped_pseudo"] == 0 and ext["skipped_human"] == 0


def test_pool_sizes_must_fit_the_pool():
    with pytest.raises(ConfigError):
        SweepConfig(n_pool=100, pseudo_sizes=(200,))
    with pytest.raises(ConfigError):
        SweepConfig(pseudo_sizes=(4000, 1000))

"""Selection strategies, the learned filter, and the threshold sweep."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clinconv import (
    ConfigError,
    FilterStrategy,
    apply_filter,
    bundled_task_map,
    fill_to_k,
    load_indices,
    noteworthy_targets,
    parse_strategy,
    save_indices,
    threshold_sweep,
    train_filter,
    umls_noteworthy,
    utterance_probabilities,
)
from clinconv.filtering import (
    DEFAULT_FILL_K,
    DEFAULT_THRESHOLDS,
    filter_from_record,
    filter_to_record,
    format_strategy,
)
from clinconv.metrics import rank_auc

CASES = [
    ("none", FilterStrategy(kind="none")),
    ("umls", FilterStrategy(kind="umls")),
    ("pred:all", FilterStrategy(kind="predicted", scope="all")),
    ("pred:diagnosis@0.25", FilterStrategy(kind="predicted", scope="diagnosis", threshold=0.25)),
    ("union:umls+pred:ros", FilterStrategy(kind="union", scope="ros")),
    (
        "union:umls+pred:all@0.4",
        FilterStrategy(kind="union", scope="all", threshold=0.4),
    ),
    ("f2k:umls+pred:ros@K=7", FilterStrategy(kind="fill_to_k", scope="ros", k=7)),
]


@pytest.mark.parametrize("text,expected", CASES)
def test_parse_strategy(text, expected):
    assert parse_strategy(text) == expected


@pytest.mark.parametrize("text,expected", CASES)
def test_format_round_trips(text, expected):
    assert parse_strategy(format_strategy(expected)) == expected


def test_fill_to_k_defaults_applied_per_scope():
    for scope, k in DEFAULT_FILL_K.items():
        assert parse_strategy(f"f2k:umls+pred:{scope}").k == k


@pytest.mark.parametrize("text", ["pred", "pred:everything", "f2k:pred:all", "umls+pred:all"])
def test_unparseable_strategies_rejected(text):
    with pytest.raises(ConfigError):
        parse_strategy(text)


def test_strategy_field_validation():
    with pytest.raises(ConfigError):
        FilterStrategy(kind="predicted")  # scope required
    with pytest.raises(ConfigError):
        FilterStrategy(kind="predicted", scope="all", threshold=1.5)
    with pytest.raises(ConfigError):
        FilterStrategy(kind="fill_to_k", scope="all", k=0)


def test_default_thresholds_by_scope():
    assert DEFAULT_THRESHOLDS == {"all": 0.4, "diagnosis": 0.1, "ros": 0.02}


# ---------------------------------------------------------------------------
# fill_to_k


def test_fill_to_k_keeps_all_concept_hits_past_k():
    probs = np.linspace(0, 1, 10)
    assert fill_to_k([1, 5, 8, 9], probs, k=2) == [1, 5, 8, 9]


def test_fill_to_k_tops_up_by_descending_probability():
    probs = np.array([0.1, 0.9, 0.2, 0.8, 0.3])
    assert fill_to_k([0], probs, k=3) == [0, 1, 3]


def test_fill_to_k_ties_break_toward_lower_index():
    probs = np.array([0.5, 0.5, 0.5, 0.5])
    assert fill_to_k([], probs, k=2) == [0, 1]


def test_fill_to_k_validates_inputs():
    with pytest.raises(ConfigError):
        fill_to_k([0], np.array([0.5]), k=0)
    with pytest.raises(ConfigError):
        fill_to_k([3], np.array([0.5, 0.5]), k=2)


@given(
    st.integers(min_value=0, max_value=2**32 - 1),
    st.integers(min_value=1, max_value=40),
    st.integers(min_value=1, max_value=50),
)
@settings(max_examples=200, deadline=None)
def test_fill_to_k_invariants(seed, n, k):
    rng = np.random.default_rng(seed)
    probs = rng.random(n)
    base = sorted(set(rng.integers(0, n, size=rng.integers(0, n + 1)).tolist()))
    selected = fill_to_k(base, probs, k)
    assert selected == sorted(set(selected))  # ascending, duplicate-free
    assert set(base) <= set(selected)  # concept hits never dropped
    assert len(selected) == max(len(base), min(k, n))
    if len(base) < k:
        chosen = set(selected) - set(base)
        left_out = set(range(n)) - set(selected)
        worst_kept = min((probs[i], -i) for i in chosen) if chosen else None
        best_dropped = max((probs[i], -i) for i in left_out) if left_out else None
        if worst_kept is not None and best_dropped is not None:
            assert worst_kept >= best_dropped  # greedy top-up order


# ---------------------------------------------------------------------------
# Learned filter and apply_filter


@pytest.fixture(scope="module")
def trained(small_corpus):
    return small_corpus, train_filter(small_corpus.pairs(), "all")


def test_train_filter_separates_noteworthy_utterances(trained):
    corpus, fm = trained
    scores: list[float] = []
    truth: list[int] = []
    for transcript, note in corpus.pairs():
        scores.extend(utterance_probabilities(fm, transcript).tolist())
        truth.extend(noteworthy_targets(transcript, note, "all").tolist())
    auc, valid = rank_auc(np.array(scores), np.array(truth))
    assert valid and auc > 0.8  # in-sample separation on planted signal


def test_filter_record_round_trip(trained):
    corpus, fm = trained
    clone = filter_from_record(filter_to_record(fm))
    transcript = corpus.transcripts[0]
    np.testing.assert_allclose(
        utterance_probabilities(clone, transcript),
        utterance_probabilities(fm, transcript),
        atol=0,
    )
    assert clone.scope == fm.scope and clone.threshold == fm.threshold


def test_train_filter_validates_scope_and_corpus(trained):
    corpus, _ = trained
    with pytest.raises(ConfigError):
        train_filter(corpus.pairs(), "sentences")
    from clinconv import TrainingError

    with pytest.raises(TrainingError):
        train_filter([], "all")


def test_apply_filter_none_selects_everything(trained):
    corpus, fm = trained
    transcript = corpus.transcripts[0]
    assert apply_filter(FilterStrategy(kind="none"), transcript) == list(
        range(len(transcript))
    )


def test_apply_filter_union_is_exact_set_union(trained, lexicon):
    corpus, fm = trained
    strategy = parse_strategy("union:umls+pred:all@0.4")
    for transcript in corpus.transcripts[:10]:
        union = apply_filter(strategy, transcript, filter_model=fm, lexicon=lexicon)
        predicted = apply_filter(
            parse_strategy("pred:all@0.4"), transcript, filter_model=fm
        )
        hits = umls_noteworthy(lexicon, transcript)
        assert union == sorted(set(predicted) | set(hits))


def test_apply_filter_f2k_matches_direct_call(trained, lexicon):
    corpus, fm = trained
    strategy = parse_strategy("f2k:umls+pred:all@K=9")
    transcript = corpus.transcripts[1]
    expected = fill_to_k(
        umls_noteworthy(lexicon, transcript),
        utterance_probabilities(fm, transcript),
        9,
    )
    assert (
        apply_filter(strategy, transcript, filter_model=fm, lexicon=lexicon) == expected
    )


def test_apply_filter_umls_respects_task_map(trained, lexicon):
    corpus, _ = trained
    task_map = bundled_task_map("ros")
    strategy = FilterStrategy(kind="umls")
    for transcript in corpus.transcripts[:10]:
        routed = apply_filter(strategy, transcript, lexicon=lexicon, task_map=task_map)
        assert routed == umls_noteworthy(lexicon, transcript, task_map)
        assert set(routed) <= set(apply_filter(strategy, transcript, lexicon=lexicon))


def test_apply_filter_missing_dependencies_rejected(trained, lexicon):
    corpus, fm = trained
    transcript = corpus.transcripts[0]
    with pytest.raises(ConfigError):
        apply_filter(parse_strategy("pred:all"), transcript)
    with pytest.raises(ConfigError):
        apply_filter(parse_strategy("umls"), transcript)
    with pytest.raises(ConfigError):
        apply_filter(
            parse_strategy("pred:diagnosis"), transcript, filter_model=fm
        )  # scope mismatch with the trained filter


def test_indices_file_round_trip(tmp_path):
    rows = [("a", [0, 2, 5]), ("b", []), ("c", [1])]
    path = tmp_path / "indices.jsonl"
    save_indices(path, rows)
    assert load_indices(path) == {"a": [0, 2, 5], "b": [], "c": [1]}


def test_indices_file_rejects_duplicates(tmp_path):
    from clinconv import ParseError

    path = tmp_path / "dup.jsonl"
    save_indices(path, [("a", [0]), ("a", [1])])
    with pytest.raises(ParseError):
        load_indices(path)


def test_threshold_sweep_reports_monotone_selection(trained):
    corpus, fm = trained
    transcripts = corpus.transcripts[:20]
    calls: list[list[list[int]]] = []

    def evaluate(selected):
        calls.append(selected)
        return {"mean_kept": float(np.mean([len(s) for s in selected]))}

    grid = [0.9, 0.1, 0.5]
    points = threshold_sweep(fm, transcripts, evaluate, grid)
    assert [p.threshold for p in points] == sorted(grid)
    kept = [p.mean_selected for p in points]
    assert kept == sorted(kept, reverse=True)  # higher threshold keeps fewer
    for point, selected in zip(points, calls):
        assert point.metrics["mean_kept"] == point.mean_selected
        assert len(selected) == len(transcripts)


def test_threshold_sweep_validates_grid(trained):
    corpus, fm = trained
    with pytest.raises(ConfigError):
        threshold_sweep(fm, corpus.transcripts[:2], lambda s: {}, [])
    with pytest.raises(ConfigError):
        threshold_sweep(fm, corpus.transcripts[:2], lambda s: {}, [1.5])

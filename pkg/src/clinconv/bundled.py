"""Bundled reference data: concept lexicon, task maps, and label statistics.

The package ships a small curated concept dictionary plus, for each task, a
map from concept ids to labels and a table of reference label statistics
(training-set mention counts and test-set prevalence). The statistics table
backs the input-agnostic baselines; the lexicon and task maps back the
entity baseline and the concept-hit noteworthy filter.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .annotations import LabelSpace
from .concepts import ConceptLexicon, TaskMap, build_lexicon, parse_concepts, parse_task_map
from .errors import ConfigError

TASKS = ("diagnosis", "ros")


def _read_data(filename: str) -> dict:
    text = resources.files("clinconv.data").joinpath(filename).read_text("utf-8")
    return json.loads(text)


def bundled_concepts() -> dict:
    """Raw lexicon record, as loaded from the packaged JSON."""
    return _read_data("concept_lexicon.json")


def bundled_lexicon() -> ConceptLexicon:
    return build_lexicon(parse_concepts(bundled_concepts()))


def bundled_task_map(task: str) -> TaskMap:
    if task not in TASKS:
        raise ConfigError(f"unknown task {task!r}; expected one of {TASKS}")
    return parse_task_map(_read_data(f"{task}_task_map.json"))


@dataclass
class ReferenceLabels:
    """Reference per-label statistics for one task.

    Labels are ordered by descending training-set count. ``train_counts``
    are raw mention counts over the training split; ``prevalence`` is the
    per-label positive rate on the test split of ``test_size`` examples.
    """

    task: str
    labels: tuple[str, ...]
    train_counts: np.ndarray
    prevalence: np.ndarray
    test_size: int

    def space(self) -> LabelSpace:
        return LabelSpace(
            task=self.task,
            labels=self.labels,
            train_prevalence=self.prevalence.copy(),
        )

    def rank_scores(self) -> np.ndarray:
        """Training-count scores used by frequency-ranked constant predictors."""
        return self.train_counts.astype(float)


def reference_labels(task: str) -> ReferenceLabels:
    if task not in TASKS:
        raise ConfigError(f"unknown task {task!r}; expected one of {TASKS}")
    record = _read_data("reference_labels.json")[task]
    rows = record["labels"]
    counts = np.array([row["train_count"] for row in rows], dtype=np.int64)
    if np.any(np.diff(counts) > 0):
        raise ConfigError(f"{task} reference labels not sorted by train_count")
    return ReferenceLabels(
        task=task,
        labels=tuple(row["label"] for row in rows),
        train_counts=counts,
        prevalence=np.array([row["prevalence"] for row in rows], dtype=float),
        test_size=int(record["test_size"]),
    )

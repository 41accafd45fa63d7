"""Shared fixtures and the acceptance-criteria terminal summary."""

from __future__ import annotations

import numpy as np
import pytest

from clinconv import (
    GenConfig,
    bundled_lexicon,
    bundled_task_map,
    derive_diagnosis_labels,
    derive_ros_labels,
    generate,
)

ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, ok: bool, detail: str) -> None:
    """Log one pass/fail line; shown in the terminal summary after the run."""
    ACCEPTANCE_LINES.append(
        f"criterion {number:02d} {'PASS' if ok else 'FAIL'}  {detail}"
    )


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def lexicon():
    return bundled_lexicon()


@pytest.fixture(scope="session")
def diagnosis_map():
    return bundled_task_map("diagnosis")


@pytest.fixture(scope="session")
def ros_map():
    return bundled_task_map("ros")


@pytest.fixture(scope="session")
def small_corpus():
    """Sixty short examples; enough signal for round-trip and shape tests."""
    return generate(GenConfig.desk(n_examples=60), seed=3)


@pytest.fixture(scope="session")
def medium_corpus():
    """Four hundred short examples; enough mass for stable label derivation."""
    return generate(GenConfig.desk(n_examples=400), seed=11)


@pytest.fixture(scope="session")
def medium_derivations(medium_corpus):
    pairs = medium_corpus.pairs()
    return derive_diagnosis_labels(pairs), derive_ros_labels(pairs)


@pytest.fixture
def rng():
    return np.random.default_rng(0)

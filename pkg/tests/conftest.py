from __future__ import annotations

import numpy as np
import pytest

from vdparse import corpus

# Criterion results recorded by tests/test_acceptance.py, printed at exit.
ACCEPTANCE_RESULTS: dict[int, tuple[str, str]] = {}


@pytest.fixture(scope="session")
def tiny_corpus(tmp_path_factory):
    """12-video sigma=0 planted-code corpus (6/3/3) shared across tests."""
    out = tmp_path_factory.mktemp("tiny_corpus")
    spec = corpus.SynthSpec(
        n_videos=12, relation_subset=("Cause", "Elaboration", "Contrast"),
        frames_per_segment=(2, 4), noise_sigma=0.0, feature_dim=12,
        seed=101, train_count=6, val_count=3)
    manifest = corpus.generate_synthetic(spec, out)
    return spec, manifest


@pytest.fixture(scope="session")
def tiny_splits(tiny_corpus):
    _, manifest = tiny_corpus
    return corpus.load_corpus(manifest)


@pytest.fixture()
def rng():
    return np.random.default_rng(0)


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    test_name = report.nodeid.rsplit("::", 1)[-1]
    if not test_name.startswith("test_c"):
        return
    head = test_name[6:]  # "<number>_<name>"
    number_str, _, label = head.partition("_")
    try:
        number = int(number_str)
    except ValueError:
        return
    ACCEPTANCE_RESULTS[number] = (label, "PASS" if report.passed else "FAIL")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        name, status = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"criterion {number} ({name}): {status}")

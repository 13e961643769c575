"""Shared fixtures: synthetic corpora at two scales.

The full-size default corpus is expensive (40 users x 50 signatures), so
it is generated once per session and shared by the end-to-end tests; the
small corpus keeps unit tests fast.
"""

import numpy as np
import pytest

from sigvq import (
    SyntheticSpec,
    generate_synthetic_corpus,
    load_corpus_features,
    preprocess,
    synthesize_signature,
)


@pytest.fixture(scope="session")
def default_spec():
    return SyntheticSpec()


@pytest.fixture(scope="session")
def default_corpus(tmp_path_factory, default_spec):
    directory = tmp_path_factory.mktemp("corpus_default")
    return generate_synthetic_corpus(default_spec, str(directory))


@pytest.fixture(scope="session")
def fs6_features(default_corpus):
    return load_corpus_features(default_corpus, "FS6")


@pytest.fixture(scope="session")
def fs1_features(default_corpus):
    return load_corpus_features(default_corpus, "FS1")


@pytest.fixture(scope="session")
def small_spec():
    return SyntheticSpec(
        n_users=4,
        genuine_per_user=8,
        skilled_per_user=4,
        min_len=80,
        max_len=140,
    )


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory, small_spec):
    directory = tmp_path_factory.mktemp("corpus_small")
    return generate_synthetic_corpus(small_spec, str(directory))


@pytest.fixture(scope="session")
def small_features(small_spec):
    """In-memory FS6 feature table for the small synthetic population."""
    table = {}
    for u in range(small_spec.n_users):
        uid = f"u{u:02d}"
        table[uid] = {
            "genuine": [
                preprocess(synthesize_signature(small_spec, u, "genuine", j), "FS6")
                for j in range(small_spec.genuine_per_user)
            ],
            "skilled": [
                preprocess(
                    synthesize_signature(small_spec, u, "skilled_forgery", j), "FS6"
                )
                for j in range(small_spec.skilled_per_user)
            ],
        }
    return table


ACCEPTANCE_LINES = []


def record_acceptance(line):
    """Collect one pass/fail line per acceptance check for the run summary."""
    ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_signature(rng, n=None):
    """A structureless but valid raw signature for property tests."""
    from sigvq import RawSignature, Sample

    if n is None:
        n = int(rng.integers(3, 40))
    t = np.cumsum(rng.uniform(0.5, 2.0, n))
    cols = rng.normal(0.0, 100.0, (n, 5))
    samples = [
        Sample(float(t[i]), *(float(v) for v in cols[i]))
        for i in range(n)
    ]
    return RawSignature(samples)

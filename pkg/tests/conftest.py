import sys

import numpy as np
import pytest
from hypothesis import settings

from fraudrla.detectors.engine import FraudEngine
from fraudrla.detectors.rules import ExtremeValueRule

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")


class ConstModel:
    """Stub classifier returning a fixed fraud probability."""

    def __init__(self, n_features, proba):
        self.n_features = n_features
        self.proba = float(proba)

    def predict_proba(self, rows):
        rows = np.asarray(rows, dtype=float)
        if rows.ndim == 1:
            return self.proba
        return np.full(len(rows), self.proba)


class LinearModel:
    """Probability 1 when the first feature is positive, else 0."""

    def __init__(self, n_features):
        self.n_features = n_features

    def predict_proba(self, rows):
        rows = np.asarray(rows, dtype=float)
        return (rows[..., 0] > 0).astype(float)


def wide_rule(n, width=1e9):
    return ExtremeValueRule(np.full(n, -width), np.full(n, width))


def stub_engine(n, proba=0.0, rule=None):
    return FraudEngine(rule if rule is not None else wide_rule(n), ConstModel(n, proba))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is not None and acceptance.LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(acceptance.LINES):
            terminalreporter.write_line(acceptance.LINES[n])

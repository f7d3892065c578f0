import warnings

import numpy as np
import pytest

from robustmdp.mdp import MdpInstance, random_instance

# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES = {}


def mixed_instance(S, A, seed=0, gamma=0.9, floor=0.5):
    """Random instance whose kernel entries are all at least floor / S.

    Kernel radii up to floor / S then keep every perturbed kernel nonnegative,
    which is what the contraction and monotonicity arguments need.
    """
    base = random_instance(S, A, seed=seed, gamma=gamma)
    P0 = floor / S + (1.0 - floor) * base.P0
    P0 /= P0.sum(axis=2, keepdims=True)
    return MdpInstance(P0, base.R0, gamma)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_inst():
    return random_instance(3, 2, seed=7)


@pytest.fixture(autouse=True)
def _quiet_radius_warning():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="kernel radius exceeds")
        yield


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])

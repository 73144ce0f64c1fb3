import warnings

import numpy as np
import pytest


def central_diff(f, x, h=1e-5):
    """Central finite-difference gradient (or Jacobian, stacked on the last axis) of ``f`` at ``x``."""
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e.flat[i] = h
        cols.append((np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2 * h))
    return np.stack(cols, axis=-1)


def rel_err(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(b))))


def random_task(rng, k=None, d=None, scale=1.0):
    k = k or int(rng.integers(1, 5))
    d = d or int(rng.integers(1, 5))
    return rng.normal(size=(k, d)), rng.normal(scale=scale, size=d)


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)


@pytest.fixture
def quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        yield


ACCEPTANCE_RESULTS = []


def record_acceptance(number, title, passed, detail=""):
    """Log one acceptance line (shown inline and in the terminal summary), then return ``passed``."""
    line = f"ACCEPTANCE {number} {'PASS' if passed else 'FAIL'} {title}: {detail}"
    ACCEPTANCE_RESULTS.append((number, line))
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_RESULTS):
            terminalreporter.write_line(line)

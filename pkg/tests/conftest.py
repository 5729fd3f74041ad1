from __future__ import annotations

import contextlib
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from spillover import gfevd  # noqa: E402

# every SpilloverMatrix built by computation (theta_raw present) during the run
COMPUTED_MATRICES: list = []
ACCEPTANCE: dict[int, tuple[str, str, str]] = {}

_original_post_init = gfevd.SpilloverMatrix.__post_init__


def _recording_post_init(self):
    _original_post_init(self)
    if self.theta_raw is not None:
        COMPUTED_MATRICES.append(self)


gfevd.SpilloverMatrix.__post_init__ = _recording_post_init


def conservation_violations(matrices, tol=1e-9):
    bad = []
    for m in matrices:
        rows = np.max(np.abs(m.theta_norm.sum(axis=1) - 100.0))
        net = abs(float(gfevd.summarize(m).net.sum()))
        if rows > tol or net > tol:
            bad.append((m.labels, rows, net))
    return bad


@contextlib.contextmanager
def _criterion(number: int, title: str):
    start = time.perf_counter()
    try:
        yield
    except BaseException as exc:
        ACCEPTANCE[number] = ("FAIL", title, f"{type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}")
        raise
    ACCEPTANCE[number] = ("PASS", title, f"{time.perf_counter() - start:.1f}s")


@pytest.fixture
def criterion():
    return _criterion


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    tr = terminalreporter
    bad = conservation_violations(COMPUTED_MATRICES)
    tr.section("conservation over all computed spillover matrices")
    tr.write_line(
        f"{'PASS' if not bad else 'FAIL'}: {len(COMPUTED_MATRICES)} matrices, "
        f"{len(bad)} with row-sum or net-sum error above 1e-9"
    )
    if ACCEPTANCE:
        tr.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            status, title, detail = ACCEPTANCE[k]
            tr.write_line(f"[{status}] criterion {k:2d}: {title} ({detail})")


def pytest_sessionfinish(session, exitstatus):
    if conservation_violations(COMPUTED_MATRICES) and session.exitstatus == 0:
        session.exitstatus = 1


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

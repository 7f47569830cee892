"""Shared fixtures and the acceptance summary hook."""

import numpy as np
import pytest

from teleopsim.geometry import Pose


def random_pose(rng: np.random.Generator, pos_scale: float = 2.0) -> Pose:
    q = rng.standard_normal(4)
    while np.linalg.norm(q) < 1e-3:
        q = rng.standard_normal(4)
    return Pose(rng.uniform(-pos_scale, pos_scale, 3), q / np.linalg.norm(q))


@pytest.fixture
def rng():
    return np.random.default_rng(2026)


# Acceptance tests report one PASS/FAIL line each in the terminal summary so
# the criteria are auditable at a glance in CI logs.
_acceptance: dict[str, str] = {}


def record_acceptance(name: str, ok: bool, detail: str = ""):
    _acceptance[name] = ("PASS" if ok else "FAIL") + (f"  ({detail})" if detail else "")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, verdict in _acceptance.items():
        terminalreporter.write_line(f"[{verdict.split()[0]}] {name}"
                                    + (" " + verdict.split(" ", 1)[1] if " " in verdict else ""))

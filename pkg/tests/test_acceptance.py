"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

The lines bypass output capture, so they show in a plain ``pytest -v`` run.
"""

import time

import pytest

from reddiff import checks
from reddiff.cli import main

CRITERIA = [
    (1, "schedule exactness", checks.check_schedule),
    (2, "gmm score vs finite differences", checks.check_gmm_score),
    (3, "signal/noise residual identity", checks.check_residual_identity),
    (4, "expected regularizer gradient", checks.check_expected_gradient),
    (5, "MAP recovery with calibrated lambda", checks.check_map_recovery),
    (6, "stopped-gradient contract", checks.check_stopped_gradient),
    (7, "descending vs random timestep plan", checks.check_plan_ordering),
    (8, "dispersion gradient", checks.check_dispersion),
    (9, "operator contracts", checks.check_operators),
    (10, "run determinism", checks.check_determinism),
]


def test_registry_covers_all_criteria():
    assert [name for _, name, _ in CRITERIA] == [name for name, _ in checks.CHECKS]


@pytest.mark.parametrize("number, name, fn", CRITERIA, ids=[f"criterion_{n:02d}" for n, _, _ in CRITERIA])
def test_criterion(number, name, fn, capsys):
    r = checks.run_one(name, fn)
    with capsys.disabled():
        print(f"\ncriterion {number:2d} [{'PASS' if r.passed else 'FAIL'}] {name} ({r.seconds:.2f}s): {r.detail}")
    assert r.passed, r.detail


def test_criterion_10_check_command_runtime(capsys):
    start = time.perf_counter()
    code = main(["check"])
    elapsed = time.perf_counter() - start
    out = capsys.readouterr().out
    lines = [line for line in out.splitlines() if line.startswith("[")]
    with capsys.disabled():
        print(f"\ncriterion 10 [{'PASS' if elapsed < 300 else 'FAIL'}] check runtime: {elapsed:.1f}s (< 300s), exit code {code}")
    assert len(lines) == len(checks.CHECKS)
    assert elapsed < 300

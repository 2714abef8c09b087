"""All sixteen acceptance criteria at their stated tolerances.

Each test prints one PASS/FAIL line; run with ``-s`` to see them inline.
"""
import json

import pytest

from quenched.acceptance import CRITERIA, FAST, run_criterion, run_suite

SLOW = {9, 10, 11}


def _param(n):
    marks = [pytest.mark.slow] if n in SLOW else []
    return pytest.param(n, marks=marks, id=f"{n:02d}-{CRITERIA[n][0].replace(' ', '-')}")


@pytest.mark.parametrize("number", [_param(n) for n in CRITERIA])
def test_criterion(number):
    result = run_criterion(number)
    print(result.line())
    assert result.passed, json.dumps(result.details, default=str, indent=1)[:4000]


def test_fast_suite_budget():
    import time

    t0 = time.perf_counter()
    results = run_suite("fast")
    elapsed = time.perf_counter() - t0
    print(f"[{'PASS' if elapsed < 60 else 'FAIL'}] fast suite wall clock {elapsed:.1f} s")
    assert [r.number for r in results[:-1]] == list(FAST)
    assert all(r.passed for r in results)
    assert elapsed < 60

"""The fourteen acceptance criteria at their stated tolerances.

Each test prints one PASS/FAIL line (visible in ``pytest -v`` output) and
then asserts the verdict, so a failing criterion shows its measurements.
"""

import warnings

import pytest

from nlkg.acceptance import CHECKS, run_check


@pytest.mark.parametrize("name", list(CHECKS))
def test_criterion(name, lab, capsys):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = run_check(name, lab)
    with capsys.disabled():
        print(f"\n{res.line()} ({res.seconds:.1f}s)")
    bad = {k: v for k, v in res.metrics["checks"].items() if not v}
    assert res.passed, f"{name}: failed sub-checks {sorted(bad)}; metrics {res.metrics}"

"""Acceptance criteria A1-A12 at their stated tolerances.

Each criterion prints one ``Ak PASS|FAIL`` line (collected into the pytest
terminal summary as well). Run standalone with ``python tests/test_acceptance.py``.
"""
from __future__ import annotations

import pytest

from bihermitian import acceptance

RESULTS = {}


def _run(name):
    if name not in RESULTS:
        RESULTS[name] = acceptance.run(name)
        print(RESULTS[name].line())
    return RESULTS[name]


@pytest.mark.parametrize("name", [f"A{i}" for i in range(1, 13) if i != 5])
def test_criterion(name):
    res = _run(name)
    assert res.passed, res.line()


def test_A5_bracket_with_omega():
    m = _run("A5").metrics
    assert m["rel_err_omega"] < 1e-3
    assert m["runtime_s"] < 30


@pytest.mark.xfail(strict=True, reason="{w_t, w'} is -c: antisymmetry with {w', w} = +c "
                                       "forces the opposite sign of the stated value")
def test_A5_bracket_with_prime_literal_sign():
    assert _run("A5").metrics["rel_err_prime"] < 1e-3


def test_A5_bracket_with_prime_magnitude():
    assert _run("A5").metrics["rel_err_prime_negated"] < 1e-3


def test_A5_overall_verdict_is_reported_as_fail():
    # the combined criterion includes the literal sign and cannot pass
    assert not _run("A5").passed


if __name__ == "__main__":
    for key in acceptance.RUNNERS:
        print(acceptance.run(key).line())

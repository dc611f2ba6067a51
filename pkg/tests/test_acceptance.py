"""Acceptance gate: every registered criterion must pass.

Runs each criterion once per session (shared cache) and prints its verdict
line, so `pytest tests/test_acceptance.py -v -s` reads as a checklist.
The same checks back `cpfsim selftest`.
"""

import pytest

from cpfsim import acceptance

_CACHE: dict[int, acceptance.CriterionResult] = {}


def _result(number: int) -> acceptance.CriterionResult:
    if number not in _CACHE:
        _CACHE[number] = acceptance.run_criterion(number, workers=4)
    return _CACHE[number]


@pytest.mark.parametrize(
    "number, name", [(num, name) for num, name, _ in acceptance.CRITERIA]
)
def test_criterion(number, name):
    result = _result(number)
    print(result.line())
    assert result.passed, "\n".join([result.line(), *result.details])


def test_registry_is_complete():
    assert [num for num, _, _ in acceptance.CRITERIA] == list(range(1, 11))


@pytest.mark.parametrize("number, limit_s", [(1, 60.0), (4, 30.0), (9, 600.0)])
def test_criterion_runtime_budget(number, limit_s):
    assert _result(number).elapsed_s < limit_s


def test_unknown_criterion_rejected():
    with pytest.raises(ValueError):
        acceptance.run_criterion(11)

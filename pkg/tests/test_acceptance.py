import pytest

from conftest import CRITERION_LINES
from opqlog.acceptance import CHECKS


@pytest.mark.parametrize("number", sorted(CHECKS))
def test_criterion(number):
    result = CHECKS[number]()
    print(result.line())
    CRITERION_LINES.append(result.line())
    assert result.passed, result.line()

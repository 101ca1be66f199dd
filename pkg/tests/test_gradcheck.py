import pytest

from nomachest.cnn.gradcheck import CHECKS, TOLERANCES, run_suite


@pytest.mark.parametrize("name", list(CHECKS))
def test_check_passes_on_a_few_configs(name):
    (result,) = run_suite(configs=5, seed=3, names=[name])
    assert result.passed, result.line()


def test_tolerances():
    assert TOLERANCES["bn"] == 1e-3
    assert all(TOLERANCES[k] == 1e-4 for k in ("conv", "relu", "loss"))


def test_result_line_format():
    (result,) = run_suite(configs=2, names=["loss"])
    assert result.line().startswith("PASS loss")

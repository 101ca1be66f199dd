import numpy as np
import pytest
from hypothesis import settings

from nomachest.numerics import make_rng

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@pytest.fixture
def rng():
    return make_rng(1234)


def random_complex(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


TINY_CFG = """
[scenario]
n_t = 8
n_r = 4
num_clusters = 2

[pilot]
m_t = 8

[evaluation]
snr_grid = 0, 20

[dataset]
train = 24
validation = 8
test = 8

[training]
epochs = 2
batch_size = 8
layer_count = 3
filters = 2

[sweep]
epochs = 2
learning_rates = 3e-3, 3e-4
layer_counts = 3, 4
"""


@pytest.fixture
def tiny_cfg_text():
    return TINY_CFG


@pytest.fixture
def tiny_cfg():
    from nomachest.harness.config import parse_config

    return parse_config(TINY_CFG)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


def record_acceptance(number, title, passed, detail):
    line = f"{'PASS' if passed else 'FAIL'} criterion {number:2d} {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)

import struct

import numpy as np
import pytest

from nomachest.cnn.checkpoint import load_checkpoint, save_checkpoint
from nomachest.cnn.model import build_model, predict
from nomachest.errors import FormatError
from nomachest.numerics import make_rng


@pytest.fixture
def model():
    m = build_model(4, 3, rng=make_rng(0))
    m.input_scale, m.target_scale = 2.5, 0.125
    for bn in m.bn_layers():
        bn.running_mean[...] = make_rng(1).standard_normal(3)
        bn.running_var[...] = 1.5
    return m


def test_round_trip_is_exact(tmp_path, model):
    path = tmp_path / "m.nchk"
    save_checkpoint(path, model)
    back = load_checkpoint(path)
    assert (back.layer_count, back.filters) == (4, 3)
    assert (back.input_scale, back.target_scale) == (2.5, 0.125)
    for a, b in zip(model.params(), back.params()):
        np.testing.assert_array_equal(a, b)
    for a, b in zip(model.bn_layers(), back.bn_layers()):
        np.testing.assert_array_equal(a.running_mean, b.running_mean)
        np.testing.assert_array_equal(a.running_var, b.running_var)
    y = make_rng(2).standard_normal((2, 4, 5)) + 0j
    np.testing.assert_array_equal(predict(model, y), predict(back, y))


def test_header_layout(tmp_path, model):
    path = tmp_path / "m.nchk"
    save_checkpoint(path, model)
    data = path.read_bytes()
    assert data[:4] == b"NCHK"
    assert struct.unpack_from("<HII", data, 4) == (1, 4, 3)


@pytest.mark.parametrize(
    "mutate,msg",
    [
        (lambda d: b"XXXX" + d[4:], "magic"),
        (lambda d: d[:4] + struct.pack("<H", 9) + d[6:], "version"),
        (lambda d: d[:-4], "truncated"),
        (lambda d: d + b"\0", "trailing"),
        (lambda d: d[:8], "truncated header"),
    ],
)
def test_corrupt_files(tmp_path, model, mutate, msg):
    path = tmp_path / "m.nchk"
    save_checkpoint(path, model)
    path.write_bytes(mutate(path.read_bytes()))
    with pytest.raises(FormatError, match=msg):
        load_checkpoint(path)

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nomachest.channel import (
    ArrayGeometry,
    ChannelConfig,
    PathParams,
    multi_user_channel,
    sample_paths,
    steering_vector,
    user_channel,
)
from nomachest.errors import InvalidParameterError, InvalidScenarioError
from nomachest.numerics import make_rng


def config(n_t=32, L=3, power=None):
    return ChannelConfig(ArrayGeometry(n_t), ArrayGeometry(16), num_paths=L, avg_path_power=power)


def test_steering_broadside():
    np.testing.assert_allclose(steering_vector(ArrayGeometry(4, 0.37), 0.0), np.full(4, 0.5))


def test_steering_endfire_half_wavelength():
    np.testing.assert_allclose(steering_vector(ArrayGeometry(2), np.pi / 2), np.array([1, -1]) / np.sqrt(2), atol=1e-15)


@given(st.integers(1, 64), st.floats(0.05, 2.0), st.floats(0, 2 * np.pi))
def test_steering_unit_norm(n, spacing, angle):
    v = steering_vector(ArrayGeometry(n, spacing), angle)
    assert abs(np.linalg.norm(v) - 1) < 1e-12


def test_geometry_validation():
    with pytest.raises(InvalidParameterError):
        ArrayGeometry(0)
    with pytest.raises(InvalidParameterError):
        ArrayGeometry(4, 0.0)


def test_sample_paths_counts_and_ranges(rng):
    paths = sample_paths(rng, config())
    assert len(paths) == 3
    for p in paths:
        assert 0 <= p.aoa < 2 * np.pi and 0 <= p.aod < 2 * np.pi
        assert 0 <= p.delay < 100e-9


def test_sample_paths_zero_power(rng):
    (p,) = sample_paths(rng, config(L=1, power=0.0))
    assert p.gain == 0


def test_path_gain_power():
    rng = make_rng(3)
    cfg = config(L=1, power=0.7)
    g = np.array([sample_paths(rng, cfg)[0].gain for _ in range(100_000)])
    assert abs(np.mean(np.abs(g) ** 2) / 0.7 - 1) < 0.02


def test_single_path_channel():
    h = user_channel([PathParams(1.0, 0.0, 0.0, 0.0)], ArrayGeometry(4))
    np.testing.assert_allclose(h, np.full(4, 0.5))


def test_cancelling_paths():
    geo = ArrayGeometry(8)
    h = user_channel([PathParams(0.3 - 1j, 0, 0, 1.1), PathParams(-0.3 + 1j, 0, 0, 1.1)], geo)
    np.testing.assert_allclose(h, 0, atol=1e-15)


def test_channel_is_sum_of_rank_one_terms(rng):
    geo = ArrayGeometry(32)
    paths = sample_paths(rng, config())
    expected = sum(p.gain * np.conj(np.exp(-1j * np.pi * np.arange(32) * np.sin(p.aod)) / np.sqrt(32)) for p in paths)
    np.testing.assert_allclose(user_channel(paths, geo), expected, atol=1e-14)


@given(st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False), st.integers(0, 2**32 - 1))
def test_channel_linear_in_gains(c, seed):
    geo = ArrayGeometry(16)
    paths = sample_paths(make_rng(seed), config(16))
    scaled = [PathParams(c * p.gain, p.delay, p.aoa, p.aod) for p in paths]
    np.testing.assert_allclose(user_channel(scaled, geo), c * user_channel(paths, geo), rtol=1e-12, atol=1e-12)


def test_delays_do_not_change_channel(rng):
    geo = ArrayGeometry(8)
    paths = sample_paths(rng, config(8))
    moved = [PathParams(p.gain, p.delay + 5e-8, p.aoa, p.aod) for p in paths]
    np.testing.assert_array_equal(user_channel(paths, geo), user_channel(moved, geo))


def test_expected_channel_energy():
    rng = make_rng(11)
    cfg = config(L=3)
    h = multi_user_channel(rng, cfg, 100_000)
    energy = np.mean(np.sum(np.abs(h) ** 2, axis=1))
    assert abs(energy - 3 * cfg.path_power) < 0.03


def test_multi_user_shapes_and_determinism():
    cfg = config()
    h = multi_user_channel(make_rng(4), cfg, 16)
    assert h.shape == (16, 32)
    assert multi_user_channel(make_rng(4), cfg, 2).shape == (2, 32)
    np.testing.assert_array_equal(h, multi_user_channel(make_rng(4), cfg, 16))


@pytest.mark.parametrize("users", [0, 1, 3, 15])
def test_multi_user_rejects_unpaired(users, rng):
    with pytest.raises(InvalidScenarioError):
        multi_user_channel(rng, config(), users)

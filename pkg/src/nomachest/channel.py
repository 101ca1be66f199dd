"""Narrowband geometric mmWave channel for single-antenna users.

Each user sees ``L`` propagation paths from the BS uniform linear array. The
delay of every path is drawn and kept on :class:`PathParams`, but the channel
is evaluated as one flat tap, so delays do not change the matrix.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, InvalidScenarioError

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class ArrayGeometry:
    num_elements: int
    spacing_over_wavelength: float = 0.5

    def __post_init__(self):
        if self.num_elements < 1:
            raise InvalidParameterError("array needs at least one element")
        if self.spacing_over_wavelength <= 0:
            raise InvalidParameterError("element spacing must be positive")


@dataclass(frozen=True)
class PathParams:
    gain: complex
    delay: float
    aoa: float
    aod: float


@dataclass(frozen=True)
class ChannelConfig:
    geometry_tx: ArrayGeometry
    geometry_rx: ArrayGeometry
    num_paths: int = 3
    avg_path_power: float | None = None  # None -> 1/num_paths, so E||h||^2 = 1
    carrier_frequency: float = 28e9  # metadata only
    max_delay: float = 100e-9

    def __post_init__(self):
        if self.num_paths < 1:
            raise InvalidParameterError("need at least one path")
        if self.avg_path_power is not None and self.avg_path_power < 0:
            raise InvalidParameterError("average path power must be non-negative")

    @property
    def path_power(self):
        if self.avg_path_power is None:
            return 1.0 / self.num_paths
        return self.avg_path_power


def steering_vector(geometry, angle):
    """ULA response ``exp(-j 2 pi (d/lambda) m sin(angle)) / sqrt(N)``."""
    m = np.arange(geometry.num_elements)
    phase = TWO_PI * geometry.spacing_over_wavelength * m * np.sin(angle)
    return np.exp(-1j * phase) / np.sqrt(geometry.num_elements)


def sample_paths(rng, config):
    """Draw ``config.num_paths`` independent paths.

    Gains are CN(0, sigma_alpha^2); AoA and AoD are uniform on [0, 2pi);
    delays are uniform on [0, max_delay).
    """
    L = config.num_paths
    g = rng.standard_normal((L, 2)) * np.sqrt(config.path_power / 2.0)
    aoa = rng.uniform(0.0, TWO_PI, L)
    aod = rng.uniform(0.0, TWO_PI, L)
    delay = rng.uniform(0.0, config.max_delay, L)
    return [
        PathParams(gain=complex(g[l, 0], g[l, 1]), delay=float(delay[l]), aoa=float(aoa[l]), aod=float(aod[l]))
        for l in range(L)
    ]


def user_channel(paths, geometry_tx):
    """Row channel ``h = sum_l alpha_l a_T(aod_l)^H`` of one user (a_R = 1)."""
    if not paths:
        raise InvalidParameterError("a user channel needs at least one path")
    h = np.zeros(geometry_tx.num_elements, dtype=complex)
    for p in paths:
        h += p.gain * np.conj(steering_vector(geometry_tx, p.aod))
    return h


def multi_user_channel(rng, config, num_users):
    """Stack ``num_users`` independent user rows into a ``num_users x N_t`` matrix."""
    if num_users < 2 or num_users % 2:
        raise InvalidScenarioError(f"users are paired into clusters; got {num_users} users")
    rows = [user_channel(sample_paths(rng, config), config.geometry_tx) for _ in range(num_users)]
    return np.vstack(rows)

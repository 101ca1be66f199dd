"""Pilot observation through the hybrid chain and the tentative estimate.

Per cluster the receiver sees ``Y_k = W^H H_k B_k F S + W^H N`` where ``W``
combines the cluster's two receive rows and ``F`` holds the ``M_t`` pilot
precoders. The tentative estimate undoes both with (pseudo-)inverses and
removes the pilot amplitude, so that it targets ``H_k B_k`` at every SNR.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidDimensionError, InvalidParameterError
from .numerics import dft_matrix, gram_inverse_apply, hermitian, sample_complex_gaussian

CLUSTER_ROWS = 2


@dataclass(frozen=True)
class PilotConfig:
    total_power: float = 1.0
    power_scaling: float = 0.5
    m_r: int = 2
    m_t: int = 32
    noise_variance: float = 1.0

    def __post_init__(self):
        if self.total_power <= 0:
            raise InvalidParameterError("total pilot power must be positive")
        if not 0.0 <= self.power_scaling <= 1.0:
            raise InvalidParameterError("power scaling must lie in [0, 1]")
        if self.m_r < 1 or self.m_t < 1:
            raise InvalidParameterError("need at least one combining and one precoding vector")
        if self.noise_variance < 0:
            raise InvalidParameterError("noise variance must be non-negative")

    @classmethod
    def from_snr_db(cls, snr_db, noise_variance=1.0, **kw):
        """SNR = P / sigma^2."""
        return cls(total_power=noise_variance * 10.0 ** (snr_db / 10.0), noise_variance=noise_variance, **kw)


@dataclass(frozen=True)
class ClusterObservation:
    y: np.ndarray
    cluster_index: int


def pilot_matrix(config, size):
    """``S = sqrt(alpha P + (1 - alpha) P) I``, which is just ``sqrt(P) I``."""
    a, p = config.power_scaling, config.total_power
    return np.sqrt(a * p + (1.0 - a) * p) * np.eye(size, dtype=complex)


def combiner(m_r):
    """First ``m_r`` columns of the 2x2 unitary DFT (one row per cluster user)."""
    if not 1 <= m_r <= CLUSTER_ROWS:
        raise InvalidParameterError(f"m_r must be in [1, {CLUSTER_ROWS}], got {m_r}")
    return dft_matrix(CLUSTER_ROWS)[:, :m_r]


def precoder(n_t, m_t):
    """First ``m_t`` columns of the ``n_t x n_t`` unitary DFT."""
    if not 1 <= m_t <= n_t:
        raise InvalidParameterError(f"m_t must be in [1, {n_t}], got {m_t}")
    return dft_matrix(n_t)[:, :m_t]


def _check_chain(h_k, b_k, w, f, s):
    n_t = h_k.shape[1]
    checks = [
        ("W", w.shape[0] == h_k.shape[0], f"W has {w.shape[0]} rows, H_k has {h_k.shape[0]}"),
        ("B_k", b_k.shape == (n_t, n_t), f"B_k is {b_k.shape}, expected {(n_t, n_t)}"),
        ("F", f.shape[0] == n_t, f"F has {f.shape[0]} rows, expected {n_t}"),
        ("S", s.shape == (f.shape[1], f.shape[1]), f"S is {s.shape}, expected {(f.shape[1],) * 2}"),
    ]
    for name, ok, msg in checks:
        if not ok:
            raise InvalidDimensionError(f"shape mismatch in factor {name}: {msg}")


def observe_cluster(h_k, b_k, w, f, s, rng, noise_variance, cluster_index=0):
    """Simulate ``Y_k = W^H H_k B_k F S + W^H N`` with N ~ CN(0, noise_variance)."""
    _check_chain(h_k, b_k, w, f, s)
    wh = hermitian(w)
    clean = wh @ h_k @ b_k @ f @ s
    noise = sample_complex_gaussian(rng, w.shape[0], f.shape[1], noise_variance)
    return ClusterObservation(y=clean + wh @ noise, cluster_index=cluster_index)


def left_inverse(w):
    """G_L: ``W`` when ``M_r`` is below the cluster row count, else ``(W W^H)^{-1} W``."""
    if w.shape[1] < w.shape[0]:
        return w
    return gram_inverse_apply(w, "left")


def right_inverse(f):
    """G_R: ``F^H`` when ``M_t < N_t``, else ``F^H (F F^H)^{-1}``."""
    if f.shape[1] < f.shape[0]:
        return hermitian(f)
    return gram_inverse_apply(f, "right")


def tentative_estimate(obs, w, f, total_power):
    """Coarse estimate ``G_L Y_k G_R / sqrt(P)`` of ``H_k B_k``."""
    y = obs.y if isinstance(obs, ClusterObservation) else obs
    return left_inverse(w) @ y @ right_inverse(f) / np.sqrt(total_power)


def assemble_coarse(parts):
    """Stack per-cluster 2 x N_t estimates in cluster order."""
    if not parts:
        raise InvalidDimensionError("no cluster estimates to assemble")
    width = parts[0].shape[1]
    for k, p in enumerate(parts):
        if p.shape != (CLUSTER_ROWS, width):
            raise InvalidDimensionError(f"cluster {k} estimate has shape {p.shape}, expected {(CLUSTER_ROWS, width)}")
    return np.vstack(parts)


def split_clusters(m):
    return [m[2 * k : 2 * k + 2] for k in range(m.shape[0] // 2)]


def coarse_observation(h_c, beamformers, config, rng):
    """Observe and coarsely estimate every cluster of ``h_c``; return the N_r x N_t stack."""
    n_t = h_c.shape[1]
    w = combiner(config.m_r)
    f = precoder(n_t, config.m_t)
    s = pilot_matrix(config, config.m_t)
    parts = []
    for k, (h_k, b_k) in enumerate(zip(split_clusters(h_c), beamformers)):
        obs = observe_cluster(h_k, b_k, w, f, s, rng, config.noise_variance, cluster_index=k)
        parts.append(tentative_estimate(obs, w, f, config.total_power))
    return assemble_coarse(parts)

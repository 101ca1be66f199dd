"""Classical baselines: LS, linear MMSE from fitted moments, and the CRB.

Vectorisation is row-major throughout: for ``X = L H R`` we have
``vec(X) = (L kron R^T) vec(H)``, which matches ``numpy.ravel``.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import InvalidModelError, InvalidParameterError
from .numerics import hermitian


@dataclass(frozen=True)
class LinearObservationModel:
    """``y = A vec(H_k) + n`` with white noise ``n ~ CN(0, noise_variance I)``."""

    forward_map: np.ndarray
    noise_variance: float

    def __post_init__(self):
        if self.noise_variance <= 0:
            raise InvalidParameterError("noise variance must be positive")


@dataclass(frozen=True)
class SecondOrderStats:
    mean_h: np.ndarray
    mean_y: np.ndarray
    cov_yy: np.ndarray
    cov_hy: np.ndarray
    num_samples: int


def ls_estimate(y_tilde_k):
    """LS estimate of H_k: the normalised pseudo-inverse output is already the LS solution."""
    return np.array(y_tilde_k, copy=True)


def fit_second_order(pairs):
    """Empirical means, ``C_YY`` and ``C_HY`` from (coarse, true) matrix pairs."""
    pairs = list(pairs)
    if not pairs:
        raise InvalidParameterError("cannot fit second-order statistics to an empty training set")
    shape = pairs[0][1].shape
    ys = np.stack([np.ravel(y) for y, _ in pairs]).astype(complex)
    hs = np.stack([np.ravel(h) for _, h in pairs]).astype(complex)
    n, dim = ys.shape
    if n < 10 * dim:
        warnings.warn(f"only {n} samples for a {dim}-dimensional covariance (recommended >= {10 * dim})", stacklevel=2)
    mu_y = ys.mean(axis=0)
    mu_h = hs.mean(axis=0)
    yc = ys - mu_y
    hc = hs - mu_h
    # biased (1/n) estimates; a single sample gives zero covariance
    cov_yy = yc.T @ yc.conj() / n
    cov_hy = hc.T @ yc.conj() / n
    return SecondOrderStats(mu_h.reshape(shape), mu_y.reshape(shape), cov_yy, cov_hy, n)


def mmse_estimate(y_tilde_k, stats, loading=1e-6):
    """Linear MMSE: ``mu_H + C_HY (C_YY + eps I)^{-1} (y - mu_Y)``.

    ``eps = loading * trace(C_YY) / dim`` keeps the solve well posed. A stack
    of observations (leading batch axis) is accepted as well.
    """
    y = np.asarray(y_tilde_k)
    shape = stats.mean_h.shape
    batched = y.ndim == len(shape) + 1
    yv = y.reshape(-1, stats.cov_yy.shape[0]) - np.ravel(stats.mean_y)
    dim = stats.cov_yy.shape[0]
    eps = loading * np.real(np.trace(stats.cov_yy)) / dim
    if eps <= 0:
        eps = loading
    c = stats.cov_yy + eps * np.eye(dim)
    # gain = C^{-1} C_HY^H = (C_HY C^{-1})^H, so row vectors map as yv @ conj(gain)
    gain = scipy.linalg.solve(c, hermitian(stats.cov_hy), assume_a="her")
    est = np.ravel(stats.mean_h) + yv @ np.conj(gain)
    if batched:
        return est.reshape((-1,) + shape)
    return est.reshape(shape)


def chain_observation_model(w, b_k, f, total_power, noise_variance):
    """Observation model of ``vec(Y_k)`` given ``vec(H_k)`` for the pilot chain.

    ``Y_k = sqrt(P) W^H H_k B_k F + W^H N``. The combined noise has covariance
    ``sigma^2 (W^H W kron I)``; it is whitened here so the returned model has
    white noise of variance ``sigma^2``.
    """
    wh = hermitian(w)
    right = b_k @ f
    a = np.sqrt(total_power) * np.kron(wh, right.T)
    wtw = wh @ w
    if not np.allclose(wtw, np.eye(wtw.shape[0]), atol=1e-12):
        vals, vecs = np.linalg.eigh(wtw)
        whiten = vecs @ np.diag(vals ** -0.5) @ hermitian(vecs)
        a = np.kron(whiten, np.eye(f.shape[1])) @ a
    return LinearObservationModel(forward_map=a, noise_variance=noise_variance)


def crb_trace(model, rtol=1e-10):
    """Sum of CRB variances over the identifiable subspace: ``sigma^2 sum 1/s_i^2``.

    Singular values below ``rtol * s_max`` are treated as the null space of
    the forward map and excluded.
    """
    s = np.linalg.svd(model.forward_map, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        raise InvalidModelError("forward map has rank 0; nothing is identifiable")
    s = s[s > rtol * s[0]]
    return model.noise_variance * float(np.sum(1.0 / s**2))


def crb_nmse(model, channel_power):
    """Constrained CRB normalised by the channel energy ``E||H_k||_F^2``."""
    if channel_power <= 0:
        raise InvalidParameterError("channel power must be positive")
    return crb_trace(model) / channel_power

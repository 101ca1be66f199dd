"""User pairing by channel gain and inter-cluster nulling beamformers."""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidScenarioError
from .numerics import gram_inverse_apply, hermitian


@dataclass(frozen=True)
class ClusterPlan:
    """Pairs of (strong, weak) user indices, cluster k -> rows 2k, 2k+1.

    ``permutation[r]`` is the original user placed on row ``r`` of the
    clustered matrix.
    """

    clusters: tuple

    @property
    def num_clusters(self):
        return len(self.clusters)

    @property
    def permutation(self):
        return np.array([u for pair in self.clusters for u in pair], dtype=int)


def channel_gains(h):
    return np.linalg.norm(h, axis=1)


def cluster_users(h):
    """Pair the i-th strongest user with the i-th weakest.

    Gain is the Euclidean norm of a user's row. Ties rank the lower original
    index as stronger.
    """
    n = h.shape[0]
    if n < 2 or n % 2:
        raise InvalidScenarioError(f"cannot pair {n} users")
    gains = channel_gains(h)
    # lexsort: last key is primary -> descending gain, then ascending index
    order = np.lexsort((np.arange(n), -gains))
    clusters = tuple((int(order[k]), int(order[n - 1 - k])) for k in range(n // 2))
    return ClusterPlan(clusters)


def clustered_matrix(h, plan):
    return h[plan.permutation]


def unclustered_matrix(h_c, plan):
    """Inverse of :func:`clustered_matrix`."""
    out = np.empty_like(h_c)
    out[plan.permutation] = h_c
    return out


def interference_submatrix(h_c, k):
    """All rows of ``h_c`` except those of cluster ``k`` (0-based)."""
    num_clusters = h_c.shape[0] // 2
    if not 0 <= k < num_clusters:
        raise IndexError(f"cluster index {k} out of range for {num_clusters} clusters")
    return np.delete(h_c, [2 * k, 2 * k + 1], axis=0)


def beamformer(h_minus_k, n_t):
    """Projector onto the orthogonal complement of the row space of ``h_minus_k``.

    ``B = I - H^H (H H^H)^{-1} H``; for an empty ``H`` this is the identity.
    """
    eye = np.eye(n_t, dtype=complex)
    if h_minus_k.shape[0] == 0:
        return eye
    return eye - hermitian(h_minus_k) @ gram_inverse_apply(h_minus_k, "left")


def cluster_beamformers(h_c):
    """One beamformer per cluster of the clustered matrix."""
    n_t = h_c.shape[1]
    return [beamformer(interference_submatrix(h_c, k), n_t) for k in range(h_c.shape[0] // 2)]

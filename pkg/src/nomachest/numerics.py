"""Complex linear-algebra kernels shared by the simulator.

Matrices are plain ``numpy`` complex128 arrays. Random streams are numpy
``Generator`` objects backed by the counter-based Philox bit generator, so a
(seed, stream) pair always yields the same samples.
"""

import numpy as np
import scipy.linalg

from .errors import InvalidDimensionError, InvalidParameterError, SingularMatrixError

COND_LIMIT = 1e12


def make_rng(seed, *stream):
    """Return a reproducible generator for ``seed`` and an optional stream path.

    ``make_rng(7, 3)`` and ``make_rng(7, 4)`` are statistically independent;
    both are fully determined by their arguments.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(ss))


def dft_matrix(n):
    """Unitary n x n DFT matrix, entry (p, q) = exp(-2j*pi*p*q/n)/sqrt(n)."""
    if n < 1:
        raise InvalidDimensionError(f"DFT size must be >= 1, got {n}")
    idx = np.arange(n)
    # reduce p*q mod n first so large exponents do not lose phase accuracy
    phase = (np.outer(idx, idx) % n) / n
    return np.exp(-2j * np.pi * phase) / np.sqrt(n)


def hermitian(a):
    return np.conj(np.swapaxes(a, -1, -2))


def gram_inverse_apply(a, side="left"):
    """Pseudo-inverse style products built on the Gram matrix ``A A^H``.

    ``side='left'`` returns ``(A A^H)^{-1} A`` and ``side='right'`` returns
    ``A^H (A A^H)^{-1}``. Raises :class:`SingularMatrixError` when the
    Gram matrix has condition number above ``COND_LIMIT``.
    """
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2:
        raise InvalidDimensionError(f"expected a matrix, got shape {a.shape}")
    if side not in ("left", "right"):
        raise InvalidParameterError(f"side must be 'left' or 'right', got {side!r}")
    gram = a @ hermitian(a)
    n = gram.shape[0]
    if n == 0:
        return a.copy() if side == "left" else hermitian(a)
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularMatrixError(n, cond)
    x = scipy.linalg.solve(gram, a, assume_a="her")
    if side == "left":
        return x
    # gram is Hermitian, so A^H gram^{-1} = (gram^{-1} A)^H
    return hermitian(x)


def sample_complex_gaussian(rng, rows, cols, variance=1.0):
    """i.i.d. circularly-symmetric CN(0, variance) entries."""
    if variance < 0:
        raise InvalidParameterError(f"variance must be >= 0, got {variance}")
    scale = np.sqrt(variance / 2.0)
    z = rng.standard_normal((rows, cols, 2))
    return scale * (z[..., 0] + 1j * z[..., 1])

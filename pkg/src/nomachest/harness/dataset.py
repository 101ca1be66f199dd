"""Training/evaluation samples and the ``.ndst`` binary file format.

Layout (all little-endian)::

    b"NDST"  u16 version  u32 n_r  u32 n_t  u32 count  u64 seed  32B sha256(config)
    per sample: f32 snr_db, coarse[n_r*n_t] (re, im f32 pairs), true[n_r*n_t] (re, im)

Samples are stored single precision, so a generated :class:`Dataset` keeps
complex64 arrays and a write/read round trip is bit-exact.
"""

import logging
import struct
from dataclasses import dataclass

import numpy as np

from ..channel import multi_user_channel
from ..errors import FormatError, InvalidDimensionError, SingularMatrixError
from ..measurement import coarse_observation
from ..noma import cluster_beamformers, cluster_users, clustered_matrix
from ..numerics import make_rng

log = logging.getLogger(__name__)

MAGIC = b"NDST"
VERSION = 1
_HEADER = struct.Struct("<4sHIIIQ32s")
SPLITS = {"train": 0, "val": 1, "test": 2}
MAX_REDRAWS = 10


@dataclass
class Dataset:
    coarse: np.ndarray  # (count, n_r, n_t) complex64
    true: np.ndarray  # (count, n_r, n_t) complex64
    snr_db: np.ndarray  # (count,) float32
    seed: int = 0
    config_hash: bytes = b"\0" * 32

    def __post_init__(self):
        if self.coarse.shape != self.true.shape or self.coarse.ndim != 3:
            raise InvalidDimensionError(f"coarse {self.coarse.shape} and true {self.true.shape} must be equal (N, n_r, n_t)")
        if len(self.snr_db) != len(self.coarse):
            raise InvalidDimensionError("one SNR per sample required")

    def __len__(self):
        return len(self.coarse)

    @property
    def dims(self):
        return self.coarse.shape[1:]

    def subset(self, idx):
        return Dataset(self.coarse[idx], self.true[idx], self.snr_db[idx], self.seed, self.config_hash)


def draw_sample(rng, config, snr_db):
    """One (coarse, clustered-true) pair: channel -> clustering -> beamforming -> pilots -> tentative estimate.

    A channel whose interference submatrix is too ill-conditioned is redrawn,
    at most ``MAX_REDRAWS`` times.
    """
    sc = config.scenario
    ch_cfg = sc.channel_config()
    for attempt in range(MAX_REDRAWS + 1):
        h = multi_user_channel(rng, ch_cfg, sc.n_r)
        h_c = clustered_matrix(h, cluster_users(h))
        try:
            bfs = cluster_beamformers(h_c)
        except SingularMatrixError:
            if attempt == MAX_REDRAWS:
                raise
            log.warning("singular interference matrix, redrawing channel (attempt %d)", attempt + 1)
            continue
        y = coarse_observation(h_c, bfs, config.pilot.pilot_config(snr_db), rng)
        return y, h_c
    raise AssertionError("unreachable")


def split_rng(seed, split, snr_index=0):
    return make_rng(seed, SPLITS[split], snr_index)


def generate_dataset(config, split, rng, size=None, snr_db=None, seed=0):
    """Generate ``size`` samples (default: the configured size of ``split``).

    ``snr_db`` fixes the SNR; a list draws each sample's SNR uniformly from it.
    """
    if size is None:
        size = {"train": config.dataset.train, "val": config.dataset.validation, "test": config.dataset.test}[split]
    if snr_db is None:
        snr_db = config.evaluation.snr_grid
    grid = np.atleast_1d(np.asarray(snr_db, dtype=float))
    n_r, n_t = config.scenario.n_r, config.scenario.n_t
    coarse = np.empty((size, n_r, n_t), np.complex64)
    true = np.empty((size, n_r, n_t), np.complex64)
    snrs = np.empty(size, np.float32)
    for i in range(size):
        snr = grid[0] if grid.size == 1 else grid[rng.integers(grid.size)]
        coarse[i], true[i] = draw_sample(rng, config, snr)
        snrs[i] = snr
    return Dataset(coarse, true, snrs, seed=seed, config_hash=bytes.fromhex(config.digest()))


def _interleave(z):
    out = np.empty(z.shape + (2,), "<f4")
    out[..., 0] = z.real
    out[..., 1] = z.imag
    return out


def write_dataset(path, ds):
    count, n_r, n_t = ds.coarse.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, n_r, n_t, count, ds.seed, ds.config_hash))
        rec = np.empty((count, 1 + 4 * n_r * n_t), "<f4")
        rec[:, 0] = ds.snr_db
        rec[:, 1 : 1 + 2 * n_r * n_t] = _interleave(ds.coarse).reshape(count, -1)
        rec[:, 1 + 2 * n_r * n_t :] = _interleave(ds.true).reshape(count, -1)
        fh.write(rec.tobytes())


def read_dataset(path):
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise FormatError(f"{path}: truncated header")
        magic, version, n_r, n_t, count, seed, digest = _HEADER.unpack(head)
        if magic != MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
        if version != VERSION:
            raise FormatError(f"{path}: unsupported dataset version {version}")
        body = fh.read()
    width = 1 + 4 * n_r * n_t
    if len(body) != 4 * width * count:
        raise FormatError(f"{path}: expected {count} samples of {4 * width} bytes, got {len(body)} bytes")
    rec = np.frombuffer(body, "<f4").reshape(count, width)
    planes = 2 * n_r * n_t

    def unpack(block):
        pairs = block.reshape(count, n_r, n_t, 2)
        return (pairs[..., 0] + 1j * pairs[..., 1]).astype(np.complex64)

    return Dataset(
        coarse=unpack(rec[:, 1 : 1 + planes]),
        true=unpack(rec[:, 1 + planes :]),
        snr_db=rec[:, 0].astype(np.float32),
        seed=seed,
        config_hash=digest,
    )

"""Experiment drivers: NMSE-vs-SNR comparison and the two training sweeps."""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from ..cnn import TrainConfig, predict, train
from ..errors import InvalidArchitectureError, NonFiniteLossError
from ..estimators import chain_observation_model, crb_trace, fit_second_order, mmse_estimate
from ..measurement import combiner, precoder, split_clusters
from ..noma import cluster_beamformers
from .dataset import generate_dataset, split_rng
from .metrics import MetricsTable, per_sample_nmse

log = logging.getLogger(__name__)

FIG3_METHODS = ("ls", "mmse", "cnn", "crb", "ls_projected")
MIXED = "mixed"


def snr_tag(snr):
    return MIXED if snr == MIXED else f"snr{snr:g}"


def _worker_init():
    try:
        from threadpoolctl import threadpool_limits

        threadpool_limits(1)
    except ImportError:  # pragma: no cover
        pass


def run_jobs(fn, tasks, jobs=1):
    """Map ``fn`` over ``tasks`` serially or on a bounded process pool; order is preserved."""
    tasks = list(tasks)
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(jobs, len(tasks)), initializer=_worker_init) as pool:
        return list(pool.map(fn, tasks))


# -- data and models -------------------------------------------------------


def snr_points(config):
    """(tag, stream index, SNR value or list) for every model the comparison needs."""
    grid = config.evaluation.snr_grid
    if config.evaluation.model_mode == MIXED:
        return [(MIXED, len(grid), list(grid))]
    return [(snr_tag(s), i, s) for i, s in enumerate(grid)]


def make_splits(config, seed, stream, snr, splits=("train", "val", "test")):
    return {
        split: generate_dataset(config, split, split_rng(seed, split, stream), snr_db=snr, seed=seed)
        for split in splits
    }


def train_config(config, seed, **overrides):
    t = config.training
    tc = TrainConfig(
        epochs=t.epochs,
        learning_rate=t.learning_rate,
        batch_size=config.train_batch_size(),
        layer_count=t.layer_count,
        filters=t.filters,
        seed=seed,
        output_init=t.output_init,
    )
    return replace(tc, **overrides)


def train_cnn(train_ds, val_ds, tconf):
    return train(train_ds.coarse, train_ds.true, val_ds.coarse, val_ds.true, tconf)


def fit_mmse(train_ds):
    """Second-order statistics of (coarse, true) cluster blocks, pooled over cluster slots."""
    n, n_r, n_t = train_ds.coarse.shape
    pairs = zip(train_ds.coarse.reshape(-1, 2, n_t), train_ds.true.reshape(-1, 2, n_t))
    return fit_second_order(pairs)


def mmse_channels(stats, coarse, loading=1e-6):
    n, n_r, n_t = coarse.shape
    est = mmse_estimate(coarse.reshape(-1, 2, n_t).astype(np.complex128), stats, loading)
    return est.reshape(n, n_r, n_t)


# -- bound and identifiable-subspace error ---------------------------------


def crb_and_projected_ls(config, ds):
    """Per-sample constrained CRB and identifiable-subspace LS error, both normalised by ||H_c||^2.

    The identifiable subspace of cluster k is the range of its beamformer
    ``B_k``, recomputed from the stored clustered channel.
    """
    n_t = config.scenario.n_t
    pilot = config.pilot
    w = combiner(pilot.m_r)
    f = precoder(n_t, pilot.m_t)
    crb = np.empty(len(ds))
    proj = np.empty(len(ds))
    for i in range(len(ds)):
        h_c = ds.true[i].astype(np.complex128)
        y = ds.coarse[i].astype(np.complex128)
        p = pilot.pilot_config(float(ds.snr_db[i]))
        energy = float(np.sum(np.abs(h_c) ** 2))
        bound = 0.0
        err = 0.0
        for b_k, h_k, y_k in zip(cluster_beamformers(h_c), split_clusters(h_c), split_clusters(y)):
            bound += crb_trace(chain_observation_model(w, b_k, f, p.total_power, p.noise_variance))
            err += float(np.sum(np.abs((y_k - h_k) @ b_k) ** 2))
        crb[i] = bound / energy
        proj[i] = err / energy
    return crb, proj


# -- NMSE vs SNR -----------------------------------------------------------


@dataclass
class SnrOutcome:
    tag: str
    snr: object
    per_sample: dict  # method -> per-sample NMSE at each evaluated SNR: {snr: array}
    history: object = None
    model: object = None


def evaluate_point(config, test_ds, model, stats):
    """Per-sample NMSE of every method on one test set."""
    out = {
        "ls": per_sample_nmse(test_ds.true, test_ds.coarse),
        "mmse": per_sample_nmse(test_ds.true, mmse_channels(stats, test_ds.coarse, config.evaluation.mmse_loading)),
        "cnn": per_sample_nmse(test_ds.true, predict(model, test_ds.coarse)),
    }
    out["crb"], out["ls_projected"] = crb_and_projected_ls(config, test_ds)
    return out


def _fig3_job(args):
    config, seed, tag, stream, snr, model = args
    splits = ("train", "val") if model is None else ("train",)
    data = make_splits(config, seed, stream, snr, splits)
    result = None
    if model is None:
        result = train_cnn(data["train"], data["val"], train_config(config, seed))
        model = result.best_model
    stats = fit_mmse(data["train"])
    per_snr = {}
    grid = [snr] if tag != MIXED else list(config.evaluation.snr_grid)
    for s in grid:
        s_index = config.evaluation.snr_grid.index(s)
        test = generate_dataset(config, "test", split_rng(seed, "test", s_index), snr_db=s, seed=seed)
        per_snr[s] = evaluate_point(config, test, model, stats)
    return SnrOutcome(tag, snr, per_snr, history=result, model=model)


@dataclass
class Fig3Result:
    table: MetricsTable
    per_sample: dict = field(default_factory=dict)  # (method, snr) -> array
    outcomes: list = field(default_factory=list)


def run_fig3(config, seed=None, jobs=1, models=None):
    """NMSE of LS, MMSE and CNN plus the CRB at every grid SNR.

    ``models`` maps a model tag (``snr10``, ``mixed``) to a trained model to
    use instead of training in-run.
    """
    seed = config.training.seed if seed is None else seed
    tasks = [(config, seed, tag, stream, snr, (models or {}).get(tag)) for tag, stream, snr in snr_points(config)]
    outcomes = run_jobs(_fig3_job, tasks, jobs)
    table = MetricsTable(("method", "snr_db", "nmse"))
    per_sample = {}
    for o in outcomes:
        for s, res in o.per_sample.items():
            for m in FIG3_METHODS:
                per_sample[(m, float(s))] = res[m]
    for m in FIG3_METHODS:
        for s in config.evaluation.snr_grid:
            table.add(m, float(s), float(np.nanmean(per_sample[(m, float(s))])))
    return Fig3Result(table, per_sample, outcomes)


def fig3_series(table):
    """NMSE curves in dB for plotting."""
    out = {}
    for m, (xs, ys) in table.series("method", "snr_db", "nmse").items():
        out[m] = (xs, [10 * math.log10(y) if y > 0 else float("nan") for y in ys])
    return out


# -- training sweeps -------------------------------------------------------


def _sweep_job(args):
    config, seed, label, overrides, data = args
    tconf = train_config(config, seed, epochs=config.sweep.epochs, **overrides)
    try:
        res = train_cnn(data["train"], data["val"], tconf)
        curve = list(res.val_rmse)
    except NonFiniteLossError as exc:
        log.warning("run %s diverged: %s", label, exc)
        curve = list(exc.partial.val_rmse) if exc.partial is not None else []
    # a non-finite validation value ends the curve
    for i, v in enumerate(curve):
        if not math.isfinite(v):
            curve = curve[:i]
            break
    return label, curve


def _run_sweep(config, seed, runs, jobs):
    data = make_splits(config, seed, 0, config.sweep.snr_db, ("train", "val"))
    tasks = [(config, seed, label, ov, data) for label, ov in runs]
    table = MetricsTable(("run", "epoch", "rmse"))
    for label, curve in run_jobs(_sweep_job, tasks, jobs):
        for epoch, v in enumerate(curve, start=1):
            table.add(label, epoch, float(v))
    return table


def lr_label(lr):
    return f"lr={lr:g}"


def layers_label(n):
    return f"L_c={n}"


def run_fig4(config, seed=None, jobs=1):
    """Validation RMSE per epoch for each learning rate in the sweep, at the sweep SNR."""
    seed = config.training.seed if seed is None else seed
    runs = [(lr_label(lr), {"learning_rate": lr}) for lr in config.sweep.learning_rates]
    return _run_sweep(config, seed, runs, jobs)


def run_fig5(config, seed=None, jobs=1):
    """Validation RMSE per epoch for each convolutional layer count in the sweep."""
    seed = config.training.seed if seed is None else seed
    for n in config.sweep.layer_counts:
        if n < 3:
            raise InvalidArchitectureError(f"sweep asks for L_c={n}; at least 3 convolutional layers are required")
    runs = [(layers_label(n), {"layer_count": n}) for n in config.sweep.layer_counts]
    return _run_sweep(config, seed, runs, jobs)


def final_rmse(table, label):
    rows = table.where(run=label)
    return rows[-1][2] if rows else float("nan")

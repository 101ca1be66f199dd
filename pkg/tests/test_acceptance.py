"""Acceptance criteria, each at its stated tolerance.

Every test records one PASS/FAIL line, listed together at the end of the
pytest run. Heavy runs write their artifacts under ``$ACCEPTANCE_OUT`` when
set (otherwise a temporary directory); ``$ACCEPTANCE_JOBS`` sets the worker
count for the desk-scale figures.
"""

import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from nomachest.cnn import TrainConfig, train
from nomachest.cnn.adam import AdamState, adam_step
from nomachest.cnn.gradcheck import run_suite
from nomachest.cnn.training import complex_to_planes, mse_loss
from nomachest.harness import experiments as ex
from nomachest.harness.cli import _write_fig3, _write_sweep, main, write_manifest
from nomachest.harness.config import apply_desk_scale, load_config
from nomachest.harness.dataset import generate_dataset, split_rng
from nomachest.harness.metrics import nmse
from nomachest.measurement import PilotConfig, combiner, observe_cluster, pilot_matrix, precoder, split_clusters, tentative_estimate
from nomachest.noma import cluster_beamformers, cluster_users, clustered_matrix
from nomachest.channel import multi_user_channel
from nomachest.numerics import make_rng

from conftest import record_acceptance

FULL_CFG = Path(__file__).resolve().parent.parent / "configs" / "full.cfg"
JOBS = int(os.environ.get("ACCEPTANCE_JOBS", os.cpu_count() or 1))
SEED = 0


@pytest.fixture
def out_dir(tmp_path):
    def make(name):
        root = os.environ.get("ACCEPTANCE_OUT")
        path = Path(root) / name if root else tmp_path / name
        path.mkdir(parents=True, exist_ok=True)
        return path

    return make


def desk_config():
    return apply_desk_scale(load_config(FULL_CFG))


def clustered_scenario(rng, config):
    h = multi_user_channel(rng, config.scenario.channel_config(), config.scenario.n_r)
    return clustered_matrix(h, cluster_users(h))


def test_c01_beamforming_orthogonality():
    config = load_config(FULL_CFG)
    rng = make_rng(SEED, 1)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        h_c = clustered_scenario(rng, config)
        for k, b_k in enumerate(cluster_beamformers(h_c)):
            for l in range(h_c.shape[0]):
                if l // 2 == k:
                    continue
                # users are rows, so the leakage of user l through B_k is h_l B_k
                worst = max(worst, np.linalg.norm(h_c[l] @ b_k) / np.linalg.norm(h_c[l]))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-9 and elapsed < 10
    record_acceptance(1, "beamforming orthogonality", ok, f"max leakage {worst:.2e} (< 1e-09), {elapsed:.1f} s (< 10 s)")
    assert ok


def test_c02_coarse_estimate_consistency():
    config = load_config(FULL_CFG)
    n_t = config.scenario.n_t
    rng = make_rng(SEED, 2)
    pilot = PilotConfig(total_power=1.0, m_r=2, m_t=n_t, noise_variance=0.0)
    w, f, s = combiner(2), precoder(n_t, n_t), pilot_matrix(pilot, n_t)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        h_c = clustered_scenario(rng, config)
        for h_k, b_k in zip(split_clusters(h_c), cluster_beamformers(h_c)):
            obs = observe_cluster(h_k, b_k, w, f, s, rng, 0.0)
            est = tentative_estimate(obs, w, f, pilot.total_power)
            worst = max(worst, np.linalg.norm(est - h_k @ b_k))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-10 and elapsed < 5
    record_acceptance(2, "coarse estimate consistency", ok, f"max Frobenius error {worst:.2e} (< 1e-10), {elapsed:.1f} s (< 5 s)")
    assert ok


def test_c03_gradient_checks():
    t0 = time.perf_counter()
    results = run_suite(configs=50, seed=SEED, names=["conv", "relu", "bn", "loss"])
    elapsed = time.perf_counter() - t0
    ok = all(r.passed for r in results) and elapsed < 120
    detail = ", ".join(f"{r.name} {r.max_rel_error:.1e}/{r.tolerance:.0e}" for r in results)
    record_acceptance(3, "gradient checks", ok, f"{detail} over 50 configs each, {elapsed:.1f} s (< 120 s)")
    assert ok


def test_c04_adam_oracle():
    # f(x) = 2 (x + 1)^2 from x0 = 3
    lr, b1, b2, eps = 0.05, 0.9, 0.999, 1e-8
    x, m, v = 3.0, 0.0, 0.0
    expected = []
    for t in range(1, 11):
        g = 4.0 * (x + 1.0)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        x -= lr * (m / (1 - b1**t)) / (math.sqrt(v / (1 - b2**t)) + eps)
        expected.append(x)
    p = np.array([3.0])
    state = AdamState(learning_rate=lr)
    got = []
    for _ in range(10):
        adam_step([p], [np.array([4.0 * (p[0] + 1.0)])], state)
        got.append(p[0])
    err = max(abs(a - b) for a, b in zip(got, expected))
    ok = err < 1e-10
    record_acceptance(4, "Adam oracle", ok, f"max trace difference {err:.2e} (< 1e-10) over 10 steps")
    assert ok


@pytest.mark.slow
def test_c05_desk_nmse_ordering(out_dir):
    config = desk_config()
    out = out_dir("fig3_desk")
    t0 = time.perf_counter()
    result = ex.run_fig3(config, SEED, jobs=JOBS)
    outputs = _write_fig3(out, result)
    write_manifest(out, "fig3", config, SEED, JOBS, outputs)
    elapsed = time.perf_counter() - t0
    checks = []
    parts = []
    for s in config.evaluation.snr_grid:
        val = {m: result.table.value("method", m, "snr_db", s, "nmse") for m in ex.FIG3_METHODS}
        crb = result.per_sample[("crb", s)]
        proj = result.per_sample[("ls_projected", s)]
        sigma = np.std(proj, ddof=1) / math.sqrt(len(proj))
        order_ok = val["cnn"] < val["mmse"] <= val["ls"] * 1.02
        crb_ok = np.mean(crb) <= np.mean(proj) + 3 * sigma
        checks += [order_ok, crb_ok]
        parts.append(
            f"{s:g} dB cnn {val['cnn']:.4f} mmse {val['mmse']:.4f} ls {val['ls']:.4f} "
            f"crb {val['crb']:.4f} ls_proj {val['ls_projected']:.4f}"
            f"{'' if order_ok else ' [ordering fails]'}{'' if crb_ok else ' [bound fails]'}"
        )
    ok = all(checks)
    record_acceptance(5, "desk NMSE ordering", ok, "; ".join(parts) + f"; {elapsed:.0f} s")
    assert ok


def test_c06_ls_snr_scaling():
    config = load_config(FULL_CFG)
    t0 = time.perf_counter()
    values = {}
    for s in (0.0, 20.0):
        # same stream for both SNRs: identical channels, noise scaled only
        ds = generate_dataset(config, "test", split_rng(SEED, "test", 99), size=500, snr_db=s)
        values[s] = nmse(ds.true, ds.coarse)
    gain = 10 * math.log10(values[0.0] / values[20.0])
    elapsed = time.perf_counter() - t0
    ok = gain >= 15 and elapsed < 60
    record_acceptance(
        6, "LS SNR scaling", ok, f"NMSE {values[0.0]:.4f} -> {values[20.0]:.4f}, {gain:.2f} dB (>= 15 dB), {elapsed:.1f} s (< 60 s)"
    )
    assert ok


@pytest.mark.slow
def test_c07_desk_learning_rate_sweep(out_dir):
    config = desk_config()
    out = out_dir("fig4_desk")
    t0 = time.perf_counter()
    table = ex.run_fig4(config, SEED, jobs=JOBS)
    outputs = _write_sweep(out, table, "rmse_vs_epoch_lr", "RMSE vs epoch")
    write_manifest(out, "fig4", config, SEED, JOBS, outputs)
    elapsed = time.perf_counter() - t0
    final = {lr: ex.final_rmse(table, ex.lr_label(lr)) for lr in config.sweep.learning_rates}
    best = final[3e-4]
    rows = table.where(run=ex.lr_label(3e-4))
    ok = best <= final[3e-2] and best <= final[3e-5] and rows[-1][2] < rows[0][2] and elapsed < 1800
    detail = ", ".join(f"lr {lr:g} {v:.4f}" for lr, v in final.items())
    record_acceptance(7, "desk learning-rate sweep", ok, f"final RMSE {detail}; {elapsed:.0f} s (< 1800 s)")
    assert ok


@pytest.mark.slow
def test_c08_desk_depth_sweep(out_dir):
    config = desk_config()
    # only the 6-vs-3 ordering is asserted
    config.sweep.layer_counts = [3, 6]
    out = out_dir("fig5_desk")
    t0 = time.perf_counter()
    table = ex.run_fig5(config, SEED, jobs=JOBS)
    outputs = _write_sweep(out, table, "rmse_vs_epoch_layers", "RMSE vs epoch")
    write_manifest(out, "fig5", config, SEED, JOBS, outputs)
    elapsed = time.perf_counter() - t0
    r3, r6 = ex.final_rmse(table, ex.layers_label(3)), ex.final_rmse(table, ex.layers_label(6))
    ok = r6 <= r3
    record_acceptance(8, "desk depth sweep", ok, f"final RMSE L_c=6 {r6:.4f} <= L_c=3 {r3:.4f}; {elapsed:.0f} s")
    assert ok


def test_c09_rerun_determinism(tmp_path, tiny_cfg_text):
    cfg = tmp_path / "tiny.cfg"
    cfg.write_text(tiny_cfg_text)
    outcomes = []
    for cmd, csv in (("fig3", "nmse_vs_snr.csv"), ("fig4", "rmse_vs_epoch_lr.csv"), ("fig5", "rmse_vs_epoch_layers.csv")):
        first, again = tmp_path / cmd, tmp_path / f"{cmd}_rerun"
        assert main([cmd, "--config", str(cfg), "--out", str(first), "--seed", "11"]) == 0
        assert main(["rerun", "--manifest", str(first / "manifest.txt"), "--out", str(again)]) == 0
        outcomes.append((cmd, (first / csv).read_bytes() == (again / csv).read_bytes()))
    ok = all(same for _, same in outcomes)
    detail = ", ".join(f"{cmd} {'identical' if same else 'differs'}" for cmd, same in outcomes)
    record_acceptance(9, "rerun determinism", ok, f"CSV after rerun from manifest: {detail}")
    assert ok


@pytest.mark.slow
def test_c10_overfit_sanity():
    config = load_config(FULL_CFG)
    ds = generate_dataset(config, "train", split_rng(SEED, "train", 42), size=32, snr_db=15.0)
    # 16 filters lack the capacity to memorise 32 samples; 32 do
    tconf = TrainConfig(epochs=500, learning_rate=3e-3, batch_size=32, layer_count=6, filters=32, seed=SEED, output_init="zero")

    def full_batch_loss(model):
        x = complex_to_planes(ds.coarse * model.input_scale).astype(np.float32)
        y = complex_to_planes(ds.true * model.target_scale).astype(np.float32)
        return mse_loss(model.copy().forward(x, "train"), y)[0]

    t0 = time.perf_counter()
    initial = full_batch_loss(train(ds.coarse, ds.true, ds.coarse, ds.true, TrainConfig(**{**vars(tconf), "epochs": 0})).model)
    final = full_batch_loss(train(ds.coarse, ds.true, ds.coarse, ds.true, tconf).model)
    elapsed = time.perf_counter() - t0
    ratio = final / initial
    ok = ratio < 0.01 and elapsed < 300
    record_acceptance(10, "overfit sanity", ok, f"train loss {initial:.4g} -> {final:.4g}, ratio {ratio:.2%} (< 1%), {elapsed:.0f} s (< 300 s)")
    assert ok

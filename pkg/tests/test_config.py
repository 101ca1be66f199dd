import pytest

from nomachest.errors import ConfigError
from nomachest.harness.config import (
    DESK_PROFILE,
    ExperimentConfig,
    apply_desk_scale,
    dump_config,
    load_config,
    parse_config,
)


def test_defaults_are_full_size_setting():
    cfg = ExperimentConfig()
    assert (cfg.scenario.n_t, cfg.scenario.n_r, cfg.scenario.num_clusters) == (32, 16, 8)
    assert cfg.scenario.num_paths == 3
    assert (cfg.pilot.m_r, cfg.pilot.m_t) == (2, 32)
    assert (cfg.dataset.train, cfg.dataset.validation, cfg.dataset.test) == (8100, 900, 1900)
    t = cfg.training
    assert (t.epochs, t.learning_rate, t.batch_size, t.layer_count, t.filters) == (100, 3e-4, 128, 6, 64)
    assert cfg.sweep.learning_rates == [3e-2, 3e-3, 3e-4, 3e-5]
    assert cfg.sweep.layer_counts == [3, 4, 5, 6, 7]
    assert cfg.sweep.snr_db == 15.0
    assert cfg.scenario.channel_config().path_power == pytest.approx(1 / 3)


def test_dump_parse_round_trip():
    cfg = apply_desk_scale(ExperimentConfig())
    text = dump_config(cfg)
    back = parse_config(text)
    assert back == cfg
    assert back.digest() == cfg.digest()


def test_shipped_configs():
    full = load_config("configs/full.cfg")
    assert full == ExperimentConfig()
    assert load_config("configs/desk.cfg") == apply_desk_scale(ExperimentConfig())


def test_desk_profile_values():
    cfg = apply_desk_scale(ExperimentConfig())
    assert cfg.dataset.train == 2000
    assert cfg.training.epochs == 20
    assert cfg.training.filters == 16
    assert cfg.evaluation.snr_grid == [0.0, 10.0, 20.0]
    assert set(DESK_PROFILE) >= {"dataset.train", "training.epochs", "training.filters", "evaluation.snr_grid"}


def test_desk_scale_overrides_from_file():
    cfg = parse_config("[desk_scale]\ntraining.epochs = 3\n")
    assert cfg.training.epochs == 100
    assert apply_desk_scale(cfg).training.epochs == 3


def test_auto_and_lists():
    cfg = parse_config("[scenario]\navg_path_power = 0.25\n[evaluation]\nsnr_grid = 5; 7.5\n")
    assert cfg.scenario.avg_path_power == 0.25
    assert cfg.evaluation.snr_grid == [5.0, 7.5]
    assert parse_config("[scenario]\navg_path_power = auto\n").scenario.avg_path_power is None


def test_bad_value_reports_line_and_field():
    with pytest.raises(ConfigError, match=r"line 3: \[training\] epochs"):
        parse_config("[training]\nseed = 1\nepochs = many\n")


@pytest.mark.parametrize(
    "text,match",
    [
        ("[nonsense]\na = 1\n", "unknown section"),
        ("[training]\nwarp = 9\n", "unknown field"),
        ("[training]\nlayer_count = 2\n", "layer_count"),
        ("[evaluation]\nsnr_grid =\n", "snr_grid"),
        ("[scenario]\nnum_clusters = 3\n", "num_clusters"),
        ("[dataset]\ntrain = 0\n", "dataset sizes"),
        ("[evaluation]\nmodel_mode = both\n", "model_mode"),
        ("no section header\n", "malformed"),
    ],
)
def test_invalid_configs(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "absent.cfg")


def test_batch_clipped_to_training_set(tiny_cfg):
    tiny_cfg.training.batch_size = 1000
    assert tiny_cfg.train_batch_size() == tiny_cfg.dataset.train

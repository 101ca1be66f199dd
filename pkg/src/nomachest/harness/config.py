"""Experiment configuration: dataclasses plus an INI-style ``.cfg`` reader/writer.

Every default below is the full-size setting. ``DESK_PROFILE``
holds the reduced settings used by the acceptance runs (``--desk-scale``).
"""

import configparser
import dataclasses
import hashlib
import io
import typing
from dataclasses import dataclass, field
from pathlib import Path

from ..channel import ArrayGeometry, ChannelConfig
from ..errors import ConfigError
from ..measurement import PilotConfig


@dataclass
class ScenarioConfig:
    n_t: int = 32
    n_r: int = 16
    num_clusters: int = 8
    rf_chains_tx: int = 2  # metadata
    rf_chains_rx: int = 2  # metadata
    num_paths: int = 3
    avg_path_power: typing.Optional[float] = None  # None / "auto" -> 1/num_paths
    spacing_over_wavelength: float = 0.5
    carrier_frequency: float = 28e9  # metadata
    max_delay: float = 100e-9

    def channel_config(self):
        return ChannelConfig(
            geometry_tx=ArrayGeometry(self.n_t, self.spacing_over_wavelength),
            geometry_rx=ArrayGeometry(self.n_r, self.spacing_over_wavelength),
            num_paths=self.num_paths,
            avg_path_power=self.avg_path_power,
            carrier_frequency=self.carrier_frequency,
            max_delay=self.max_delay,
        )


@dataclass
class PilotSection:
    power_scaling: float = 0.5
    m_r: int = 2
    m_t: int = 32
    noise_variance: float = 1.0

    def pilot_config(self, snr_db):
        return PilotConfig.from_snr_db(
            snr_db, noise_variance=self.noise_variance, power_scaling=self.power_scaling, m_r=self.m_r, m_t=self.m_t
        )


@dataclass
class EvaluationSection:
    snr_grid: typing.List[float] = field(default_factory=lambda: [0.0, 5.0, 10.0, 15.0, 20.0])
    model_mode: str = "per_snr"  # per_snr | mixed
    mmse_loading: float = 1e-6


@dataclass
class DatasetSection:
    train: int = 8100
    validation: int = 900
    test: int = 1900


@dataclass
class TrainingSection:
    epochs: int = 100
    learning_rate: float = 3e-4
    batch_size: int = 128
    layer_count: int = 6
    filters: int = 64
    seed: int = 0
    output_init: str = "zero"  # glorot | zero (output conv only)


@dataclass
class SweepSection:
    snr_db: float = 15.0
    epochs: int = 20
    learning_rates: typing.List[float] = field(default_factory=lambda: [3e-2, 3e-3, 3e-4, 3e-5])
    layer_counts: typing.List[int] = field(default_factory=lambda: [3, 4, 5, 6, 7])


@dataclass
class ExperimentConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    pilot: PilotSection = field(default_factory=PilotSection)
    evaluation: EvaluationSection = field(default_factory=EvaluationSection)
    dataset: DatasetSection = field(default_factory=DatasetSection)
    training: TrainingSection = field(default_factory=TrainingSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    # raw "section.key = value" lines from a [desk_scale] block; not dumped
    desk_overrides: dict = field(default_factory=dict, repr=False, compare=False)

    def validate(self):
        s = self.scenario
        if min(s.n_t, s.n_r, s.num_paths) < 1:
            raise ConfigError("scenario counts must be positive")
        if s.n_r % 2 or s.num_clusters != s.n_r // 2:
            raise ConfigError(f"scenario.num_clusters must equal n_r/2 (n_r={s.n_r}, num_clusters={s.num_clusters})")
        if not 1 <= self.pilot.m_t <= s.n_t:
            raise ConfigError(f"pilot.m_t must be in [1, {s.n_t}]")
        if not 1 <= self.pilot.m_r <= 2:
            raise ConfigError("pilot.m_r must be 1 or 2 (two receive rows per cluster)")
        if not self.evaluation.snr_grid:
            raise ConfigError("evaluation.snr_grid must not be empty")
        if self.evaluation.model_mode not in ("per_snr", "mixed"):
            raise ConfigError("evaluation.model_mode must be 'per_snr' or 'mixed'")
        d = self.dataset
        if min(d.train, d.validation, d.test) < 1:
            raise ConfigError("dataset sizes must be positive")
        t = self.training
        if min(t.epochs, t.batch_size, t.filters) < 1 or t.learning_rate <= 0:
            raise ConfigError("training counts and learning rate must be positive")
        if t.layer_count < 3:
            raise ConfigError("training.layer_count must be >= 3")
        if t.output_init not in ("glorot", "zero"):
            raise ConfigError("training.output_init must be 'glorot' or 'zero'")
        return self

    def train_batch_size(self):
        """Batch size clipped to the training-set size."""
        return min(self.training.batch_size, self.dataset.train)

    def to_text(self):
        return dump_config(self)

    def digest(self):
        return hashlib.sha256(self.to_text().encode()).hexdigest()


SECTIONS = ["scenario", "pilot", "evaluation", "dataset", "training", "sweep"]

DESK_PROFILE = {
    "dataset.train": 2000,
    "dataset.validation": 200,
    "dataset.test": 500,
    "training.epochs": 20,
    "training.filters": 16,
    "training.batch_size": 32,
    "evaluation.snr_grid": [0.0, 10.0, 20.0],
}


def _format(value):
    if value is None:
        return "auto"
    if isinstance(value, list):
        return ", ".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _hints(cls):
    return typing.get_type_hints(cls)


def _coerce(raw, hint, where):
    raw = raw.strip()
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    try:
        if origin is typing.Union and type(None) in args:
            if raw.lower() in ("auto", "none", ""):
                return None
            inner = next(a for a in args if a is not type(None))
            return _coerce(raw, inner, where)
        if origin in (list, typing.List):
            (inner,) = args
            return [_coerce(item, inner, where) for item in raw.replace(";", ",").split(",") if item.strip()]
        if hint is int:
            return int(raw)
        if hint is float:
            return float(raw)
        if hint is str:
            return raw
    except (ValueError, StopIteration) as exc:
        raise ConfigError(f"{where}: cannot parse {raw!r} as {getattr(hint, '__name__', hint)}") from exc
    raise ConfigError(f"{where}: unsupported field type {hint}")


def _line_of(text, section, key):
    current = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith("[") and stripped.endswith("]"):
            current = stripped[1:-1].strip()
        elif current == section and stripped.split("=", 1)[0].strip() == key:
            return lineno
    return None


def set_value(cfg, dotted, value, text=None):
    """Set ``section.key`` on ``cfg``; strings are coerced to the field type."""
    try:
        section, key = dotted.split(".", 1)
    except ValueError:
        raise ConfigError(f"expected 'section.key', got {dotted!r}") from None
    if section not in SECTIONS:
        raise ConfigError(f"unknown section [{section}]")
    obj = getattr(cfg, section)
    hints = _hints(type(obj))
    if key not in hints:
        where = f"[{section}] {key}"
        if text is not None and (ln := _line_of(text, section, key)):
            where = f"line {ln}: {where}"
        raise ConfigError(f"{where}: unknown field")
    if isinstance(value, str):
        where = f"[{section}] {key}"
        if text is not None and (ln := _line_of(text, section, key)):
            where = f"line {ln}: {where}"
        value = _coerce(value, hints[key], where)
    setattr(obj, key, value)


def parse_config(text):
    """Parse ``.cfg`` text. Unknown sections/keys and bad values raise :class:`ConfigError`."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    cfg = ExperimentConfig()
    for section in parser.sections():
        if section == "desk_scale":
            continue
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in parser.items(section):
            set_value(cfg, f"{section}.{key}", raw, text)
    if parser.has_section("desk_scale"):
        cfg.desk_overrides = dict(parser.items("desk_scale"))
    return cfg.validate()


def load_config(path):
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(path.read_text())


def apply_desk_scale(cfg):
    """Apply the reduced acceptance profile, then any ``[desk_scale]`` overrides from the file."""
    for dotted, value in DESK_PROFILE.items():
        set_value(cfg, dotted, value)
    for dotted, raw in getattr(cfg, "desk_overrides", {}).items():
        set_value(cfg, dotted, raw)
    return cfg.validate()


def dump_config(cfg):
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    for section in SECTIONS:
        obj = getattr(cfg, section)
        parser[section] = {f.name: _format(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()

from .config import DESK_PROFILE, ExperimentConfig, apply_desk_scale, dump_config, load_config, parse_config
from .dataset import Dataset, generate_dataset, read_dataset, split_rng, write_dataset
from .experiments import run_fig3, run_fig4, run_fig5
from .metrics import MetricsTable, nmse, per_sample_nmse

"""Command-line entry points: generate | train | evaluate | fig3 | fig4 | fig5 | gradcheck | rerun.

Every command except ``gradcheck`` and ``rerun`` reads one ``.cfg`` file.
Each writes its outputs plus ``resolved.cfg`` (the configuration actually
used) and ``manifest.txt`` to ``--out``. ``rerun`` replays a manifest.
"""

import argparse
import logging
import sys
from pathlib import Path

from .. import __version__
from ..cnn.checkpoint import load_checkpoint, save_checkpoint
from ..cnn.gradcheck import run_suite
from ..errors import ConfigError, FormatError, InvalidArchitectureError, InvalidDimensionError
from . import experiments as ex
from .config import apply_desk_scale, load_config, parse_config
from .dataset import read_dataset, write_dataset
from .metrics import MetricsTable
from .svg import write_chart

log = logging.getLogger("nomachest")

MANIFEST = "manifest.txt"
RESOLVED = "resolved.cfg"


class CliError(Exception):
    """User-facing failure; printed without a traceback."""


# -- manifest ---------------------------------------------------------------


def write_manifest(out, command, config, seed, jobs, outputs, inputs=None):
    lines = {
        "command": command,
        "seed": seed,
        "jobs": jobs,
        "config_file": RESOLVED,
        "config_sha256": config.digest(),
        "code_version": __version__,
        "model_mode": config.evaluation.model_mode,
        "outputs": ", ".join(outputs),
    }
    # directories of saved datasets/checkpoints the run consumed
    for k, v in (inputs or {}).items():
        if v is not None:
            lines[k] = str(Path(v).resolve())
    (out / RESOLVED).write_text(config.to_text())
    (out / MANIFEST).write_text("".join(f"{k} = {v}\n" for k, v in lines.items()))


def read_manifest(path):
    path = Path(path)
    if not path.is_file():
        raise CliError(f"manifest not found: {path}")
    entries = {}
    for line in path.read_text().splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            entries[k.strip()] = v.strip()
    for key in ("command", "seed", "config_file", "config_sha256"):
        if key not in entries:
            raise CliError(f"{path}: manifest lacks '{key}'")
    return entries


# -- helpers ----------------------------------------------------------------


def _resolve(args):
    """Load and validate the configuration before anything touches ``--out``."""
    config = load_config(args.config)
    if args.desk_scale:
        config = apply_desk_scale(config)
    seed = config.training.seed if args.seed is None else args.seed
    return config, seed


def _outdir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dataset_name(split, tag):
    return f"{split}_{tag}.ndst"


def _model_name(tag):
    return f"model_{tag}.nchk"


def _check_dims(ds, config, path):
    want = (config.scenario.n_r, config.scenario.n_t)
    if tuple(ds.dims) != want:
        raise InvalidDimensionError(f"{path}: dataset is {ds.dims[0]}x{ds.dims[1]}, config expects {want[0]}x{want[1]}")
    if ds.config_hash != bytes.fromhex(config.digest()):
        log.warning("%s was generated from a different configuration", path)


def _load_models(config, model_dir):
    models = {}
    for tag, _, _ in ex.snr_points(config):
        path = Path(model_dir) / _model_name(tag)
        if not path.is_file():
            raise CliError(f"missing checkpoint for '{tag}': expected {path}")
        models[tag] = load_checkpoint(path)
    return models


def _history_table(results):
    table = MetricsTable(("run", "epoch", "train_loss", "val_rmse"))
    for tag, res in results:
        for epoch, (tl, vr) in enumerate(zip(res.train_loss, res.val_rmse), start=1):
            table.add(tag, epoch, float(tl), float(vr))
    return table


def _write_fig3(out, result):
    result.table.write_csv(out / "nmse_vs_snr.csv")
    write_chart(out / "nmse_vs_snr.svg", ex.fig3_series(result.table), "NMSE vs SNR", "SNR (dB)", "NMSE (dB)")
    return ["nmse_vs_snr.csv", "nmse_vs_snr.svg"]


def _write_sweep(out, table, stem, title):
    table.write_csv(out / f"{stem}.csv")
    write_chart(out / f"{stem}.svg", table.series("run", "epoch", "rmse"), title, "epoch", "validation RMSE")
    return [f"{stem}.csv", f"{stem}.svg"]


# -- commands ---------------------------------------------------------------


def cmd_generate(args, config, seed, out):
    written = []
    for tag, stream, snr in ex.snr_points(config):
        for split, ds in ex.make_splits(config, seed, stream, snr).items():
            name = _dataset_name(split, tag)
            write_dataset(out / name, ds)
            written.append(name)
            print(f"{name}: {len(ds)} samples")
    return written


def _train_tag(config, seed, tag, stream, snr, data_dir):
    if data_dir is None:
        data = ex.make_splits(config, seed, stream, snr, ("train", "val"))
    else:
        data = {}
        for split in ("train", "val"):
            path = Path(data_dir) / _dataset_name(split, tag)
            if not path.is_file():
                raise CliError(f"missing dataset for '{tag}': expected {path}")
            data[split] = read_dataset(path)
            _check_dims(data[split], config, path)
    return ex.train_cnn(data["train"], data["val"], ex.train_config(config, seed))


def cmd_train(args, config, seed, out):
    written = []
    results = []
    for tag, stream, snr in ex.snr_points(config):
        res = _train_tag(config, seed, tag, stream, snr, args.data)
        name = _model_name(tag)
        save_checkpoint(out / name, res.best_model)
        written.append(name)
        results.append((tag, res))
        print(f"{name}: best epoch {res.best_epoch + 1}, val RMSE {min(res.val_rmse):.6g}")
    table = _history_table(results)
    table.write_csv(out / "training_history.csv")
    curves = {tag: (list(range(1, len(r.val_rmse) + 1)), r.val_rmse) for tag, r in results}
    write_chart(out / "training_history.svg", curves, "Validation RMSE", "epoch", "validation RMSE")
    return written + ["training_history.csv", "training_history.svg"]


def cmd_evaluate(args, config, seed, out):
    models = _load_models(config, args.models)
    result = ex.run_fig3(config, seed, jobs=args.jobs, models=models)
    _print_table(result.table)
    return _write_fig3(out, result)


def cmd_fig3(args, config, seed, out):
    models = _load_models(config, args.models) if args.models else None
    result = ex.run_fig3(config, seed, jobs=args.jobs, models=models)
    _print_table(result.table)
    return _write_fig3(out, result)


def cmd_fig4(args, config, seed, out):
    table = ex.run_fig4(config, seed, jobs=args.jobs)
    _print_finals(table)
    return _write_sweep(out, table, "rmse_vs_epoch_lr", f"RMSE vs epoch, SNR {config.sweep.snr_db:g} dB")


def cmd_fig5(args, config, seed, out):
    table = ex.run_fig5(config, seed, jobs=args.jobs)
    _print_finals(table)
    return _write_sweep(out, table, "rmse_vs_epoch_layers", f"RMSE vs epoch, SNR {config.sweep.snr_db:g} dB")


def _print_table(table):
    for method, snr, value in table.rows:
        print(f"{method:13s} {snr:6.1f} dB  NMSE {value:.6g}")


def _print_finals(table):
    for label in dict.fromkeys(table.column("run")):
        print(f"{label:12s} final RMSE {ex.final_rmse(table, label):.6g}")


COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "fig3": cmd_fig3,
    "fig4": cmd_fig4,
    "fig5": cmd_fig5,
}


def _inputs(args):
    return {k: getattr(args, k, None) for k in ("data", "models")}


def run_command(command, config, seed, out, jobs=1, data=None, models=None):
    """Run one configured command into ``out`` and write its manifest; returns the output names."""
    args = argparse.Namespace(jobs=jobs, data=data, models=models)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    outputs = COMMANDS[command](args, config, seed, out)
    write_manifest(out, command, config, seed, jobs, outputs, _inputs(args))
    return outputs


def cmd_gradcheck(args):
    results = run_suite(configs=args.configs, seed=args.seed or 0)
    for r in results:
        print(r.line())
    return 0 if all(r.passed for r in results) else 1


def cmd_rerun(args):
    manifest_path = Path(args.manifest)
    entries = read_manifest(manifest_path)
    if entries["command"] not in COMMANDS:
        raise CliError(f"{manifest_path}: cannot re-run command '{entries['command']}'")
    cfg_path = manifest_path.parent / entries["config_file"]
    if not cfg_path.is_file():
        raise CliError(f"configuration named by the manifest not found: {cfg_path}")
    config = parse_config(cfg_path.read_text())
    if config.digest() != entries["config_sha256"]:
        raise CliError(f"{cfg_path}: hash does not match the manifest")
    jobs = args.jobs if args.jobs is not None else 1
    run_command(
        entries["command"], config, int(entries["seed"]), args.out, jobs=jobs, data=entries.get("data"), models=entries.get("models")
    )
    return 0


# -- argument parsing -------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="nomachest", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="experiment .cfg file")
        p.add_argument("--seed", type=int, default=None, help="override training.seed")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for independent runs")
        p.add_argument("--desk-scale", action="store_true", help="apply the reduced acceptance profile")
        return p

    common(sub.add_parser("generate", help="write train/val/test .ndst datasets"))
    p = common(sub.add_parser("train", help="train one CNN per model tag and save checkpoints"))
    p.add_argument("--data", help="directory of .ndst files from 'generate' (default: generate in-run)")
    p = common(sub.add_parser("evaluate", help="NMSE vs SNR using saved checkpoints"))
    p.add_argument("--models", required=True, help="directory holding model_<tag>.nchk files")
    p = common(sub.add_parser("fig3", help="NMSE vs SNR, training in-run unless --models is given"))
    p.add_argument("--models", help="directory holding model_<tag>.nchk files")
    common(sub.add_parser("fig4", help="validation RMSE per epoch across learning rates"))
    common(sub.add_parser("fig5", help="validation RMSE per epoch across layer counts"))
    p = sub.add_parser("gradcheck", help="finite-difference check of every backward pass")
    p.add_argument("--configs", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p = sub.add_parser("rerun", help="repeat a run from its manifest.txt")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=None)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "gradcheck":
            return cmd_gradcheck(args)
        if args.command == "rerun":
            return cmd_rerun(args)
        config, seed = _resolve(args)
        out = _outdir(args)
        outputs = COMMANDS[args.command](args, config, seed, out)
        write_manifest(out, args.command, config, seed, args.jobs, outputs, _inputs(args))
        print(f"wrote {', '.join(outputs)} and {MANIFEST} to {out}")
        return 0
    except (CliError, ConfigError, FormatError, InvalidArchitectureError, InvalidDimensionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

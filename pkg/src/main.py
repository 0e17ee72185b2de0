"""Command-line entry point: dataset generation, fitting, experiments and reports."""
import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Dict, List, Optional

# Add src to path
sys.path.insert(0, str(Path(__file__).parent))

from config_manager import ConfigError, ConfigManager
from contact import decompose_twist, descend, pivot_twist
from dataset_collector import (
    class_counts,
    collect_dataset,
    format_counts,
    markers_path,
    read_dataset,
    split_dataset,
    write_dataset,
)
from episode_runner import ExperimentConfig
from estimation import ClassifierThresholds, DirectionClass
from experiment_history import SCHEMA_VERSION, SchemaError, write_results
from experiment_runner import run_experiment
from geometry import ErrorState, make_cross_section
from linear_estimator import FitError, evaluate_estimator, fit_linear_estimator, load_weights, save_weights
from report import report, report_runs
from run_manifest import RunManifest
from tactile import dump_sequence, first_slip_frame, render_sequence

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
THREADS_ENV = "TACTILE_PACK_THREADS"
LOG_FILE = "tactile_pack.log"
DATASET_FILE = "dataset.csv"
WEIGHTS_FILE = "weights.txt"


class UsageError(ValueError):
    """Bad command-line usage."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def setup_logging(level: str = "INFO", out_dir: Optional[Path] = None) -> None:
    """Configure the root logger once per invocation."""
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(out_dir / LOG_FILE))
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=handlers,
        force=True,
    )


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="flat section.key = value config file (or .json)")
    common.add_argument("--seed", type=int, help="master seed (experiment.seed)")
    common.add_argument("--out", default="runs/latest", help="output directory")
    common.add_argument("--threads", type=int, help=f"worker threads (fallback: ${THREADS_ENV})")
    common.add_argument("--estimator", choices=["oracle", "noisy", "linear"])
    common.add_argument("--weights", help="linear estimator weights file")
    common.add_argument("--episodes", type=int, help="sampled episodes per shape")
    common.add_argument("--shape", help="catalog shape name(s), comma separated")
    common.add_argument("--log-level", default="INFO")

    parser = _Parser(prog="tactile-pack", description="Tactile-feedback dense packing simulation")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("datagen", parents=[common], help="collect a labeled tactile dataset")

    fit = sub.add_parser("fit", parents=[common], help="fit the linear estimator on a dataset")
    fit.add_argument("dataset", help="dataset file written by datagen")
    fit.add_argument("--weights-out", help=f"weights output path (default: <out>/{WEIGHTS_FILE})")
    fit.add_argument("--reg-lambda", type=float, help="L2 strength (fit.reg_lambda)")

    sub.add_parser("experiment", parents=[common], help="run Monte Carlo probe-correct episodes")

    rep = sub.add_parser("report", parents=[common], help="merge run directories into one table")
    rep.add_argument("run_dirs", nargs="+")

    dump = sub.add_parser("dump", parents=[common], help="write the tactile imprint of one error state")
    dump.add_argument("--dx", type=float, required=True)
    dump.add_argument("--dtheta", type=float, required=True)
    return parser


def config_overrides(args: argparse.Namespace) -> Dict:
    """Command-line flags as config keys."""
    threads = args.threads
    if threads is None and os.environ.get(THREADS_ENV):
        try:
            threads = int(os.environ[THREADS_ENV])
        except ValueError:
            raise ConfigError(f"{THREADS_ENV}: expected an integer, got {os.environ[THREADS_ENV]!r}") from None
    overrides = {
        "experiment.seed": args.seed,
        "experiment.threads": threads,
        "experiment.episodes": args.episodes,
        "estimator.kind": args.estimator,
        "estimator.weights": args.weights,
        "experiment.shapes": args.shape,
    }
    if getattr(args, "reg_lambda", None) is not None:
        overrides["fit.reg_lambda"] = args.reg_lambda
    return overrides


def shape_configs(cm: ConfigManager) -> List[ExperimentConfig]:
    return [ExperimentConfig.from_config(cm, name) for name in cm.shape_names()]


def cmd_datagen(cm: ConfigManager, out_dir: str) -> Path:
    """Collect blocked contacts for every configured shape into one dataset file."""
    manifest = RunManifest("datagen", out_dir, cm.snapshot(), cm["experiment.seed"], SCHEMA_VERSION)
    samples = []
    for cfg in shape_configs(cm):
        samples.extend(collect_dataset(
            cfg,
            cm["dataset.samples_per_shape"],
            cm["dataset.max_attempts_factor"],
            cm["dataset.double_pure_rotation"],
        ))
    markers = cm["dataset.store_markers"]
    path = write_dataset(samples, str(Path(out_dir) / DATASET_FILE), cm["experiment.seed"], markers)
    manifest.add_output("dataset", path)
    if markers:
        manifest.add_output("markers", markers_path(path))
    manifest.save()

    counts = class_counts(samples)
    print(f"dataset: {path} ({len(samples)} samples)")
    print(f"class counts: {format_counts(counts)}")
    return path


def cmd_fit(cm: ConfigManager, dataset_path: str, weights_path: str) -> Dict:
    """Fit on a deterministic split, save weights, print held-out metrics."""
    _, samples = read_dataset(dataset_path)
    train, test = split_dataset(samples, cm["fit.holdout_fraction"], cm["experiment.seed"])
    if not train:
        raise FitError(f"{dataset_path}: no training samples after the split")
    if len({s.class_label for s in train}) < 2:
        raise FitError(f"{dataset_path}: a single direction class; nothing to discriminate")

    estimator = fit_linear_estimator(
        [s.as_training_row() for s in train], cm["fit.reg_lambda"], cm["fit.max_iter"]
    )
    path = save_weights(estimator, weights_path)
    thresholds = ClassifierThresholds(**cm.section("classifier"))
    metrics = evaluate_estimator(estimator, [s.as_training_row() for s in (test or train)], thresholds)

    out_dir = Path(weights_path).parent
    manifest = RunManifest("fit", str(out_dir), cm.snapshot(), cm["experiment.seed"], SCHEMA_VERSION)
    manifest.add_output("weights", path)
    manifest.save()

    print(f"weights: {path}")
    print(f"held-out samples: {metrics['samples']} (train {len(train)})")
    print(f"direction accuracy: {metrics['direction_accuracy']:.4f}")
    print(f"magnitude MAE: x {metrics['mae_x']:.3f} mm, theta {metrics['mae_theta']:.3f} deg")
    labels = [DirectionClass(i).label for i in range(1, len(metrics["confusion"]) + 1)]
    print("confusion (rows = true class): " + " ".join(f"{label:>5}" for label in labels))
    for label, row in zip(labels, metrics["confusion"]):
        print(f"  {label:>5} " + " ".join(f"{int(n):5d}" for n in row))
    return metrics


def cmd_experiment(cm: ConfigManager, out_dir: str) -> Dict[str, str]:
    """Run every configured shape and write results, a table and the manifest."""
    linear = None
    if cm["estimator.kind"] == "linear":
        weights = cm["estimator.weights"]
        if not weights:
            raise ConfigError("estimator.kind = linear needs estimator.weights (or --weights)")
        linear = load_weights(weights)

    manifest = RunManifest("experiment", out_dir, cm.snapshot(), cm["experiment.seed"], SCHEMA_VERSION)
    summaries = [run_experiment(cfg, cm["experiment.threads"], linear) for cfg in shape_configs(cm)]
    outputs = write_results(summaries, out_dir)
    outputs.update(report(summaries, out_dir))
    for name, path in outputs.items():
        manifest.add_output(name, path)
    manifest.save()

    print(Path(outputs["report"]).read_text(), end="")
    return outputs


def cmd_report(cm: ConfigManager, run_dirs: List[str], out_dir: str) -> Dict[str, str]:
    """Merge run directories into one table; the manifest lists the merged runs."""
    manifest = RunManifest(
        "report", out_dir, {"run_dirs": [str(d) for d in run_dirs]}, cm["experiment.seed"], SCHEMA_VERSION
    )
    outputs = report_runs(run_dirs, out_dir)
    for name, path in outputs.items():
        manifest.add_output(name, path)
    manifest.save()
    print(Path(outputs["report"]).read_text(), end="")
    return outputs


def cmd_dump(cm: ConfigManager, error: ErrorState, out_dir: str) -> Optional[Path]:
    """Tactile imprint of one error state on the first configured shape."""
    cfg = ExperimentConfig.from_config(cm, cm.shape_names()[0])
    event = descend(make_cross_section(cfg.shape, cfg.vertex_count), error, cfg.environment)
    if not event.blocked:
        print(f"({error.dx}, {error.dtheta}) fits the gap for {cfg.shape.name}; nothing to dump")
        return None
    twist = pivot_twist(event, cfg.descent_per_frame, cfg.frames, cfg.min_lever)
    seq = render_sequence(decompose_twist(twist, event), twist, cfg.layout, cfg.noise_sigma, cfg.seed)
    path = dump_sequence(seq, str(Path(out_dir) / "dump"), prefix=cfg.shape.name)
    print(f"{event.side.value} contact, slip frame {first_slip_frame(seq, cfg.tau_slip)}: {path}")
    return path


def _error_kind(error: Exception) -> str:
    if isinstance(error, (ConfigError, UsageError)):
        return "config" if isinstance(error, ConfigError) else "usage"
    if isinstance(error, FileNotFoundError):
        return "not_found"
    if isinstance(error, SchemaError):
        return "schema"
    if isinstance(error, FitError):
        return "fit"
    return "runtime"


def main(argv: Optional[List[str]] = None) -> int:
    """Run one command; returns the process exit code."""
    try:
        args = build_parser().parse_args(argv)
        out_dir = Path(args.out)
        setup_logging(args.log_level, out_dir)
        logger.info(f"🚀 tactile-pack {args.command} -> {out_dir}")

        cm = ConfigManager(args.config, overrides=config_overrides(args))
        if args.command == "datagen":
            cmd_datagen(cm, str(out_dir))
        elif args.command == "fit":
            cmd_fit(cm, args.dataset, args.weights_out or str(out_dir / WEIGHTS_FILE))
        elif args.command == "experiment":
            cmd_experiment(cm, str(out_dir))
        elif args.command == "report":
            cmd_report(cm, args.run_dirs, str(out_dir))
        elif args.command == "dump":
            cmd_dump(cm, ErrorState(args.dx, args.dtheta), str(out_dir))

        logger.info(f"✅ {args.command} finished")
        return EXIT_OK
    except (ConfigError, UsageError) as e:
        print(f"error: {_error_kind(e)}: {e}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as e:
        logger.debug("Command failed", exc_info=True)
        print(f"error: {_error_kind(e)}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

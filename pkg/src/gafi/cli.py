"""Command-line entry points: fit-generator, run-gafi, ablate, real-accuracy.

Configuration is a single JSON file validated against a strict schema:
unknown keys are hard errors, since a silently ignored typo in a sweep grid
would invalidate an experiment. All emitted files are written atomically
(temp + rename). Exit codes: 0 success, 1 pipeline/runtime failure,
2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .__about__ import __version__
from .data import Dataset, SplitSpec, load_csv, make_blobs, make_rings, split
from .errors import ConfigError, GafiError
from .evaluation import CasConfig, real_accuracy
from .filtering import GenerationQuota
from .models import (
    MlpKind,
    TrainingBudget,
    checkpoint_fingerprint,
    fit_classifier,
    save_checkpoint,
)
from .pipeline import (
    EvalContext,
    GeneratorRecipe,
    PipelineOptions,
    ablate_expansion,
    ablate_filtering,
    ablate_recycle,
    run_gafi,
)
from .seeding import derive_seed
from .synthesis import NoisePolicy

logger = logging.getLogger(__name__)

TECHNIQUES = ("filtering", "recycle", "expansion")


# ---------------------------------------------------------------------------
# configuration schema
# ---------------------------------------------------------------------------

DEFAULT_CONFIG = {
    "dataset": {
        "kind": "rings",
        "classes": 2,
        "per_class": 2000,
        "radii": [1.0, 2.0],
        "noise": 0.15,
        "train_fraction": 0.75,
        "split_seed": 7,
    },
    "generator": {"kind": "gmm", "components_per_class": 1, "iterations": 10,
                  "latent_dim": 4, "hidden_width": 32, "epochs": 30},
    "classifier": {"kind": "mlp", "hidden_width": 32, "init_scale": 6.0},
    "full_budget": {"epochs": 100, "batch_size": 64, "learning_rate": 0.1,
                    "decay_epochs": [80, 90], "decay_factor": 0.1,
                    "weight_decay": 0.0, "momentum": 0.9},
    "fast_budget_scale": 0.4,
    "noise_grid": [1.0, 2.0, 0.05],
    "threshold_grid": [0.0, 0.9, 0.1],
    "recycle_periods": ["static", 10, 5, 1],
    "k_list": [1],
    "checkpoint_stride": 5,
    "fast_repeats": 1,
    "accurate_repeats": 3,
    "max_attempt_factor": 200,
    "seed": 0,
    "jobs": 1,
}

_DATASET_KEYS = {
    "rings": {"kind", "classes", "per_class", "radii", "noise",
              "train_fraction", "split_seed"},
    "blobs": {"kind", "classes", "per_class", "centers", "spreads",
              "train_fraction", "split_seed"},
    "csv": {"kind", "path", "num_classes", "feature_dim",
            "train_fraction", "split_seed"},
}


def _check_keys(section: dict, allowed: set[str], path: str) -> None:
    for key in section:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}: unknown key")


def _merge(defaults: dict, overrides: dict, path: str) -> dict:
    merged = dict(defaults)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value, f"{path}.{key}")
        else:
            merged[key] = value
    return merged


def load_config(path: str | None) -> dict:
    """Load, merge with defaults, and validate a run configuration."""
    overrides: dict = {}
    if path is not None:
        try:
            overrides = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
        if not isinstance(overrides, dict):
            raise ConfigError("config root must be a JSON object")

    _check_keys(overrides, set(DEFAULT_CONFIG), "config")
    dataset_over = overrides.get("dataset", {})
    kind = dataset_over.get("kind", DEFAULT_CONFIG["dataset"]["kind"])
    if kind not in _DATASET_KEYS:
        raise ConfigError(f"config.dataset.kind: unknown dataset kind {kind!r}")
    _check_keys(dataset_over, _DATASET_KEYS[kind], "config.dataset")
    _check_keys(overrides.get("generator", {}), set(DEFAULT_CONFIG["generator"]),
                "config.generator")
    _check_keys(overrides.get("classifier", {}), set(DEFAULT_CONFIG["classifier"]),
                "config.classifier")
    _check_keys(overrides.get("full_budget", {}), set(DEFAULT_CONFIG["full_budget"]),
                "config.full_budget")

    config = _merge(DEFAULT_CONFIG, overrides, "config")
    if kind != "rings":
        # Replace the default rings section wholesale so stale keys cannot leak.
        config["dataset"] = _merge({"kind": kind, "train_fraction": 0.75, "split_seed": 7},
                                   dataset_over, "config.dataset")
    return config


def build_datasets(config: dict) -> tuple[Dataset, Dataset]:
    """Construct the configured dataset and return its stratified split."""
    ds = config["dataset"]
    kind = ds["kind"]
    data_seed = derive_seed(int(config["seed"]), "dataset")
    if kind == "rings":
        full = make_rings(classes=int(ds["classes"]), per_class=int(ds["per_class"]),
                          radii=ds["radii"], noise=float(ds["noise"]), seed=data_seed)
    elif kind == "blobs":
        full = make_blobs(classes=int(ds["classes"]), per_class=int(ds["per_class"]),
                          centers=ds["centers"], spreads=ds["spreads"], seed=data_seed)
    else:
        full = load_csv(ds["path"], int(ds["num_classes"]), int(ds["feature_dim"]))
    return split(full, SplitSpec(train_fraction=float(ds["train_fraction"]),
                                 seed=int(ds["split_seed"])))


def _budget_from(config: dict) -> TrainingBudget:
    b = config["full_budget"]
    return TrainingBudget(
        epochs=int(b["epochs"]), batch_size=int(b["batch_size"]),
        learning_rate=float(b["learning_rate"]),
        decay_epochs=tuple(int(e) for e in b["decay_epochs"]),
        decay_factor=float(b["decay_factor"]),
        weight_decay=float(b["weight_decay"]), momentum=float(b["momentum"]))


def _classifier_kind(config: dict):
    spec = config["classifier"]
    if spec["kind"] == "softmax":
        return "softmax"
    if spec["kind"] == "mlp":
        return MlpKind(hidden_width=int(spec["hidden_width"]),
                       init_scale=float(spec["init_scale"]))
    raise ConfigError(f"config.classifier.kind: unknown kind {spec['kind']!r}")


def _recipe_from(config: dict) -> GeneratorRecipe:
    g = config["generator"]
    return GeneratorRecipe(
        kind=g["kind"], components_per_class=int(g["components_per_class"]),
        iterations=int(g["iterations"]), latent_dim=int(g["latent_dim"]),
        hidden_width=int(g["hidden_width"]), epochs=int(g["epochs"]))


def _grid3(values, path: str) -> tuple[float, float, float]:
    if not isinstance(values, (list, tuple)) or len(values) != 3:
        raise ConfigError(f"{path}: expected [start, stop, step]")
    return (float(values[0]), float(values[1]), float(values[2]))


def _options_from(config: dict, jobs: int) -> PipelineOptions:
    return PipelineOptions(
        classifier_kind=_classifier_kind(config),
        full_budget=_budget_from(config),
        fast_budget_scale=float(config["fast_budget_scale"]),
        checkpoint_stride=int(config["checkpoint_stride"]),
        noise=NoisePolicy(grid=_grid3(config["noise_grid"], "config.noise_grid")),
        filter_grid=_grid3(config["threshold_grid"], "config.threshold_grid"),
        fast_repeats=int(config["fast_repeats"]),
        accurate_repeats=int(config["accurate_repeats"]),
        max_attempt_factor=int(config["max_attempt_factor"]),
        jobs=jobs)


# ---------------------------------------------------------------------------
# file emission
# ---------------------------------------------------------------------------

def write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _result_cells(result, repeats: int) -> list[str]:
    if result is None:
        return [""] * (1 + repeats)
    return [repr(result.cas_mean)] + [repr(v) for v in result.cas_per_seed]


def write_curve_csv(path: Path, rows: list[tuple[str, object]], repeats: int) -> None:
    """Rows are (label, CasResult-or-None); failed points keep their row with
    empty measurement cells."""
    header = ["value", "cas_mean"] + [f"cas_seed_{r}" for r in range(repeats)]
    lines = [",".join(header)]
    for label, result in rows:
        lines.append(",".join([label] + _result_cells(result, repeats)))
    write_atomic(path, "\n".join(lines) + "\n")


def _sweep_rows(curve) -> list[tuple[str, object]]:
    return [(p.label, p.result) for p in curve.points]


def _pct(x: float) -> str:
    return f"{100.0 * x:.2f}%"


def write_summary(path: Path, report) -> None:
    lines = [
        f"real accuracy       : {_pct(report.real_accuracy.cas_mean)}",
        f"synthetic baseline  : {_pct(report.baseline.cas_mean)}",
        f"gap before          : {_pct(report.gap_before)}",
    ]
    for k in sorted(report.ensembles):
        lines.append(f"gafi CAS (K={k})      : {_pct(report.ensembles[k].cas_mean)}")
        lines.append(f"gap after (K={k})     : {_pct(report.gap_after[k])}")
    write_atomic(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_fit_generator(config: dict, out_dir: Path) -> int:
    """Train the configured generator; write one checkpoint file per epoch
    plus a manifest listing epochs and fingerprints."""
    train, _ = build_datasets(config)
    recipe = _recipe_from(config)
    seed = derive_seed(int(config["seed"]), "generator", 0)
    checkpoints = recipe.train(train, seed)

    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for cp in checkpoints:
        name = f"checkpoint_{cp.epoch:04d}.gafi"
        save_checkpoint(cp, out_dir / name)
        entries.append({"epoch": cp.epoch, "file": name,
                        "fingerprint": checkpoint_fingerprint(cp)})
    manifest = {"version": __version__, "model_kind": recipe.kind, "seed": seed,
                "num_checkpoints": len(checkpoints), "checkpoints": entries}
    write_atomic(out_dir / "manifest.json",
                 json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    logger.info("wrote %d checkpoints and manifest to %s", len(checkpoints), out_dir)
    return 0


def cmd_run_gafi(config: dict, out_dir: Path, jobs: int) -> int:
    """Full pipeline run; emits report.json, per-sweep curve CSVs, and the
    gap summary."""
    train, test = build_datasets(config)
    options = _options_from(config, jobs)
    report = run_gafi(train, test, _recipe_from(config),
                      [int(k) for k in config["k_list"]], int(config["seed"]),
                      options, resolved_config=config)

    out_dir.mkdir(parents=True, exist_ok=True)
    write_atomic(out_dir / "report.json",
                 json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    for rec in report.repetitions:
        suffix = "" if rec.index == 0 else f"_rep{rec.index}"
        for curve in (rec.checkpoint_curve, rec.stddev_curve, rec.threshold_curve):
            write_curve_csv(out_dir / f"curve_{curve.axis}{suffix}.csv",
                            _sweep_rows(curve), options.fast_repeats)
    write_summary(out_dir / "summary.txt", report)
    logger.info("report written to %s", out_dir / "report.json")
    print((out_dir / "summary.txt").read_text(encoding="utf-8"), end="")
    return 0


def _ablation_context(config: dict, jobs: int):
    train, test = build_datasets(config)
    options = _options_from(config, jobs)
    base_seed = int(config["seed"])
    recipe = _recipe_from(config)
    checkpoints = recipe.train(train, derive_seed(base_seed, "generator", 0))
    oracle = fit_classifier(options.classifier_kind, train, options.full_budget,
                            derive_seed(base_seed, "oracle"))
    ctx = EvalContext(
        classifier_kind=options.classifier_kind, full_budget=options.full_budget,
        fast_budget=options.fast_budget(), oracle=oracle,
        quota=GenerationQuota.from_dataset(train, options.max_attempt_factor),
        real_test=test, base_seed=derive_seed(base_seed, "ablate"),
        fast_repeats=options.fast_repeats,
        accurate_repeats=options.accurate_repeats, jobs=jobs)
    return checkpoints[-1], ctx, options


def cmd_ablate(config: dict, technique: str, out_dir: Path, jobs: int) -> int:
    """Single-technique curve(s) holding every other setting at baseline."""
    final_cp, ctx, options = _ablation_context(config, jobs)
    out_dir.mkdir(parents=True, exist_ok=True)
    repeats = options.accurate_repeats
    if technique == "filtering":
        points = ablate_filtering(final_cp, ctx, grid=options.filter_grid)
        write_curve_csv(out_dir / "curve_filtering.csv",
                        [(p.label, p.result) for p in points], repeats)
    elif technique == "recycle":
        points = ablate_recycle(final_cp, ctx,
                                periods=tuple(config["recycle_periods"]))
        write_curve_csv(out_dir / "curve_recycle.csv",
                        [(p.label, p.result) for p in points], repeats)
    elif technique == "expansion":
        curves = ablate_expansion(final_cp, ctx, noise=options.noise)
        for name, points in curves.items():
            write_curve_csv(out_dir / f"curve_expansion_{name}.csv",
                            [(p.label, p.result) for p in points], repeats)
    else:
        raise ConfigError(f"unknown ablation technique {technique!r}")
    logger.info("ablation curves written to %s", out_dir)
    return 0


def cmd_real_accuracy(config: dict, out_dir: Path) -> int:
    """Reference accuracy of the classifier trained on real data."""
    train, test = build_datasets(config)
    options = _options_from(config, jobs=1)
    base_seed = int(config["seed"])
    result = real_accuracy(train, test, CasConfig(
        classifier_kind=options.classifier_kind, budget=options.full_budget,
        seeds=tuple(derive_seed(base_seed, "real", r)
                    for r in range(options.accurate_repeats))))
    out_dir.mkdir(parents=True, exist_ok=True)
    write_atomic(out_dir / "real_accuracy.json",
                 json.dumps(result.to_dict(), indent=2, sort_keys=True) + "\n")
    print(f"real accuracy: {_pct(result.cas_mean)}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_common(parser: argparse.ArgumentParser, jobs: bool = True) -> None:
    parser.add_argument("--config", type=str, default=None,
                        help="path to a JSON run configuration")
    parser.add_argument("--out", type=str, required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    if jobs:
        parser.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                            help="worker processes for sweep evaluation")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gafi",
        description="Optimize a conditional generative model as a synthetic "
                    "training-data source, scored by classification accuracy "
                    "on held-out real data.")
    parser.add_argument("--version", action="version", version=f"gafi {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit-generator", help="train a generator, saving every checkpoint")
    _add_common(p, jobs=False)

    p = sub.add_parser("run-gafi", help="run the complete optimization pipeline")
    _add_common(p)

    p = sub.add_parser("ablate", help="sweep one technique with the rest at baseline")
    p.add_argument("--technique", choices=TECHNIQUES, required=True)
    _add_common(p)

    p = sub.add_parser("real-accuracy", help="real-data reference accuracy")
    _add_common(p, jobs=False)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config)
        if args.seed is not None:
            config["seed"] = int(args.seed)
        out_dir = Path(args.out)
        if args.command == "fit-generator":
            return cmd_fit_generator(config, out_dir)
        if args.command == "run-gafi":
            return cmd_run_gafi(config, out_dir, int(args.jobs))
        if args.command == "ablate":
            return cmd_ablate(config, args.technique, out_dir, int(args.jobs))
        if args.command == "real-accuracy":
            return cmd_real_accuracy(config, out_dir)
        parser.error(f"unknown command {args.command}")
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (GafiError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

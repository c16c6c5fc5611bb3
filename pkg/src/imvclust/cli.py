"""Command-line surface: dataset synthesis, training, evaluation, sweeps,
ablations, embedding export and the mean-fill baseline.

Exit codes: 0 success, 2 argument or configuration error, 3 I/O or data
error, 4 numeric failure. All CSV output is deterministic for identical
arguments and seeds.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .clustering import ClusteringReport, evaluate
from .datamodel import (SynthConfig, apply_missing_mask, load_dataset,
                        mean_fill, normalize, save_dataset, synth_generate)
from .errors import ArgumentError, DataError, FormatError, NumericError
from .losses import LossWeights
from .training import (TrainConfig, fill_latents, load_model, run_pipeline,
                       save_model)

HISTORY_HEADER = "step,epoch,loss_total,loss_cc,loss_rec,loss_pre,loss_disc,loss_gen"
_HISTORY_KEYS = ("loss_total", "loss_cc", "loss_rec", "loss_pre", "loss_disc", "loss_gen")

# keys accepted in a JSON run-config file; anything else is rejected
_CONFIG_KEYS = {
    "dataset", "out", "k", "mr", "normalize", "nmi_average",
    "epochs", "batch_size", "learning_rate", "adam_beta1", "adam_beta2",
    "alpha", "beta", "gamma", "momentum", "latent_dim", "prediction_dim",
    "seed", "fill_mode", "generator_mode", "disc_steps_per_gen_step",
    "prediction_terms", "include_cc", "include_adversarial",
    "gen_reconstruction_weight", "ae_hidden", "head_hidden", "disc_hidden",
}

_TRAIN_KEYS = {
    "epochs", "batch_size", "learning_rate", "adam_beta1", "adam_beta2",
    "alpha", "beta", "gamma", "momentum", "latent_dim", "prediction_dim",
    "seed", "fill_mode", "generator_mode", "disc_steps_per_gen_step",
    "prediction_terms", "include_cc", "include_adversarial",
    "gen_reconstruction_weight", "ae_hidden", "head_hidden", "disc_hidden",
}

_SWEEP_DOMAINS = {
    "mr": (0.0, 1.0),
    "momentum": (0.0, 1.0),
    "alpha": (0.0, float("inf")),
    "beta": (0.0, float("inf")),
}


def _load_config_file(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise FormatError(f"invalid config file {path}: {e}") from e
    if not isinstance(raw, dict):
        raise FormatError(f"config file {path} must hold a JSON object")
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ArgumentError(f"unknown config keys: {sorted(unknown)}")
    return raw


def _merged_settings(args) -> dict:
    settings = {}
    if getattr(args, "config", None):
        settings.update(_load_config_file(args.config))
    overrides = {
        "seed": getattr(args, "seed", None),
        "mr": getattr(args, "mr", None),
        "k": getattr(args, "k", None),
        "epochs": getattr(args, "epochs", None),
        "batch_size": getattr(args, "batch_size", None),
        "learning_rate": getattr(args, "learning_rate", None),
        "alpha": getattr(args, "alpha", None),
        "beta": getattr(args, "beta", None),
        "gamma": getattr(args, "gamma", None),
        "momentum": getattr(args, "momentum", None),
        "latent_dim": getattr(args, "latent_dim", None),
        "prediction_dim": getattr(args, "prediction_dim", None),
        "fill_mode": getattr(args, "fill_mode", None),
        "generator_mode": getattr(args, "generator_mode", None),
        "normalize": getattr(args, "normalize", None),
    }
    settings.update({k: v for k, v in overrides.items() if v is not None})
    return settings


def _train_config(settings: dict) -> TrainConfig:
    payload = {k: v for k, v in settings.items() if k in _TRAIN_KEYS}
    return TrainConfig.from_dict(payload)


def _prepare_dataset(args, settings):
    """Load, optionally mask, and normalize the dataset for one run."""
    ds = load_dataset(args.data)
    mr = settings.get("mr")
    if mr is not None:
        mr = float(mr)
        ds = apply_missing_mask(ds, mr, int(settings.get("seed", 0)))
    mode = settings.get("normalize", "minmax")
    ds, stats = normalize(ds, mode)
    return ds, stats


def _write_history_csv(path: Path, histories: dict) -> None:
    lines = [HISTORY_HEADER]
    for step in sorted(histories):
        for epoch, record in enumerate(histories[step], start=1):
            cells = [step, str(epoch)]
            for key in _HISTORY_KEYS:
                value = record.get(key)
                cells.append("" if value is None else f"{value:.9g}")
            lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n")


def _write_reports_csv(path: Path, reports) -> None:
    lines = [ClusteringReport.CSV_HEADER]
    lines += [r.csv_row() for r in reports]
    path.write_text("\n".join(lines) + "\n")


def _parse_float_list(text: str) -> list:
    try:
        return [float(tok) for tok in text.split(",") if tok != ""]
    except ValueError as e:
        raise ArgumentError(f"expected a comma-separated number list, got {text!r}") from e


def _parse_int_list(text: str) -> list:
    try:
        return [int(tok) for tok in text.split(",") if tok != ""]
    except ValueError as e:
        raise ArgumentError(f"expected a comma-separated integer list, got {text!r}") from e


def cmd_synth(args) -> int:
    dims = tuple(_parse_int_list(args.view_dims))
    cfg = SynthConfig(
        clusters=args.clusters,
        instances=args.instances,
        latent_dim=args.latent_dim,
        view_dims=dims,
        separation=args.separation,
        noise=args.noise,
        seed=args.seed if args.seed is not None else 0,
    )
    ds = synth_generate(cfg, name=args.name)
    out = Path(args.out)
    save_dataset(ds, out)
    print(out)
    return 0


def cmd_train(args) -> int:
    settings = _merged_settings(args)
    cfg = _train_config(settings)
    ds, stats = _prepare_dataset(args, settings)
    result = run_pipeline(ds, cfg, norm_stats=stats)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_model(result.model, out / "checkpoint")
    _write_history_csv(out / "history.csv", result.model.histories)
    if result.report is not None:
        _write_reports_csv(out / "metrics.csv", [result.report])
        print(result.report.csv_row())
    else:
        print("trained without labels; no metrics written", file=sys.stderr)
    print(out / "checkpoint")
    return 0


def cmd_eval(args) -> int:
    model = load_model(args.checkpoint)
    ds = load_dataset(args.data)
    if ds.labels is None:
        raise DataError("evaluation needs a labeled dataset")
    if model.norm_stats is not None:
        ds = model.norm_stats.transform(ds)
    fused = fill_latents(model, ds)
    seed = args.seed if args.seed is not None else model.config.seed
    digest = model.config.digest()
    report = evaluate(
        fused, ds.labels, k=args.k or ds.n_clusters, seed=seed,
        dataset=ds.name, mr=ds.missing_rate, method="imvclust",
        run_id=f"{ds.name}-eval-s{seed}-{digest}", cfg_hash=digest,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_reports_csv(out / "metrics.csv", [report])
    print(report.csv_row())
    return 0


def cmd_baseline(args) -> int:
    settings = _merged_settings(args)
    ds, _ = _prepare_dataset(args, settings)
    if ds.labels is None and settings.get("k") is None:
        raise ArgumentError("baseline needs labels or an explicit --k")
    filled = mean_fill(ds)
    fused = np.concatenate(filled.views, axis=1)
    seed = int(settings.get("seed", 0))
    k = int(settings["k"]) if settings.get("k") is not None else ds.n_clusters
    report = evaluate(
        fused, ds.labels, k=k, seed=seed, dataset=ds.name, mr=ds.missing_rate,
        method="meanfill", run_id=f"{ds.name}-meanfill-s{seed}",
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_reports_csv(out / "metrics.csv", [report])
    print(report.csv_row())
    return 0


def cmd_sweep(args) -> int:
    settings = _merged_settings(args)
    values = _parse_float_list(args.values)
    seeds = _parse_int_list(args.seeds) if args.seeds else [int(settings.get("seed", 0))]
    lo, hi = _SWEEP_DOMAINS[args.param]
    for value in values:
        if not lo <= value <= hi:
            raise ArgumentError(
                f"value {value} for {args.param} outside [{lo}, {hi}]"
            )
    base_ds = load_dataset(args.data)
    mode = settings.get("normalize", "minmax")
    reports = []
    for value in values:
        cell_reports = []
        for seed in seeds:
            cell = dict(settings)
            cell["seed"] = seed
            if args.param == "mr":
                cell["mr"] = value
            elif args.param == "momentum":
                cell["momentum"] = value
            else:
                cell[args.param] = value
            cfg = _train_config(cell)
            ds = base_ds
            if cell.get("mr") is not None:
                ds = apply_missing_mask(base_ds, float(cell["mr"]), seed)
            ds, stats = normalize(ds, mode)
            rid = f"{ds.name}-{args.param}={value:g}-s{seed}"
            result = run_pipeline(ds, cfg, norm_stats=stats, run_id=rid)
            if result.report is None:
                raise DataError("sweep needs a labeled dataset")
            cell_reports.append(result.report)
            print(result.report.csv_row())
        mean = ClusteringReport(
            acc=float(np.mean([r.acc for r in cell_reports])),
            nmi=float(np.mean([r.nmi for r in cell_reports])),
            ari=float(np.mean([r.ari for r in cell_reports])),
            k=cell_reports[0].k,
            seed=-1,
            dataset=cell_reports[0].dataset,
            mr=cell_reports[0].mr if args.param != "mr" else value,
            method="imvclust",
            run_id=f"{base_ds.name}-{args.param}={value:g}-mean",
        )
        reports.extend(cell_reports)
        reports.append(mean)
        print(mean.csv_row())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_reports_csv(out / "sweep.csv", reports)
    return 0


# ablation rows: which loss families stay on, and whether the adversarial
# completion stage (steps 2-3) runs at all
ABLATION_ROWS = (
    ("(1)", "rec", True, False, False, False),
    ("(2)", "pre", False, True, False, False),
    ("(3)", "cc", False, False, True, False),
    ("(4)", "rec+pre", True, True, False, False),
    ("(5)", "rec+cc", True, False, True, False),
    ("(6)", "cc+pre", False, True, True, False),
    ("(7)", "rec+cc+pre", True, True, True, False),
    ("(8)", "rec+cc+pre+adv", True, True, True, True),
)


def ablation_config(base: TrainConfig, rec: bool, pre: bool, cc: bool,
                    adv: bool) -> TrainConfig:
    """Config for one ablation row: excluded loss families get zero weight.

    Variants without the adversarial stage never train the decoders as
    cross-view generators, so they complete missing latents through the
    prediction route instead, which is the completion mechanism those
    variants do train.
    """
    weights = LossWeights(
        alpha=base.weights.alpha if rec else 0.0,
        beta=base.weights.beta if pre else 0.0,
        gamma=base.weights.gamma,
    )
    fill = base.fill_mode if adv else "prediction"
    return replace(base, weights=weights, include_cc=cc, include_adversarial=adv,
                   fill_mode=fill)


def cmd_ablate(args) -> int:
    settings = _merged_settings(args)
    base_cfg = _train_config(settings)
    ds, stats = _prepare_dataset(args, settings)
    if ds.labels is None:
        raise DataError("ablation needs a labeled dataset")
    lines = ["config,losses," + ClusteringReport.CSV_HEADER]
    for label, losses, rec, pre, cc, adv in ABLATION_ROWS:
        cfg = ablation_config(base_cfg, rec, pre, cc, adv)
        rid = f"{ds.name}-ablate{label}-s{cfg.seed}"
        result = run_pipeline(ds, cfg, norm_stats=stats, run_id=rid)
        lines.append(f"{label},{losses},{result.report.csv_row()}")
        print(lines[-1])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "ablation.csv").write_text("\n".join(lines) + "\n")
    return 0


def cmd_export_embeddings(args) -> int:
    model = load_model(args.checkpoint)
    ds = load_dataset(args.data)
    if model.norm_stats is not None:
        ds = model.norm_stats.transform(ds)
    fused = fill_latents(model, ds)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "embeddings.bin").write_bytes(
        np.ascontiguousarray(fused, dtype="<f4").tobytes()
    )
    meta = {
        "num_instances": int(fused.shape[0]),
        "dim": int(fused.shape[1]),
        "dtype": "f32",
        "layout": "row-major",
        "dataset": ds.name,
    }
    (out / "embeddings.json").write_text(json.dumps(meta, indent=2) + "\n")
    if ds.labels is not None:
        (out / "labels.txt").write_text(
            "\n".join(str(int(t)) for t in ds.labels) + "\n"
        )
    print(out / "embeddings.bin")
    return 0


def _add_common(parser, with_data=True):
    parser.add_argument("--config", help="JSON run-config file")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--deterministic", action="store_true",
                        help="accepted for compatibility; runs are always seeded")
    if with_data:
        parser.add_argument("--data", required=True, help="dataset directory")


def _add_train_overrides(parser):
    parser.add_argument("--mr", type=float, default=None,
                        help="apply this missing rate to a complete dataset")
    parser.add_argument("--epochs", type=lambda t: tuple(_parse_int_list(t)),
                        default=None, help="three comma-separated epoch counts")
    parser.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    parser.add_argument("--learning-rate", dest="learning_rate", type=float, default=None)
    parser.add_argument("--alpha", type=float, default=None)
    parser.add_argument("--beta", type=float, default=None)
    parser.add_argument("--gamma", type=float, default=None)
    parser.add_argument("--momentum", type=float, default=None)
    parser.add_argument("--latent-dim", dest="latent_dim", type=int, default=None)
    parser.add_argument("--prediction-dim", dest="prediction_dim", type=int, default=None)
    parser.add_argument("--fill-mode", dest="fill_mode",
                        choices=("prediction", "gan"), default=None)
    parser.add_argument("--generator-mode", dest="generator_mode",
                        choices=("nonsaturating", "minimax"), default=None)
    parser.add_argument("--normalize", choices=("minmax", "none"), default=None)
    parser.add_argument("--k", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="imvclust",
        description="Incomplete multi-view clustering pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset directory")
    _add_common(p, with_data=False)
    p.add_argument("--clusters", type=int, default=4)
    p.add_argument("--instances", type=int, default=2000)
    p.add_argument("--latent-dim", dest="latent_dim", type=int, default=8)
    p.add_argument("--view-dims", dest="view_dims", default="20,30")
    p.add_argument("--separation", type=float, default=6.0)
    p.add_argument("--noise", type=float, default=1.0)
    p.add_argument("--name", default="synthetic")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="run the training pipeline")
    _add_common(p)
    _add_train_overrides(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--k", type=int, default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="sweep one parameter over values x seeds")
    _add_common(p)
    _add_train_overrides(p)
    p.add_argument("--param", required=True, choices=sorted(_SWEEP_DOMAINS))
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--seeds", default=None, help="comma-separated seeds")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("ablate", help="run the 8 loss-term combinations")
    _add_common(p)
    _add_train_overrides(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("export-embeddings",
                       help="write fused representations for external tools")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(func=cmd_export_embeddings)

    p = sub.add_parser("baseline", help="mean-fill + k-means reference")
    _add_common(p)
    p.add_argument("--mr", type=float, default=None)
    p.add_argument("--normalize", choices=("minmax", "none"), default=None)
    p.add_argument("--k", type=int, default=None)
    p.set_defaults(func=cmd_baseline)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else 0
    try:
        return args.func(args)
    except ArgumentError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except NumericError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return 4
    except (DataError, FormatError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface: synth / train / infer / eval / ablate.

Configuration resolution is three-layered: built-in defaults, then a JSON
config file (``--config``), then explicit flags; each field remembers where
its value came from. The fully resolved config (and its provenance) is
embedded in every artifact the commands write — model checkpoints, cluster
files, metrics files, and training logs — so any artifact can be fed back
via ``--config`` to reproduce the run.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from .clustering import infer, load_clusters, save_clusters
from .data import load_trajectories, save_trajectories
from .metrics import id_metrics, save_metrics
from .network import ModelConfig, load_checkpoint
from .synth import SynthConfig, generate_scenario
from .training import TrainConfig, train

FIELD_DEFAULTS = {
    # shared
    "seed": 0,
    "dim": 64,
    # training
    "batch_size_ids": 100,
    "epochs": 100,
    "base_lr": 0.01,
    "warmup_epochs": 5,
    "decay_epoch": 50,
    "decay_factor": 0.1,
    "temporal_threshold": None,
    "use_class_weights": True,
    "use_fpr": True,
    "descriptor_noise_sigma": 0.0,
    # synthesis
    "identities": 16,
    "cameras": 4,
    "presence_prob": 1.0,
    "intra_noise_sigma": 0.25,
    "inter_class_min_sep": 1.2,
    "frames_per_camera": 1000,
    "unsync_max_offset": 0,
}


@dataclass(frozen=True)
class RunConfig:
    """Resolved field values plus where each one came from."""

    values: dict
    provenance: dict  # field -> "default" | "config-file" | "flag"

    def __getitem__(self, key):
        return self.values[key]

    def echo(self) -> dict:
        """The dict embedded into every artifact for reproducibility."""
        return {"config": dict(self.values), "provenance": dict(self.provenance)}

    def with_value(self, name: str, value, origin: str) -> "RunConfig":
        values = dict(self.values)
        provenance = dict(self.provenance)
        values[name] = value
        provenance[name] = origin
        return RunConfig(values, provenance)


def _flag_values(args) -> dict:
    out = {}
    for name in FIELD_DEFAULTS:
        value = getattr(args, name, None)
        if value is not None:
            out[name] = value
    if getattr(args, "no_weighting", None):
        out["use_class_weights"] = False
    if getattr(args, "no_fpr", None):
        out["use_fpr"] = False
    return out


def resolve_config(args) -> RunConfig:
    file_values = {}
    config_path = getattr(args, "config", None)
    if config_path:
        with open(config_path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise ValueError(f"{config_path}: config must be a JSON object")
        if isinstance(raw.get("config"), dict):
            raw = raw["config"]  # accept a previously written artifact directly
        unknown = sorted(set(raw) - set(FIELD_DEFAULTS))
        if unknown:
            raise ValueError(f"{config_path}: unknown config field {unknown[0]!r}")
        file_values = raw

    flags = _flag_values(args)
    values, provenance = {}, {}
    for name, default in FIELD_DEFAULTS.items():
        if name in flags:
            values[name], provenance[name] = flags[name], "flag"
        elif name in file_values:
            values[name], provenance[name] = file_values[name], "config-file"
        else:
            values[name], provenance[name] = default, "default"
    return RunConfig(values, provenance)


def _resolve_dim(cfg: RunConfig, dataset) -> RunConfig:
    """Descriptor dimension: the data file knows best unless a flag insists.

    Returns the config with the dimension actually used written back, so the
    value embedded into artifacts reproduces the run when fed to --config.
    """
    if cfg.provenance["dim"] == "default":
        return cfg.with_value("dim", dataset.dim, "data")
    if cfg["dim"] != dataset.dim:
        raise ValueError(
            f"field 'dim': requested {cfg['dim']} but data has dimension {dataset.dim}"
        )
    return cfg


def _train_config(cfg: RunConfig, dim: int, **overrides) -> TrainConfig:
    kwargs = dict(
        batch_size_ids=cfg["batch_size_ids"],
        epochs=cfg["epochs"],
        base_lr=cfg["base_lr"],
        warmup_epochs=cfg["warmup_epochs"],
        decay_epoch=cfg["decay_epoch"],
        decay_factor=cfg["decay_factor"],
        seed=cfg["seed"],
        temporal_threshold=cfg["temporal_threshold"],
        dim=dim,
        use_class_weights=cfg["use_class_weights"],
        use_fpr=cfg["use_fpr"],
        descriptor_noise_sigma=cfg["descriptor_noise_sigma"],
    )
    kwargs.update(overrides)
    return TrainConfig(**kwargs)


def cmd_synth(args) -> int:
    cfg = resolve_config(args)
    scenario = generate_scenario(
        SynthConfig(
            identities=cfg["identities"],
            cameras=cfg["cameras"],
            dim=cfg["dim"],
            presence_prob=cfg["presence_prob"],
            intra_noise_sigma=cfg["intra_noise_sigma"],
            inter_class_min_sep=cfg["inter_class_min_sep"],
            frames_per_camera=cfg["frames_per_camera"],
            unsync_max_offset=cfg["unsync_max_offset"],
            seed=cfg["seed"],
        )
    )
    save_trajectories(scenario, args.out)
    print(
        f"wrote {len(scenario)} trajectories "
        f"({cfg['identities']} identities, {cfg['cameras']} cameras) to {args.out}"
    )
    return 0


def cmd_train(args) -> int:
    dataset = load_trajectories(args.data)
    cfg = _resolve_dim(resolve_config(args), dataset)
    dim = cfg["dim"]
    log_path = args.log or str(Path(args.out).with_suffix(".log.jsonl"))
    params, log = train(
        dataset,
        _train_config(cfg, dim),
        model_config=ModelConfig(dim=dim),
        log_path=log_path,
        log_header=cfg.echo(),
        checkpoint_path=args.out,
        checkpoint_extra=cfg.echo(),
    )
    print(
        f"trained {params.parameter_count()} parameters for {cfg['epochs']} epochs; "
        f"final loss {log[-1]['loss_total']:.6f}; model -> {args.out}, log -> {log_path}"
    )
    return 0


def cmd_infer(args) -> int:
    dataset = load_trajectories(args.data)
    model = load_checkpoint(args.model)
    cfg = resolve_config(args)
    result = infer(model, dataset, temporal_threshold=cfg["temporal_threshold"])
    save_clusters(result, args.out, extra=cfg.echo())
    mc = len(result.multi_camera_clusters)
    print(f"{len(result.clusters)} clusters ({mc} multi-camera) -> {args.out}")
    return 0


def cmd_eval(args) -> int:
    ground_truth = load_trajectories(args.data)
    predicted = load_clusters(args.clusters)
    cfg = resolve_config(args)
    report = id_metrics(predicted, ground_truth)
    print(report.format_table())
    if args.out:
        save_metrics(report, args.out, extra=cfg.echo())
        print(f"metrics -> {args.out}")
    return 0


_LOSS_VARIANTS = {
    "plain": (False, False),
    "weight": (True, False),
    "fpr": (False, True),
    "weight+fpr": (True, True),
}


def _parse_ablate_values(param: str, raw: str) -> list:
    items = [v.strip() for v in raw.split(",") if v.strip()]
    if not items:
        raise ValueError("field 'values': empty sweep")
    if param == "batch_size":
        return [int(v) for v in items]
    if param == "temporal_threshold":
        return [None if v.lower() == "none" else int(v) for v in items]
    bad = [v for v in items if v not in _LOSS_VARIANTS]
    if bad:
        raise ValueError(
            f"field 'values': unknown loss variant {bad[0]!r} "
            f"(choose from {sorted(_LOSS_VARIANTS)})"
        )
    return items


def cmd_ablate(args) -> int:
    dataset = load_trajectories(args.data)
    eval_set = load_trajectories(args.eval_data) if args.eval_data else dataset
    cfg = _resolve_dim(resolve_config(args), dataset)
    dim = cfg["dim"]
    values = _parse_ablate_values(args.param, args.values)

    rows = []
    for value in values:
        if args.param == "batch_size":
            tc = _train_config(cfg, dim, batch_size_ids=value)
        elif args.param == "temporal_threshold":
            tc = _train_config(cfg, dim, temporal_threshold=value)
        else:
            weights, fpr = _LOSS_VARIANTS[value]
            tc = _train_config(cfg, dim, use_class_weights=weights, use_fpr=fpr)
        params, _ = train(dataset, tc, model_config=ModelConfig(dim=dim))
        result = infer(params, eval_set, temporal_threshold=tc.temporal_threshold)
        report = id_metrics(result, eval_set)
        rows.append(
            {
                "value": "none" if value is None else str(value),
                "idp": report.idp,
                "idr": report.idr,
                "idf1": report.idf1,
                "idtp": report.idtp,
                "degenerate": report.degenerate,
            }
        )

    header = f"{args.param:<20} {'IDP':>8} {'IDR':>8} {'IDF1':>8}"
    print(header)
    print("-" * len(header))
    for row in rows:
        if row["degenerate"]:
            print(f"{row['value']:<20} {'-':>8} {'-':>8} {'-':>8}")
        else:
            print(
                f"{row['value']:<20} {row['idp']:>8.2f} {row['idr']:>8.2f} "
                f"{row['idf1']:>8.2f}"
            )
    if args.out:
        payload = {"param": args.param, "rows": rows}
        payload.update(cfg.echo())
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
        print(f"sweep -> {args.out}")
    return 0


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--seed", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--batch-size", type=int, dest="batch_size_ids")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float, dest="base_lr")
    p.add_argument("--warmup-epochs", type=int)
    p.add_argument("--decay-epoch", type=int)
    p.add_argument("--decay-factor", type=float)
    p.add_argument("--temporal-threshold", type=int)
    p.add_argument("--no-weighting", action="store_true", default=None,
                   help="drop the per-batch class weights from the loss")
    p.add_argument("--no-fpr", action="store_true", default=None,
                   help="drop the false-positive-rate term from the loss")
    p.add_argument("--descriptor-noise-sigma", type=float)
    p.add_argument("--identities", type=int)
    p.add_argument("--cameras", type=int)
    p.add_argument("--presence-prob", type=float)
    p.add_argument("--intra-noise-sigma", type=float)
    p.add_argument("--inter-class-min-sep", type=float)
    p.add_argument("--frames-per-camera", type=int)
    p.add_argument("--unsync-max-offset", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trajlink",
        description="Multi-camera trajectory association: synthesize, train, "
                    "infer, evaluate, ablate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a labeled synthetic scenario")
    p.add_argument("--out", required=True, help="output trajectory JSONL")
    _add_config_flags(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train the association model")
    p.add_argument("--data", required=True, help="labeled trajectory JSONL")
    p.add_argument("--out", required=True, help="output model checkpoint JSON")
    p.add_argument("--log", help="training log JSONL (default: <out>.log.jsonl)")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="cluster trajectories with a trained model")
    p.add_argument("--data", required=True, help="trajectory JSONL")
    p.add_argument("--model", required=True, help="model checkpoint JSON")
    p.add_argument("--out", required=True, help="output clusters JSON")
    _add_config_flags(p)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="score predicted clusters against labels")
    p.add_argument("--data", required=True, help="labeled trajectory JSONL")
    p.add_argument("--clusters", required=True, help="predicted clusters JSON")
    p.add_argument("--out", help="optional metrics JSON")
    _add_config_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="sweep one parameter, one metrics row each")
    p.add_argument("--data", required=True, help="labeled training JSONL")
    p.add_argument("--eval-data", help="held-out labeled JSONL (default: --data)")
    p.add_argument("--param", required=True,
                   choices=("batch_size", "temporal_threshold", "loss"))
    p.add_argument("--values", required=True,
                   help="comma-separated sweep values (loss: plain, weight, fpr, weight+fpr)")
    p.add_argument("--out", help="optional sweep JSON")
    _add_config_flags(p)
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: missing file: {exc.filename}", file=sys.stderr)
        return 1
    except (ValueError, TypeError, OSError, RuntimeError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

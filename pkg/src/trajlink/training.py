"""Identity-level batch sampling, LR scheduling, and the SGD training loop.

Each epoch shuffles the labeled identities into batches of ``batch_size_ids``
(the last, possibly short, batch is kept), builds the cross-camera graph over
each batch's trajectories, and takes one plain SGD step per batch. The
learning rate ramps linearly from zero over the warmup epochs, holds at the
base rate, and is multiplied by ``decay_factor`` once ``decay_epoch`` full
epochs have elapsed. All randomness (initialization, shuffling, optional
descriptor noise) flows from the single config seed.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

import numpy as np

from .data import TrajectorySet
from .graph import AssociationGraph, build_graph
from .loss import total_loss
from .network import (
    MlpBlock,
    ModelConfig,
    ModelParameters,
    backward,
    forward,
    init_parameters,
    save_checkpoint,
)


@dataclass(frozen=True)
class TrainConfig:
    batch_size_ids: int = 100
    epochs: int = 100
    base_lr: float = 0.01
    warmup_epochs: int = 5
    decay_epoch: int = 50
    decay_factor: float = 0.1
    seed: int = 0
    temporal_threshold: int | None = None
    dim: int = 2048
    use_class_weights: bool = True
    use_fpr: bool = True
    descriptor_noise_sigma: float = 0.0  # optional augmentation, expected noise norm

    def __post_init__(self):
        if self.batch_size_ids < 2:
            raise ValueError("batch_size_ids must be >= 2")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not (self.base_lr > 0 and np.isfinite(self.base_lr)):
            raise ValueError("base_lr must be positive and finite")
        if self.warmup_epochs < 0:
            raise ValueError("warmup_epochs must be >= 0")
        if not (self.warmup_epochs < self.decay_epoch <= self.epochs):
            raise ValueError("need warmup_epochs < decay_epoch <= epochs")
        if not (self.decay_factor > 0 and np.isfinite(self.decay_factor)):
            raise ValueError("decay_factor must be positive and finite")
        if self.temporal_threshold is not None and self.temporal_threshold < 0:
            raise ValueError("temporal_threshold must be >= 0")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.descriptor_noise_sigma < 0:
            raise ValueError("descriptor_noise_sigma must be >= 0")


def lr_schedule(progress: float, config: TrainConfig) -> float:
    """Learning rate after ``progress`` (possibly fractional) epochs.

    Linear ramp 0 -> base_lr across the warmup epochs, flat base_lr until
    ``decay_epoch`` epochs have elapsed, base_lr * decay_factor afterwards.
    """
    if not (0.0 <= progress <= config.epochs):
        raise ValueError(f"progress {progress} outside [0, {config.epochs}]")
    if progress < config.warmup_epochs:
        return config.base_lr * progress / config.warmup_epochs
    if progress <= config.decay_epoch:
        return config.base_lr
    return config.base_lr * config.decay_factor


def epoch_partition(identities, batch_size_ids: int, rng: np.random.Generator):
    """Shuffle identities and split into batches; the short tail batch is kept."""
    ids = list(identities)
    order = rng.permutation(len(ids))
    shuffled = [ids[k] for k in order]
    return [
        tuple(shuffled[i : i + batch_size_ids])
        for i in range(0, len(shuffled), batch_size_ids)
    ]


def _batch_graph(
    dataset: TrajectorySet,
    identity_ids,
    temporal_threshold: int | None,
    noise_sigma: float = 0.0,
    rng: np.random.Generator | None = None,
) -> AssociationGraph:
    wanted = set(identity_ids)
    subset = dataset.subset(lambda rec: rec.identity_id in wanted)
    if noise_sigma > 0.0:
        d = subset.dim
        coord_sigma = noise_sigma / np.sqrt(d)
        records = tuple(
            dataclasses.replace(
                rec, feature=rec.feature + rng.normal(0.0, coord_sigma, size=d)
            )
            for rec in subset.records
        )
        subset = TrajectorySet(
            records=records, camera_count=subset.camera_count, dim=subset.dim
        )
    return build_graph(subset, temporal_threshold=temporal_threshold)


def sample_batch(
    dataset: TrajectorySet,
    batch_size_ids: int,
    rng: np.random.Generator,
    temporal_threshold: int | None = None,
) -> AssociationGraph:
    """One random identity-level batch graph (without-replacement draw)."""
    ids = dataset.identities
    if not ids:
        raise ValueError("dataset has no identity labels to sample from")
    k = min(batch_size_ids, len(ids))
    chosen_idx = rng.choice(len(ids), size=k, replace=False)
    return _batch_graph(dataset, [ids[i] for i in chosen_idx], temporal_threshold)


def sgd_step(params: ModelParameters, grads, lr: float) -> ModelParameters:
    """p <- p - lr * g on every weight and bias; plain SGD, functional."""
    new_blocks = {}
    for name, block in params.blocks.items():
        block_grads = grads[name]
        if len(block_grads) != len(block.weights):
            raise ValueError(f"{name}: {len(block_grads)} gradient layers for "
                             f"{len(block.weights)} parameter layers")
        weights, biases = [], []
        for w, b, (dw, db) in zip(block.weights, block.biases, block_grads):
            if dw.shape != w.shape or db.shape != b.shape:
                raise ValueError(
                    f"{name}: gradient shapes {dw.shape}/{db.shape} do not match "
                    f"parameter shapes {w.shape}/{b.shape}"
                )
            weights.append(w - lr * dw)
            biases.append(b - lr * db)
        new_blocks[name] = MlpBlock(block.specs, weights, biases)
    return ModelParameters(dim=params.dim, config=params.config, blocks=new_blocks)


def train(
    dataset: TrajectorySet,
    config: TrainConfig,
    *,
    model_config: ModelConfig | None = None,
    initial_params: ModelParameters | None = None,
    log_path=None,
    log_header: dict | None = None,
    checkpoint_path=None,
    checkpoint_every_epoch: bool = False,
    checkpoint_extra: dict | None = None,
):
    """Run the full training loop; returns (parameters, per-batch log).

    The log holds one dict per batch: {epoch (1-based), batch (0-based),
    loss_total, loss_wce, fpr_soft, fpr_hard, n0, n1, lr}; the same lines go
    to ``log_path`` as JSON Lines when given. A batch whose graph has no
    edges is logged with zero losses and skipped by the optimizer.
    """
    if not dataset.fully_labeled:
        raise ValueError("training requires identity labels on every record")
    if not dataset.identities:
        raise ValueError("dataset has no identities")

    root = np.random.SeedSequence(config.seed)
    init_ss, sample_ss, aug_ss = root.spawn(3)
    if initial_params is not None:
        if initial_params.dim != config.dim:
            raise ValueError(
                f"initial parameters dim {initial_params.dim} != config dim {config.dim}"
            )
        params = initial_params
    else:
        cfg = model_config if model_config is not None else ModelConfig(dim=config.dim)
        if cfg.dim != config.dim:
            raise ValueError(f"model config dim {cfg.dim} != train config dim {config.dim}")
        params = init_parameters(cfg, int(init_ss.generate_state(1)[0]))
    sample_rng = np.random.default_rng(sample_ss)
    aug_rng = np.random.default_rng(aug_ss)

    log: list[dict] = []
    log_fh = open(log_path, "w", encoding="utf-8") if log_path else None
    try:
        if log_fh and log_header:
            log_fh.write(json.dumps(log_header) + "\n")
        for epoch in range(1, config.epochs + 1):
            batches = epoch_partition(
                dataset.identities, config.batch_size_ids, sample_rng
            )
            num_batches = len(batches)
            for b, identity_ids in enumerate(batches):
                graph = _batch_graph(
                    dataset,
                    identity_ids,
                    config.temporal_threshold,
                    config.descriptor_noise_sigma,
                    aug_rng,
                )
                progress = (epoch - 1) + (b + 1) / num_batches
                lr = lr_schedule(progress, config)
                if graph.edge_count == 0:
                    entry = {
                        "epoch": epoch, "batch": b, "loss_total": 0.0,
                        "loss_wce": 0.0, "fpr_soft": 0.0, "fpr_hard": 0.0,
                        "n0": 0, "n1": 0, "lr": lr,
                    }
                else:
                    trace = forward(graph, params)
                    breakdown = total_loss(
                        trace.edge_probabilities,
                        graph.labels,
                        use_weighting=config.use_class_weights,
                        use_fpr=config.use_fpr,
                        logits=trace.classifier_logits,
                    )
                    if not np.isfinite(breakdown.total):
                        raise FloatingPointError(
                            f"non-finite training loss at epoch {epoch}, batch {b}"
                        )
                    grads = backward(graph, params, trace, breakdown.grad)
                    params = sgd_step(params, grads, lr)
                    n0, n1 = breakdown.counts
                    entry = {
                        "epoch": epoch,
                        "batch": b,
                        "loss_total": float(breakdown.total),
                        "loss_wce": float(breakdown.weighted_ce),
                        "fpr_soft": float(breakdown.fpr_soft),
                        "fpr_hard": float(breakdown.fpr_hard),
                        "n0": int(n0),
                        "n1": int(n1),
                        "lr": lr,
                    }
                log.append(entry)
                if log_fh:
                    log_fh.write(json.dumps(entry) + "\n")
            if checkpoint_every_epoch and checkpoint_path:
                save_checkpoint(params, checkpoint_path, extra=checkpoint_extra)
        if checkpoint_path:
            save_checkpoint(params, checkpoint_path, extra=checkpoint_extra)
    finally:
        if log_fh:
            log_fh.close()
    return params, log

"""Scikit-learn style front door for the whole pipeline.

``TrajectoryAssociator`` wraps training (``fit``), cluster prediction
(``predict`` / ``associate``) and IDF1 scoring (``score``) behind the familiar
estimator interface, so the association engine composes with sklearn
tooling (``get_params`` / ``set_params`` / ``clone``).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .clustering import GlobalTrajectories, infer
from .data import TrajectorySet
from .metrics import id_metrics
from .network import load_checkpoint
from .training import TrainConfig, train


def check_trajectory_set(X, *, require_labels=False, dim=None) -> TrajectorySet:
    """Validate an input trajectory set; raises TypeError / ValueError."""
    if not isinstance(X, TrajectorySet):
        raise TypeError(
            f"expected a TrajectorySet, got {type(X).__name__}; "
            "load one with trajlink.load_trajectories"
        )
    if require_labels and not X.fully_labeled:
        raise ValueError("every record needs an identity_id for this operation")
    if dim is not None and X.dim != dim:
        raise ValueError(f"descriptor dimension {X.dim} does not match model dim {dim}")
    return X


class TrajectoryAssociator(BaseEstimator):
    """Learn cross-camera trajectory association and predict global clusters.

    Parameters mirror the training configuration; ``fit`` trains the edge
    classifier on a labeled :class:`TrajectorySet`, ``predict`` returns a
    cluster index per record, and ``associate`` returns the full
    :class:`GlobalTrajectories` object.
    """

    def __init__(
        self,
        batch_size_ids=100,
        epochs=100,
        base_lr=0.01,
        warmup_epochs=5,
        decay_epoch=50,
        decay_factor=0.1,
        seed=0,
        temporal_threshold=None,
        dim=2048,
        use_class_weights=True,
        use_fpr=True,
        descriptor_noise_sigma=0.0,
        model_config=None,
    ):
        self.batch_size_ids = batch_size_ids
        self.epochs = epochs
        self.base_lr = base_lr
        self.warmup_epochs = warmup_epochs
        self.decay_epoch = decay_epoch
        self.decay_factor = decay_factor
        self.seed = seed
        self.temporal_threshold = temporal_threshold
        self.dim = dim
        self.use_class_weights = use_class_weights
        self.use_fpr = use_fpr
        self.descriptor_noise_sigma = descriptor_noise_sigma
        self.model_config = model_config

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            batch_size_ids=self.batch_size_ids,
            epochs=self.epochs,
            base_lr=self.base_lr,
            warmup_epochs=self.warmup_epochs,
            decay_epoch=self.decay_epoch,
            decay_factor=self.decay_factor,
            seed=self.seed,
            temporal_threshold=self.temporal_threshold,
            dim=self.dim,
            use_class_weights=self.use_class_weights,
            use_fpr=self.use_fpr,
            descriptor_noise_sigma=self.descriptor_noise_sigma,
        )

    def fit(self, X, y=None):
        """Train the edge classifier on a fully labeled trajectory set."""
        X = check_trajectory_set(X, require_labels=True, dim=self.dim)
        self.model_, self.log_ = train(
            X, self._train_config(), model_config=self.model_config
        )
        return self

    def _require_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError(
                "this TrajectoryAssociator is not fitted yet; "
                "call fit() or load_model() first"
            )

    def load_model(self, path):
        """Adopt a saved checkpoint instead of fitting."""
        self.model_ = load_checkpoint(path)
        self.dim = self.model_.dim
        return self

    def associate(self, X) -> GlobalTrajectories:
        """Cluster a trajectory set into global multi-camera trajectories."""
        self._require_fitted()
        X = check_trajectory_set(X, dim=self.model_.dim)
        return infer(self.model_, X, temporal_threshold=self.temporal_threshold)

    def predict(self, X) -> np.ndarray:
        """Global cluster index per record, aligned with ``X.records``."""
        result = self.associate(X)
        by_tid = {
            tid: cluster.global_id
            for cluster in result.clusters
            for tid in cluster.trajectory_ids
        }
        return np.asarray([by_tid[rec.trajectory_id] for rec in X.records])

    def score(self, X, y=None) -> float:
        """IDF1 of the predicted clustering against labels in X, scaled to [0, 1]."""
        X = check_trajectory_set(X, require_labels=True)
        report = id_metrics(self.associate(X), X)
        return report.idf1 / 100.0

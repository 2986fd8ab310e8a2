"""Synthetic multi-camera scenario generator.

Produces fully labeled trajectory sets with controllable difficulty: identity
centroids live on the unit sphere with a guaranteed pairwise separation, and
each sighting's descriptor is the centroid plus isotropic Gaussian noise whose
expected squared norm is ``intra_noise_sigma**2`` (per-coordinate variance
``sigma**2 / dim``). Camera clocks are desynchronized by a random per-camera
frame offset.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import TrajectoryRecord, TrajectorySet

_MAX_CENTROID_TRIES = 200_000
_MAX_PRESENCE_TRIES = 10_000


@dataclass(frozen=True)
class SynthConfig:
    identities: int = 16
    cameras: int = 4
    dim: int = 64
    presence_prob: float = 1.0
    intra_noise_sigma: float = 0.25
    inter_class_min_sep: float = 1.2
    frames_per_camera: int = 1000
    unsync_max_offset: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.identities < 1:
            raise ValueError("identities must be >= 1")
        if self.cameras < 2:
            raise ValueError("cameras must be >= 2")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if not (0.0 < self.presence_prob <= 1.0):
            raise ValueError("presence_prob must be in (0, 1]")
        if not np.isfinite(self.intra_noise_sigma) or self.intra_noise_sigma < 0:
            raise ValueError("intra_noise_sigma must be finite and >= 0")
        if not np.isfinite(self.inter_class_min_sep) or self.inter_class_min_sep <= 0:
            raise ValueError("inter_class_min_sep must be finite and > 0")
        if self.frames_per_camera < 4:
            raise ValueError("frames_per_camera must be >= 4")
        if self.unsync_max_offset < 0:
            raise ValueError("unsync_max_offset must be >= 0")


def _sample_centroids(rng: np.random.Generator, cfg: SynthConfig) -> np.ndarray:
    """Rejection-sample identity centroids on the unit sphere."""
    accepted: list[np.ndarray] = []
    tries = 0
    while len(accepted) < cfg.identities:
        if tries >= _MAX_CENTROID_TRIES:
            raise RuntimeError(
                f"could not place {cfg.identities} centroids with pairwise "
                f"separation {cfg.inter_class_min_sep} after {tries} draws; "
                "reduce identities or inter_class_min_sep"
            )
        tries += 1
        v = rng.normal(size=cfg.dim)
        v /= np.linalg.norm(v)
        if all(
            np.linalg.norm(v - u) >= cfg.inter_class_min_sep for u in accepted
        ):
            accepted.append(v)
    return np.asarray(accepted, dtype=np.float64)


def _sample_presence(rng: np.random.Generator, cfg: SynthConfig) -> np.ndarray:
    """Per-identity camera presence masks, each covering >= 2 cameras."""
    masks = np.zeros((cfg.identities, cfg.cameras), dtype=bool)
    for i in range(cfg.identities):
        for attempt in range(_MAX_PRESENCE_TRIES):
            mask = rng.random(cfg.cameras) < cfg.presence_prob
            if mask.sum() >= 2:
                masks[i] = mask
                break
        else:
            raise RuntimeError(
                "could not draw a presence mask covering >= 2 cameras; "
                "increase presence_prob"
            )
    return masks


def generate_scenario(config: SynthConfig) -> TrajectorySet:
    """Generate a fully labeled scenario; deterministic for a given seed."""
    rng = np.random.default_rng(config.seed)

    offsets = rng.integers(0, config.unsync_max_offset + 1, size=config.cameras)
    centroids = _sample_centroids(rng, config)
    presence = _sample_presence(rng, config)

    coord_sigma = config.intra_noise_sigma / np.sqrt(config.dim)
    span_min = max(1, config.frames_per_camera // 4)
    span_max = max(span_min, config.frames_per_camera // 2)

    records = []
    per_camera_counter = [0] * config.cameras
    for ident in range(config.identities):
        identity_id = f"id{ident:03d}"
        for cam in range(config.cameras):
            if not presence[ident, cam]:
                continue
            noise = rng.normal(0.0, coord_sigma, size=config.dim)
            feature = centroids[ident] + noise
            length = int(rng.integers(span_min, span_max + 1))
            start = int(rng.integers(0, config.frames_per_camera - length + 1))
            start += int(offsets[cam])
            seq = per_camera_counter[cam]
            per_camera_counter[cam] += 1
            records.append(
                TrajectoryRecord(
                    trajectory_id=f"c{cam + 1}_t{seq}",
                    camera_id=cam + 1,
                    start_frame=start,
                    end_frame=start + length - 1,
                    feature=feature,
                    identity_id=identity_id,
                )
            )
    return TrajectorySet(
        records=tuple(records), camera_count=config.cameras, dim=config.dim
    )

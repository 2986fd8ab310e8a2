"""Trajectory records and the JSON Lines dataset format.

A single-camera (SC) trajectory is the unit of input: one tracked vehicle
under one camera, summarized by a fixed-dimension appearance descriptor.
Descriptors are produced upstream (detector + SC tracker + ReID model) and
ingested here as data; no pixel-level processing happens in this package.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

DEFAULT_DIM = 2048


class DataFormatError(ValueError):
    """Raised when a trajectory file violates the JSONL schema."""


@dataclass(frozen=True)
class TrajectoryRecord:
    """One SC trajectory: camera, frame span, descriptor, optional identity."""

    trajectory_id: str
    camera_id: int
    start_frame: int
    end_frame: int
    feature: np.ndarray
    identity_id: str | None = None

    def __post_init__(self):
        feat = np.asarray(self.feature, dtype=np.float64)
        object.__setattr__(self, "feature", feat)
        if feat.ndim != 1:
            raise ValueError(
                f"trajectory {self.trajectory_id!r}: feature must be a 1-D vector"
            )
        if not np.all(np.isfinite(feat)):
            raise ValueError(
                f"trajectory {self.trajectory_id!r}: feature has non-finite entries"
            )
        if not np.any(feat):
            raise ValueError(
                f"trajectory {self.trajectory_id!r}: feature norm is zero"
            )
        if self.end_frame < self.start_frame:
            raise ValueError(
                f"trajectory {self.trajectory_id!r}: end_frame {self.end_frame} "
                f"precedes start_frame {self.start_frame}"
            )
        if self.camera_id < 1:
            raise ValueError(
                f"trajectory {self.trajectory_id!r}: camera_id must be >= 1"
            )

    @property
    def frame_count(self) -> int:
        return self.end_frame - self.start_frame + 1


@dataclass(frozen=True)
class TrajectorySet:
    """An immutable collection of SC trajectories sharing one descriptor space."""

    records: tuple[TrajectoryRecord, ...]
    camera_count: int
    dim: int

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        seen: set[str] = set()
        for rec in self.records:
            if rec.trajectory_id in seen:
                raise ValueError(f"duplicate trajectory_id {rec.trajectory_id!r}")
            seen.add(rec.trajectory_id)
            if rec.camera_id > self.camera_count:
                raise ValueError(
                    f"trajectory {rec.trajectory_id!r}: camera_id {rec.camera_id} "
                    f"exceeds camera_count {self.camera_count}"
                )
            if rec.feature.shape[0] != self.dim:
                raise ValueError(
                    f"trajectory {rec.trajectory_id!r}: feature dimension "
                    f"{rec.feature.shape[0]} != {self.dim}"
                )

    def __len__(self) -> int:
        return len(self.records)

    @property
    def identities(self) -> list[str]:
        """Distinct identity ids among labeled records, in first-seen order."""
        seen: dict[str, None] = {}
        for rec in self.records:
            if rec.identity_id is not None:
                seen.setdefault(rec.identity_id, None)
        return list(seen)

    @property
    def fully_labeled(self) -> bool:
        return all(rec.identity_id is not None for rec in self.records)

    def feature_matrix(self) -> np.ndarray:
        """Descriptors stacked row-wise, float64, shape (N, dim)."""
        return np.stack([rec.feature for rec in self.records]).astype(np.float64)

    def subset(self, predicate) -> "TrajectorySet":
        """New set with the records matching ``predicate``; camera_count kept."""
        kept = tuple(rec for rec in self.records if predicate(rec))
        return TrajectorySet(kept, camera_count=self.camera_count, dim=self.dim)


def average_descriptors(embeddings) -> np.ndarray:
    """Component-wise arithmetic mean of per-box embeddings.

    An SC trajectory yields one embedding per tracked bounding box; the
    trajectory descriptor is their mean.
    """
    if len(embeddings) == 0:
        raise ValueError("no embeddings")
    mat = np.asarray(embeddings, dtype=np.float64)
    if mat.ndim != 2:
        raise ValueError("embeddings must all share one dimension")
    if not np.all(np.isfinite(mat)):
        raise ValueError("embeddings contain non-finite entries")
    return mat.mean(axis=0)


def _parse_record(obj: dict, lineno: int, dim: int | None) -> TrajectoryRecord:
    required = ("trajectory_id", "camera_id", "start_frame", "end_frame", "feature")
    for key in required:
        if key not in obj:
            raise DataFormatError(f"line {lineno}: missing key {key!r}")
    feature = obj["feature"]
    if isinstance(feature, list) and feature and isinstance(feature[0], list):
        # Per-box embeddings for this trajectory; collapse to one descriptor.
        feature = average_descriptors(feature)
    feature = np.asarray(feature, dtype=np.float64)
    if feature.ndim != 1:
        raise DataFormatError(f"line {lineno}: feature must be a flat vector")
    if dim is not None and feature.shape[0] != dim:
        raise DataFormatError(
            f"line {lineno}: feature dimension {feature.shape[0]} != {dim}"
        )
    try:
        return TrajectoryRecord(
            trajectory_id=str(obj["trajectory_id"]),
            camera_id=int(obj["camera_id"]),
            start_frame=int(obj["start_frame"]),
            end_frame=int(obj["end_frame"]),
            feature=feature,
            identity_id=(
                str(obj["identity_id"]) if obj.get("identity_id") is not None else None
            ),
        )
    except ValueError as exc:
        raise DataFormatError(f"line {lineno}: {exc}") from exc


def load_trajectories(path) -> TrajectorySet:
    """Read a trajectory JSONL file into a validated :class:`TrajectorySet`.

    Each line is one record; an optional first-line header object
    ``{"mtmc_header": 1, "dim": D, "cameras": M}`` pins the descriptor
    dimension and camera count. Without a header, the dimension comes from
    the first record and the camera count from the maximum camera id.
    """
    records: list[TrajectoryRecord] = []
    seen_ids: set[str] = set()
    dim: int | None = None
    cameras: int | None = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"line {lineno}: malformed JSON ({exc.msg})")
            if not isinstance(obj, dict):
                raise DataFormatError(f"line {lineno}: expected a JSON object")
            if lineno == 1 and obj.get("mtmc_header") == 1:
                dim = int(obj["dim"]) if "dim" in obj else None
                cameras = int(obj["cameras"]) if "cameras" in obj else None
                continue
            rec = _parse_record(obj, lineno, dim)
            if rec.trajectory_id in seen_ids:
                raise DataFormatError(
                    f"line {lineno}: duplicate trajectory_id {rec.trajectory_id!r}"
                )
            seen_ids.add(rec.trajectory_id)
            if dim is None:
                dim = rec.feature.shape[0]
            records.append(rec)
    if not records:
        raise DataFormatError(f"{path}: no trajectory records")
    if cameras is None:
        cameras = max(rec.camera_id for rec in records)
    return TrajectorySet(tuple(records), camera_count=cameras, dim=dim)


def save_trajectories(trajectories: TrajectorySet, path) -> None:
    """Write the JSONL form of a trajectory set, header line included."""
    with open(path, "w", encoding="utf-8") as fh:
        header = {
            "mtmc_header": 1,
            "dim": trajectories.dim,
            "cameras": trajectories.camera_count,
        }
        fh.write(json.dumps(header) + "\n")
        for rec in trajectories.records:
            obj = {
                "trajectory_id": rec.trajectory_id,
                "camera_id": rec.camera_id,
                "start_frame": rec.start_frame,
                "end_frame": rec.end_frame,
                "feature": rec.feature.tolist(),
            }
            if rec.identity_id is not None:
                obj["identity_id"] = rec.identity_id
            fh.write(json.dumps(obj) + "\n")

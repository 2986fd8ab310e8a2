"""Identification precision / recall / F1 over multi-camera trajectories.

Evaluation is restricted to the multi-camera world on both sides: ground
truth identities seen by at least two cameras, and predicted clusters
spanning at least two cameras. Each SC trajectory weighs its frame count,
and predicted clusters are matched one-to-one to ground-truth identities by
the assignment that maximizes the total matched frames; matched frames are
the identification true positives.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .clustering import GlobalTrajectories
from .data import TrajectorySet


@dataclass(frozen=True)
class MetricsReport:
    idp: float  # percent
    idr: float  # percent
    idf1: float  # percent
    idtp: int  # matched frames
    total_pred_frames: int
    total_gt_frames: int
    degenerate: bool = False  # no MC trajectories on one side; metrics forced to 0

    def to_json_payload(self) -> dict:
        return {
            "idp": self.idp,
            "idr": self.idr,
            "idf1": self.idf1,
            "idtp": self.idtp,
            "pred_frames": self.total_pred_frames,
            "gt_frames": self.total_gt_frames,
            "degenerate": self.degenerate,
        }

    def format_table(self) -> str:
        rows = [
            ("IDP", f"{self.idp:.2f}"),
            ("IDR", f"{self.idr:.2f}"),
            ("IDF1", f"{self.idf1:.2f}"),
            ("IDTP frames", str(self.idtp)),
            ("pred frames", str(self.total_pred_frames)),
            ("gt frames", str(self.total_gt_frames)),
        ]
        if self.degenerate:
            rows = [(name, "-") for name, _ in rows[:3]] + rows[3:]
        width = max(len(name) for name, _ in rows)
        return "\n".join(f"{name:<{width}}  {value:>10}" for name, value in rows)


def id_metrics(
    predicted: GlobalTrajectories, ground_truth: TrajectorySet
) -> MetricsReport:
    """Compute IDP/IDR/IDF1 between predicted clusters and labeled ground truth.

    Every predicted trajectory id must exist in the ground truth, and every
    ground-truth record must carry an identity. When either side has no
    multi-camera trajectories the report is flagged degenerate and all three
    metrics are 0.
    """
    by_id = {rec.trajectory_id: rec for rec in ground_truth.records}
    for cluster in predicted.clusters:
        for tid in cluster.trajectory_ids:
            if tid not in by_id:
                raise ValueError(f"unknown trajectory_id {tid!r} in prediction")
    unlabeled = [rec.trajectory_id for rec in ground_truth.records if rec.identity_id is None]
    if unlabeled:
        raise ValueError(
            f"ground truth records without identity_id (e.g. {unlabeled[0]!r})"
        )

    # Ground-truth identities seen by >= 2 cameras.
    cams_by_identity: dict[str, set[int]] = {}
    for rec in ground_truth.records:
        cams_by_identity.setdefault(rec.identity_id, set()).add(rec.camera_id)
    mc_identities = sorted(
        ident for ident, cams in cams_by_identity.items() if len(cams) >= 2
    )
    gt_frames = {
        ident: sum(
            rec.frame_count
            for rec in ground_truth.records
            if rec.identity_id == ident
        )
        for ident in mc_identities
    }
    total_gt = sum(gt_frames.values())

    mc_clusters = predicted.multi_camera_clusters
    total_pred = sum(
        by_id[tid].frame_count for c in mc_clusters for tid in c.trajectory_ids
    )

    if not mc_clusters or not mc_identities:
        return MetricsReport(0.0, 0.0, 0.0, 0, total_pred, total_gt, degenerate=True)

    ident_index = {ident: k for k, ident in enumerate(mc_identities)}
    overlap = np.zeros((len(mc_clusters), len(mc_identities)), dtype=np.int64)
    for row, cluster in enumerate(mc_clusters):
        for tid in cluster.trajectory_ids:
            rec = by_id[tid]
            col = ident_index.get(rec.identity_id)
            if col is not None:
                overlap[row, col] += rec.frame_count

    rows, cols = linear_sum_assignment(overlap, maximize=True)
    idtp = int(overlap[rows, cols].sum())

    idp = 100.0 * idtp / total_pred if total_pred else 0.0
    idr = 100.0 * idtp / total_gt if total_gt else 0.0
    idf1 = (
        100.0 * 2.0 * idtp / (total_pred + total_gt)
        if (total_pred + total_gt)
        else 0.0
    )
    return MetricsReport(idp, idr, idf1, idtp, total_pred, total_gt)


def save_metrics(report: MetricsReport, path, extra: dict | None = None) -> None:
    payload = report.to_json_payload()
    if extra:
        payload.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)

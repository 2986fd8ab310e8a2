"""Shared builders for hand-made trajectory sets and random graphs."""

from __future__ import annotations

import numpy as np

from trajlink.data import TrajectoryRecord, TrajectorySet
from trajlink.graph import build_graph


def make_record(tid, cam, start=0, end=10, feature=None, identity=None, dim=4):
    if feature is None:
        rng = np.random.default_rng(abs(hash(tid)) % (2**32))
        feature = rng.normal(size=dim)
    return TrajectoryRecord(
        trajectory_id=tid,
        camera_id=cam,
        start_frame=start,
        end_frame=end,
        feature=np.asarray(feature, dtype=np.float64),
        identity_id=identity,
    )


def make_set(records, cameras=None, dim=None):
    records = tuple(records)
    if cameras is None:
        cameras = max(r.camera_id for r in records)
    if dim is None:
        dim = records[0].feature.shape[0]
    return TrajectorySet(records=records, camera_count=cameras, dim=dim)


def random_labeled_set(rng, max_nodes=12, max_cameras=4, dim=4):
    """A random small labeled trajectory set (>= 2 nodes)."""
    n = int(rng.integers(2, max_nodes + 1))
    cameras = int(rng.integers(2, max_cameras + 1))
    records = []
    for k in range(n):
        records.append(
            make_record(
                f"t{k}",
                int(rng.integers(1, cameras + 1)),
                start=int(rng.integers(0, 500)),
                end=int(rng.integers(500, 1000)),
                feature=rng.normal(size=dim),
                identity=f"id{int(rng.integers(0, max(2, n // 2)))}",
            )
        )
    return make_set(records, cameras=cameras, dim=dim)


def random_graph(rng, max_nodes=12, max_cameras=4, dim=4):
    return build_graph(random_labeled_set(rng, max_nodes, max_cameras, dim))

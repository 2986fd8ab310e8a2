"""Cross-camera association graph construction.

Every SC trajectory becomes a node; every pair of nodes observed by two
different cameras becomes a candidate edge. Nodes under the same camera are
never connected, because one physical vehicle cannot produce two
simultaneous trajectories in one view. Each edge carries two raw distance
features (euclidean and cosine) between the endpoint descriptors, and, when
the dataset is fully labeled, a binary same-vehicle label.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import TrajectoryRecord, TrajectorySet


def edge_raw_features(f_i: np.ndarray, f_j: np.ndarray) -> tuple[float, float]:
    """Euclidean distance and cosine distance (1 - cosine similarity)."""
    f_i = np.asarray(f_i, dtype=np.float64)
    f_j = np.asarray(f_j, dtype=np.float64)
    norm_i = np.linalg.norm(f_i)
    norm_j = np.linalg.norm(f_j)
    if norm_i == 0.0 or norm_j == 0.0:
        raise ValueError("zero-norm descriptor")
    euclidean = float(np.linalg.norm(f_i - f_j))
    cosine_distance = float(1.0 - np.dot(f_i, f_j) / (norm_i * norm_j))
    return euclidean, cosine_distance


def span_gap(start_a: int, end_a: int, start_b: int, end_b: int) -> int:
    """Frame gap between two spans; 0 when they overlap or touch."""
    if start_b > end_a:
        return start_b - end_a
    if start_a > end_b:
        return start_a - end_b
    return 0


@dataclass(frozen=True)
class AssociationGraph:
    """Immutable cross-camera graph over one trajectory set (or subset).

    ``edges`` holds node-index pairs in canonical orientation: the endpoint
    with the smaller (camera_id, trajectory_id) key comes first, and the
    edge list is sorted lexicographically by those keys. All downstream
    concatenations and reductions rely on this ordering being deterministic.
    """

    records: tuple[TrajectoryRecord, ...]
    camera_ids: np.ndarray  # (N,) int
    features: np.ndarray  # (N, D) float64
    edges: np.ndarray  # (E, 2) int node indices, canonical orientation
    edge_raw: np.ndarray  # (E, 2) float64: euclidean, cosine distance
    labels: np.ndarray | None  # (E,) uint8 in {0, 1}, or None when unlabeled
    camera_count: int

    @property
    def node_count(self) -> int:
        return len(self.records)

    @property
    def edge_count(self) -> int:
        return self.edges.shape[0]

    def neighbor_lists(self) -> list[list[tuple[int, int]]]:
        """Per node: (neighbor index, edge index) pairs, neighbors ascending."""
        incident: list[list[tuple[int, int]]] = [[] for _ in range(self.node_count)]
        for e, (i, j) in enumerate(self.edges):
            incident[i].append((int(j), e))
            incident[j].append((int(i), e))
        for lst in incident:
            lst.sort()
        return incident


def _canonical_key(rec: TrajectoryRecord) -> tuple[int, str]:
    return (rec.camera_id, rec.trajectory_id)


def build_graph(
    trajectories: TrajectorySet,
    temporal_threshold: int | None = None,
) -> AssociationGraph:
    """Build the dense inter-camera graph, optionally temporally restricted.

    With ``temporal_threshold`` t, a cross-camera pair is connected only when
    the gap between its frame spans is at most t frames (overlapping spans
    have gap 0). Labels are filled only when every record carries an
    identity: 1 when both endpoints share it, else 0.
    """
    records = trajectories.records
    if not records:
        raise ValueError("empty trajectory set")
    n = len(records)
    camera_ids = np.array([rec.camera_id for rec in records], dtype=np.int64)
    features = trajectories.feature_matrix()

    labeled = trajectories.fully_labeled

    pairs: list[tuple[tuple[int, str], tuple[int, str], int, int]] = []
    for a in range(n):
        for b in range(a + 1, n):
            if camera_ids[a] == camera_ids[b]:
                continue
            if temporal_threshold is not None:
                gap = span_gap(
                    records[a].start_frame,
                    records[a].end_frame,
                    records[b].start_frame,
                    records[b].end_frame,
                )
                if gap > temporal_threshold:
                    continue
            i, j = a, b
            if _canonical_key(records[j]) < _canonical_key(records[i]):
                i, j = j, i
            pairs.append((_canonical_key(records[i]), _canonical_key(records[j]), i, j))
    pairs.sort(key=lambda item: (item[0], item[1]))

    edges = np.array([(i, j) for _, _, i, j in pairs], dtype=np.int64).reshape(-1, 2)

    if edges.shape[0]:
        fi = features[edges[:, 0]]
        fj = features[edges[:, 1]]
        diff = fi - fj
        euclid = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        norms = np.linalg.norm(features, axis=1)
        dots = np.einsum("ij,ij->i", fi, fj)
        cosine = 1.0 - dots / (norms[edges[:, 0]] * norms[edges[:, 1]])
        edge_raw = np.stack([euclid, cosine], axis=1)
    else:
        edge_raw = np.zeros((0, 2), dtype=np.float64)

    labels = None
    if labeled:
        labels = np.zeros(edges.shape[0], dtype=np.uint8)
        for e, (i, j) in enumerate(edges):
            labels[e] = 1 if records[i].identity_id == records[j].identity_id else 0

    return AssociationGraph(
        records=records,
        camera_ids=camera_ids,
        features=features,
        edges=edges,
        edge_raw=edge_raw,
        labels=labels,
        camera_count=trajectories.camera_count,
    )

"""From edge predictions to global multi-camera trajectories.

Edges predicted more likely same-vehicle than not are kept (no tunable
threshold; exact ties are dropped as the conservative choice, since a wrong
merge is the costlier error). Connected components over the kept edges form
candidate clusters, which are then refined until every cluster holds at
most one trajectory per camera (hence at most M trajectories): the weakest
kept edge inside a violating cluster is removed and its components are
recomputed, repeating to a fixpoint.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .data import TrajectorySet
from .graph import AssociationGraph, build_graph
from .network import ModelParameters, forward


class UnionFind:
    """Disjoint sets over 0..n-1 with path compression and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return True


@dataclass
class ClusterSet:
    """A partition of the graph nodes plus the kept edges that produced it."""

    clusters: list[list[int]]  # node indices, each list sorted ascending
    assignment: np.ndarray  # (N,) cluster index per node
    kept_edges: np.ndarray  # (K,) indices into the graph's edge list
    kept_probs: np.ndarray  # (K,) class-1 probability of each kept edge


def prune_edges(predictions: np.ndarray) -> np.ndarray:
    """Indices of edges whose class-1 probability beats class 0 (ties drop)."""
    predictions = np.asarray(predictions, dtype=np.float64)
    if predictions.size == 0:
        return np.zeros(0, dtype=np.int64)
    return np.flatnonzero(predictions[:, 1] > predictions[:, 0]).astype(np.int64)


def _components(node_count: int, edge_pairs) -> list[list[int]]:
    uf = UnionFind(node_count)
    for i, j in edge_pairs:
        uf.union(int(i), int(j))
    groups: dict[int, list[int]] = {}
    for v in range(node_count):
        groups.setdefault(uf.find(v), []).append(v)
    clusters = sorted(groups.values(), key=lambda grp: grp[0])
    return clusters


def connected_components(
    graph: AssociationGraph,
    kept_edges: np.ndarray,
    kept_probs: np.ndarray,
) -> ClusterSet:
    """Undirected connected components over the kept edges.

    Clusters are numbered by their smallest contained node index.
    """
    clusters = _components(graph.node_count, graph.edges[kept_edges])
    assignment = np.zeros(graph.node_count, dtype=np.int64)
    for cid, members in enumerate(clusters):
        for v in members:
            assignment[v] = cid
    return ClusterSet(
        clusters=clusters,
        assignment=assignment,
        kept_edges=np.asarray(kept_edges, dtype=np.int64),
        kept_probs=np.asarray(kept_probs, dtype=np.float64),
    )


def _violates(members: list[int], camera_ids: np.ndarray, camera_count: int) -> bool:
    if len(members) > camera_count:
        return True
    cams = camera_ids[members]
    return len(set(cams.tolist())) != len(members)


def refine_clusters(
    graph: AssociationGraph,
    clusters: ClusterSet,
    camera_count: int | None = None,
) -> ClusterSet:
    """Enforce one-trajectory-per-camera (and so size <= M) on every cluster.

    While a cluster violates the constraint, the kept edge with the lowest
    class-1 probability inside it is removed (probability ties broken by
    canonical edge order) and the components are recomputed. The edge set
    strictly shrinks, so this terminates.
    """
    m = camera_count if camera_count is not None else graph.camera_count
    kept = list(map(int, clusters.kept_edges))
    probs = {e: float(p) for e, p in zip(kept, clusters.kept_probs)}

    while True:
        current = _components(graph.node_count, graph.edges[np.array(kept, dtype=np.int64)])
        offender = None
        for members in current:
            if _violates(members, graph.camera_ids, m):
                offender = set(members)
                break
        if offender is None:
            break
        internal = [
            e for e in kept
            if graph.edges[e, 0] in offender and graph.edges[e, 1] in offender
        ]
        weakest = min(internal, key=lambda e: (probs[e], e))
        kept.remove(weakest)

    kept_arr = np.array(sorted(kept), dtype=np.int64)
    return connected_components(graph, kept_arr, np.array([probs[e] for e in sorted(kept)]))


@dataclass(frozen=True)
class GlobalTrajectory:
    global_id: int
    trajectory_ids: tuple[str, ...]
    cameras: tuple[int, ...]
    multi_camera: bool


@dataclass
class GlobalTrajectories:
    """Inference output: every cluster, multi-camera ones flagged."""

    clusters: list[GlobalTrajectory]

    @property
    def multi_camera_clusters(self) -> list[GlobalTrajectory]:
        return [c for c in self.clusters if c.multi_camera]

    def to_json_payload(self) -> dict:
        return {
            "clusters": [
                {
                    "global_id": c.global_id,
                    "multi_camera": c.multi_camera,
                    "trajectories": list(c.trajectory_ids),
                }
                for c in self.clusters
            ]
        }


def clusters_to_trajectories(
    graph: AssociationGraph, clusters: ClusterSet
) -> GlobalTrajectories:
    out = []
    for cid, members in enumerate(clusters.clusters):
        cams = tuple(int(graph.camera_ids[v]) for v in members)
        out.append(
            GlobalTrajectory(
                global_id=cid,
                trajectory_ids=tuple(graph.records[v].trajectory_id for v in members),
                cameras=cams,
                multi_camera=len(set(cams)) >= 2,
            )
        )
    return GlobalTrajectories(out)


def infer(
    model: ModelParameters,
    trajectories: TrajectorySet,
    temporal_threshold: int | None = None,
) -> GlobalTrajectories:
    """End-to-end inference: graph, edge classification, clustering, refinement."""
    if len(trajectories) == 0:
        return GlobalTrajectories([])
    graph = build_graph(trajectories, temporal_threshold)
    trace = forward(graph, model)
    kept = prune_edges(trace.edge_probabilities)
    probs = trace.edge_probabilities[kept, 1] if kept.size else np.zeros(0)
    components = connected_components(graph, kept, probs)
    refined = refine_clusters(graph, components)
    return clusters_to_trajectories(graph, refined)


def save_clusters(result: GlobalTrajectories, path, extra: dict | None = None) -> None:
    payload = result.to_json_payload()
    if extra:
        payload.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)


def load_clusters(path) -> GlobalTrajectories:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    clusters = []
    for obj in payload["clusters"]:
        clusters.append(
            GlobalTrajectory(
                global_id=int(obj["global_id"]),
                trajectory_ids=tuple(obj["trajectories"]),
                cameras=tuple(obj.get("cameras", ())),
                multi_camera=bool(obj["multi_camera"]),
            )
        )
    return GlobalTrajectories(clusters)

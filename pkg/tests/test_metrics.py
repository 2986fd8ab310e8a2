import itertools
import json

import numpy as np
import pytest

from helpers import make_record, make_set
from trajlink.clustering import GlobalTrajectories, GlobalTrajectory
from trajlink.metrics import MetricsReport, id_metrics, save_metrics


def _rec(tid, cam, frames, ident):
    return make_record(tid, cam, start=0, end=frames - 1, identity=ident)


def _cluster(gid, records_by_tid, tids):
    cams = tuple(records_by_tid[t].camera_id for t in tids)
    return GlobalTrajectory(
        global_id=gid,
        trajectory_ids=tuple(tids),
        cameras=cams,
        multi_camera=len(set(cams)) >= 2,
    )


def _prediction(ground_truth, groups):
    by_tid = {r.trajectory_id: r for r in ground_truth.records}
    return GlobalTrajectories(
        [_cluster(k, by_tid, tids) for k, tids in enumerate(groups) if tids]
    )


def _two_identity_truth():
    records = [
        _rec("t1", 1, 100, "X"),
        _rec("t2", 2, 50, "X"),
        _rec("t3", 1, 80, "Y"),
        _rec("t4", 2, 40, "Y"),
    ]
    return make_set(records, cameras=2)


def test_perfect_prediction_scores_exactly_hundred():
    gt = _two_identity_truth()
    report = id_metrics(_prediction(gt, [["t1", "t2"], ["t3", "t4"]]), gt)
    assert report.idp == 100.0
    assert report.idr == 100.0
    assert report.idf1 == 100.0
    assert report.idtp == 270
    assert report.total_pred_frames == report.total_gt_frames == 270
    assert not report.degenerate


def test_merging_everything_into_one_cluster():
    gt = _two_identity_truth()
    report = id_metrics(_prediction(gt, [["t1", "t2", "t3", "t4"]]), gt)
    # the single cluster can be matched to only one identity: X (150 frames)
    assert report.idtp == 150
    assert report.idp == 100.0 * 150 / 270
    assert report.idr == 100.0 * 150 / 270
    assert report.idf1 == 100.0 * 2 * 150 / (270 + 270)


def test_splitting_a_correct_cluster_strictly_hurts():
    records = [
        _rec("t1", 1, 60, "X"),
        _rec("t2", 2, 60, "X"),
        _rec("t3", 3, 60, "X"),
    ]
    gt = make_set(records, cameras=3)
    whole = id_metrics(_prediction(gt, [["t1", "t2", "t3"]]), gt)
    split = id_metrics(_prediction(gt, [["t1", "t2"], ["t3"]]), gt)
    assert whole.idf1 == 100.0
    assert split.idr < whole.idr
    assert split.idf1 < whole.idf1


def test_unknown_trajectory_id_rejected():
    gt = _two_identity_truth()
    pred = GlobalTrajectories(
        [GlobalTrajectory(0, ("t1", "ghost"), (1, 2), True)]
    )
    with pytest.raises(ValueError, match="ghost"):
        id_metrics(pred, gt)


def test_unlabeled_ground_truth_rejected():
    records = [
        _rec("t1", 1, 10, "X"),
        make_record("t2", 2, start=0, end=9, identity=None),
    ]
    gt = make_set(records, cameras=2)
    with pytest.raises(ValueError, match="t2"):
        id_metrics(_prediction(gt, [["t1"]]), gt)


def test_degenerate_when_no_multicamera_prediction():
    gt = _two_identity_truth()
    report = id_metrics(_prediction(gt, [["t1"], ["t2"], ["t3"], ["t4"]]), gt)
    assert report.degenerate
    assert report.idp == report.idr == report.idf1 == 0.0
    assert report.idtp == 0
    assert report.total_gt_frames == 270


def test_degenerate_when_truth_has_no_multicamera_identity():
    records = [
        _rec("t1", 1, 10, "X"),
        _rec("t2", 1, 10, "X"),  # X never leaves camera 1
        _rec("t3", 2, 10, "Y"),
    ]
    gt = make_set(records, cameras=2)
    report = id_metrics(_prediction(gt, [["t1", "t3"]]), gt)
    assert report.degenerate
    assert report.idf1 == 0.0


def test_single_camera_identities_do_not_count_against_recall():
    records = [
        _rec("t1", 1, 30, "X"),
        _rec("t2", 2, 30, "X"),
        _rec("t3", 1, 99, "Z"),  # Z exists only on camera 1
    ]
    gt = make_set(records, cameras=2)
    clean = id_metrics(_prediction(gt, [["t1", "t2"], ["t3"]]), gt)
    assert clean.idr == 100.0
    assert clean.idf1 == 100.0
    assert clean.total_gt_frames == 60
    # polluting the good cluster with Z's trajectory costs precision only
    dirty = id_metrics(_prediction(gt, [["t1", "t2", "t3"]]), gt)
    assert dirty.idtp == 60
    assert dirty.idr == 100.0
    assert dirty.idp == 100.0 * 60 / 159
    assert dirty.idp < clean.idp


def _random_case(rng):
    n_ids = int(rng.integers(1, 7))
    cams = int(rng.integers(2, 5))
    records = []
    for k in range(n_ids):
        present = [c for c in range(1, cams + 1) if rng.uniform() < 0.7]
        for c in present:
            records.append(
                _rec(f"i{k}c{c}", c, int(rng.integers(1, 51)), f"id{k}")
            )
    if not records:
        records.append(_rec("i0c1", 1, 10, "id0"))
    gt = make_set(records, cameras=cams)
    tids = [r.trajectory_id for r in records]
    n_groups = int(rng.integers(1, len(tids) + 1))
    groups = [[] for _ in range(n_groups)]
    for t in tids:
        groups[int(rng.integers(0, n_groups))].append(t)
    return gt, groups


def _oracle_idtp(pred, gt):
    """Try every one-to-one matching explicitly."""
    by_tid = {r.trajectory_id: r for r in gt.records}
    cams_by_ident = {}
    for r in gt.records:
        cams_by_ident.setdefault(r.identity_id, set()).add(r.camera_id)
    idents = sorted(i for i, cs in cams_by_ident.items() if len(cs) >= 2)
    clusters = pred.multi_camera_clusters
    if not idents or not clusters:
        return None  # degenerate; handled separately

    def overlap(cluster, ident):
        return sum(
            by_tid[t].frame_count
            for t in cluster.trajectory_ids
            if by_tid[t].identity_id == ident
        )

    best = 0
    if len(clusters) <= len(idents):
        for perm in itertools.permutations(idents, len(clusters)):
            best = max(best, sum(overlap(c, i) for c, i in zip(clusters, perm)))
    else:
        for perm in itertools.permutations(clusters, len(idents)):
            best = max(best, sum(overlap(c, i) for c, i in zip(perm, idents)))
    return best


def test_assignment_matches_exhaustive_matching():
    rng = np.random.default_rng(123)
    checked = 0
    for _ in range(200):
        gt, groups = _random_case(rng)
        pred = _prediction(gt, groups)
        want = _oracle_idtp(pred, gt)
        report = id_metrics(pred, gt)
        if want is None:
            assert report.degenerate
            continue
        checked += 1
        assert report.idtp == want
        total_pred = sum(
            r.frame_count
            for c in pred.multi_camera_clusters
            for t in c.trajectory_ids
            for r in gt.records
            if r.trajectory_id == t
        )
        assert report.total_pred_frames == total_pred
        if total_pred + report.total_gt_frames:
            assert report.idf1 == 100.0 * 2 * want / (
                total_pred + report.total_gt_frames
            )
    assert checked >= 100  # the generator must mostly produce non-degenerate cases


def test_metrics_invariant_to_cluster_order_and_identity_names():
    rng = np.random.default_rng(321)
    for _ in range(30):
        gt, groups = _random_case(rng)
        base = id_metrics(_prediction(gt, groups), gt)
        shuffled = list(groups)
        rng.shuffle(shuffled)
        again = id_metrics(_prediction(gt, shuffled), gt)
        assert (base.idtp, base.idf1, base.degenerate) == (
            again.idtp, again.idf1, again.degenerate)
        renamed = make_set(
            [make_record(r.trajectory_id, r.camera_id, r.start_frame, r.end_frame,
                         feature=r.feature, identity="Z" + r.identity_id)
             for r in gt.records],
            cameras=gt.camera_count,
        )
        relabeled = id_metrics(_prediction(renamed, groups), renamed)
        assert (base.idtp, base.idf1) == (relabeled.idtp, relabeled.idf1)


def test_format_table_layout():
    report = MetricsReport(98.5, 97.25, 97.87, 1234, 1250, 1260)
    table = report.format_table()
    lines = table.splitlines()
    assert len(lines) == 6
    assert lines[0].startswith("IDP")
    assert "98.50" in lines[0]
    assert "97.87" in lines[2]
    assert "1234" in lines[3]


def test_format_table_degenerate_dashes():
    report = MetricsReport(0.0, 0.0, 0.0, 0, 0, 500, degenerate=True)
    lines = report.format_table().splitlines()
    for row in lines[:3]:
        assert row.rstrip().endswith("-")
    assert "500" in lines[5]


def test_save_metrics_payload(tmp_path):
    gt = _two_identity_truth()
    report = id_metrics(_prediction(gt, [["t1", "t2"], ["t3", "t4"]]), gt)
    path = tmp_path / "metrics.json"
    save_metrics(report, path, extra={"scenario": "demo"})
    payload = json.loads(path.read_text())
    assert set(payload) == {"idp", "idr", "idf1", "idtp", "pred_frames",
                            "gt_frames", "degenerate", "scenario"}
    assert payload["idf1"] == 100.0
    assert payload["idtp"] == 270
    assert payload["scenario"] == "demo"

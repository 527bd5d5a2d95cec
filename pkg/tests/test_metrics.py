import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from diffseg.metrics import (
    CSV_HEADER,
    MetricReport,
    Segment,
    edit_score,
    evaluate_split,
    f1_at,
    frame_accuracy,
    reports_to_csv,
    to_segments,
)
from oracles import edit_score_oracle, f1_oracle, max_bipartite_hits

A, B = 0, 1
labels_st = st.lists(st.integers(0, 4), min_size=1, max_size=50)


def random_pair(rng):
    L = int(rng.integers(1, 51))
    C = int(rng.integers(1, 6))
    # draw segment structure rather than i.i.d. frames so long runs occur
    def seq():
        out = []
        while len(out) < L:
            out += [int(rng.integers(C))] * int(rng.integers(1, 12))
        return out[:L]

    gt = seq()
    pred = seq() if rng.random() < 0.5 else [x if rng.random() > 0.15 else int(rng.integers(C)) for x in gt]
    return pred, gt


def test_to_segments():
    assert to_segments([A, A, B]) == [Segment(A, 0, 2), Segment(B, 2, 3)]
    assert to_segments([3] * 7) == [Segment(3, 0, 7)]
    assert len(to_segments([A, B, A, B])) == 4


def test_frame_accuracy():
    assert frame_accuracy([1, 2, 3], [1, 2, 3]) == 100
    assert frame_accuracy([1, 1], [0, 0]) == 0
    assert frame_accuracy([1, 0, 1, 0], [1, 1, 1, 1]) == 50
    with pytest.raises(ValueError):
        frame_accuracy([1], [1, 2])


def test_edit_examples():
    assert edit_score([A] * 3 + [B] * 9, [A] * 7 + [B]) == 100
    assert edit_score([A, B, A], [A, B, B]) == pytest.approx(100 * (1 - 1 / 3))
    assert edit_score([B], [A]) == 0


def test_f1_examples():
    gt = [A] * 10
    assert f1_at([A] * 6 + [B] * 4, gt, 0.5)[2] == pytest.approx(100 * 2 * 0.5 * 1 / 1.5)
    # recall 1 (the A segment matched), precision 1/2 (the B segment is spurious)
    assert f1_at([A] * 6 + [B] * 4, gt, 0.25)[2] == f1_at([A] * 6 + [B] * 4, gt, 0.5)[2]
    assert f1_at([A] * 4 + [B] * 6, gt, 0.5)[2] == 0
    assert f1_at([A] * 4 + [B] * 6, gt, 0.25)[2] == pytest.approx(100 * 2 / 3)
    for tau in (0.1, 0.25, 0.5):
        assert f1_at(gt, gt, tau)[2] == 100
    with pytest.raises(ValueError):
        f1_at(gt, gt, 0.0)


def test_f1_iou_thresholds_isolated():
    # single-label background so only the A segment matters: IoU 0.6 then 0.4
    gt = [A] * 10
    p06 = [A] * 6 + [2] * 4
    p04 = [A] * 4 + [2] * 4 + [A] * 2
    _, rec, _ = f1_at(p06, gt, 0.5)
    assert rec == 100
    prec, rec, _ = f1_at(p04, gt, 0.5)
    assert rec == 0 and prec == 0


def test_metric_oracles_on_random_instances():
    rng = np.random.default_rng(2024)
    for _ in range(1500):
        pred, gt = random_pair(rng)
        assert edit_score(pred, gt) == pytest.approx(edit_score_oracle(pred, gt), abs=1e-12)
        for tau in (0.1, 0.25, 0.5):
            assert f1_at(pred, gt, tau)[2] == pytest.approx(f1_oracle(pred, gt, tau), abs=1e-12)


def test_greedy_can_differ_from_optimal_matching():
    # both A predictions prefer the long A segment; the second is then a false
    # positive although pairing it with the short A segment would clear tau
    gt = [A] * 10 + [B] + [A] * 2
    pred = [A] * 4 + [B] + [A] * 8
    _, recall, _ = f1_at(pred, gt, 0.1)
    assert recall == pytest.approx(100 / 3)
    assert max_bipartite_hits(pred, gt, 0.1) == 2
    assert f1_at(pred, gt, 0.1)[2] == pytest.approx(f1_oracle(pred, gt, 0.1))


@settings(max_examples=100, deadline=None)
@given(pred=labels_st, gt=labels_st, k=st.integers(2, 4))
def test_upsampling_invariance(pred, gt, k):
    L = min(len(pred), len(gt))
    pred, gt = pred[:L], gt[:L]
    up = lambda x: list(np.repeat(x, k))
    assert edit_score(up(pred), up(gt)) == pytest.approx(edit_score(pred, gt), abs=1e-12)
    for tau in (0.1, 0.25, 0.5):
        assert f1_at(up(pred), up(gt), tau)[2] == pytest.approx(f1_at(pred, gt, tau)[2], abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(pred=labels_st, gt=labels_st)
def test_bounds_and_tau_monotone(pred, gt):
    L = min(len(pred), len(gt))
    pred, gt = pred[:L], gt[:L]
    scores = [f1_at(pred, gt, t)[2] for t in (0.05, 0.1, 0.25, 0.5, 0.75, 0.9)]
    assert all(a >= b for a, b in zip(scores, scores[1:]))
    for v in [frame_accuracy(pred, gt), edit_score(pred, gt), *scores]:
        assert 0 <= v <= 100
    assert edit_score(gt, gt) == 100 and frame_accuracy(gt, gt) == 100


def test_report_average_and_csv():
    rep = MetricReport(90, 80, 70, 60, 50)
    assert rep.avg == 70
    text = reports_to_csv([("test", rep)])
    lines = text.splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert lines[1] == "test,90.0000,80.0000,70.0000,60.0000,50.0000,70.0000"


def test_evaluate_split_aggregation():
    preds = [[A] * 4, [A, A, B, B]]
    gts = [[A] * 4, [A] * 4]
    rep = evaluate_split(preds, gts)
    assert rep.acc == 75
    assert rep.edit == pytest.approx((100 + 50) / 2)
    # counts pooled: tp=2, fp=1, fn=0
    assert rep.f1_10 == pytest.approx(100 * 2 * (2 / 3) / (2 / 3 + 1))

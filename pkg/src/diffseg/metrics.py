"""Frame accuracy, segmental edit score and F1@k for action segmentation.

Split-level aggregation follows the usual evaluation scripts: accuracy is
frame-weighted over the concatenated split, edit is the mean over videos,
and F1 is computed from true/false positive counts summed over videos.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

THRESHOLDS = (0.10, 0.25, 0.50)
CSV_HEADER = ("split", "acc", "edit", "f1_10", "f1_25", "f1_50", "avg")


class Segment(NamedTuple):
    label: int
    start: int  # inclusive
    end: int  # exclusive


def to_segments(labels: Sequence[int]) -> list[Segment]:
    labels = np.asarray(labels)
    if labels.size == 0:
        return []
    change = np.flatnonzero(labels[1:] != labels[:-1]) + 1
    starts = np.concatenate([[0], change])
    ends = np.concatenate([change, [labels.size]])
    return [Segment(int(labels[s]), int(s), int(e)) for s, e in zip(starts, ends)]


def _drop_ignored(segs: list[Segment], ignore: Iterable[int]) -> list[Segment]:
    ignore = set(ignore)
    return [s for s in segs if s.label not in ignore]


def frame_accuracy(pred: Sequence[int], gt: Sequence[int]) -> float:
    pred, gt = np.asarray(pred), np.asarray(gt)
    if pred.shape != gt.shape:
        raise ValueError(f"length mismatch: {pred.size} vs {gt.size}")
    return 100.0 * float(np.mean(pred == gt))


def levenshtein(a: Sequence[int], b: Sequence[int]) -> int:
    prev = np.arange(len(b) + 1)
    for i, x in enumerate(a, start=1):
        cur = np.empty_like(prev)
        cur[0] = i
        for j, y in enumerate(b, start=1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y))
        prev = cur
    return int(prev[-1])


def edit_score(pred: Sequence[int], gt: Sequence[int], ignore: Iterable[int] = ()) -> float:
    p = [s.label for s in _drop_ignored(to_segments(pred), ignore)]
    g = [s.label for s in _drop_ignored(to_segments(gt), ignore)]
    denom = max(len(p), len(g))
    if denom == 0:
        return 100.0
    return max(0.0, 100.0 * (1.0 - levenshtein(p, g) / denom))


def f1_counts(
    pred: Sequence[int], gt: Sequence[int], tau: float, ignore: Iterable[int] = ()
) -> tuple[int, int, int]:
    """Greedy segment matching; returns (true pos, false pos, false neg)."""
    if not 0 < tau < 1:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    ps = _drop_ignored(to_segments(pred), ignore)
    gs = _drop_ignored(to_segments(gt), ignore)
    used = [False] * len(gs)
    tp = fp = 0
    for p in ps:
        best, best_iou = -1, 0.0
        for j, g in enumerate(gs):
            if g.label != p.label:
                continue
            inter = max(0, min(p.end, g.end) - max(p.start, g.start))
            union = max(p.end, g.end) - min(p.start, g.start)
            iou = inter / union
            if iou > best_iou:
                best, best_iou = j, iou
        if best >= 0 and best_iou >= tau and not used[best]:
            used[best] = True
            tp += 1
        else:
            fp += 1
    return tp, fp, len(gs) - sum(used)


def f1_from_counts(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return 100 * precision, 100 * recall, 100 * f1


def f1_at(pred: Sequence[int], gt: Sequence[int], tau: float, ignore: Iterable[int] = ()):
    """(precision, recall, F1) as percentages."""
    return f1_from_counts(*f1_counts(pred, gt, tau, ignore))


@dataclass
class MetricReport:
    acc: float
    edit: float
    f1_10: float
    f1_25: float
    f1_50: float

    @property
    def avg(self) -> float:
        return (self.acc + self.edit + self.f1_10 + self.f1_25 + self.f1_50) / 5

    def as_row(self, split: str) -> list[str]:
        vals = [self.acc, self.edit, self.f1_10, self.f1_25, self.f1_50, self.avg]
        return [split] + [f"{v:.4f}" for v in vals]

    def __str__(self) -> str:
        return (
            f"Acc {self.acc:.1f}  Edit {self.edit:.1f}  "
            f"F1@10/25/50 {self.f1_10:.1f}/{self.f1_25:.1f}/{self.f1_50:.1f}  Avg {self.avg:.1f}"
        )


@dataclass
class MetricAccumulator:
    ignore: tuple[int, ...] = ()
    correct: int = 0
    frames: int = 0
    edits: list[float] = field(default_factory=list)
    counts: dict[float, list[int]] = field(
        default_factory=lambda: {t: [0, 0, 0] for t in THRESHOLDS}
    )

    def add(self, pred: Sequence[int], gt: Sequence[int]) -> None:
        pred, gt = np.asarray(pred), np.asarray(gt)
        if pred.shape != gt.shape:
            raise ValueError(f"length mismatch: {pred.size} vs {gt.size}")
        keep = ~np.isin(gt, self.ignore)
        self.correct += int(np.sum((pred == gt) & keep))
        self.frames += int(np.sum(keep))
        self.edits.append(edit_score(pred, gt, self.ignore))
        for t in THRESHOLDS:
            for k, v in enumerate(f1_counts(pred, gt, t, self.ignore)):
                self.counts[t][k] += v

    def report(self) -> MetricReport:
        f1 = [f1_from_counts(*self.counts[t])[2] for t in THRESHOLDS]
        return MetricReport(
            acc=100.0 * self.correct / max(self.frames, 1),
            edit=float(np.mean(self.edits)) if self.edits else 0.0,
            f1_10=f1[0],
            f1_25=f1[1],
            f1_50=f1[2],
        )


def evaluate_split(
    preds: Sequence[Sequence[int]], gts: Sequence[Sequence[int]], ignore: Iterable[int] = ()
) -> MetricReport:
    acc = MetricAccumulator(ignore=tuple(ignore))
    for p, g in zip(preds, gts, strict=True):
        acc.add(p, g)
    return acc.report()


def reports_to_csv(rows: Sequence[tuple[str, MetricReport]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for split, rep in rows:
        w.writerow(rep.as_row(split))
    return buf.getvalue()

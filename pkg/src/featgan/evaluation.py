"""Detection post-processing and metrics.

Matching is greedy per image and class in descending score order at IoU 0.5;
because greedy processing never looks ahead, the match set at any score
threshold is a prefix of the full-ranking match set, which lets every metric
here (bucket recall/accuracy, curves, FPPI miss rate) reuse one matching pass.
"""

import csv
from dataclasses import dataclass
from enum import Enum

import numpy as np


@dataclass(frozen=True)
class DetectionRecord:
    image_id: int
    box: tuple
    class_id: int
    score: float


class SizeBucket(Enum):
    SMALL = "Small"
    MEDIUM = "Medium"
    LARGE = "Large"


def box_area(box):
    x1, y1, x2, y2 = box
    return (x2 - x1) * (y2 - y1)


def bucket_of_area(area):
    if area < 1024:
        return SizeBucket.SMALL
    if area > 9216:
        return SizeBucket.LARGE
    return SizeBucket.MEDIUM  # boundaries 1024 and 9216 land here


def bucket_of(annotation):
    return bucket_of_area(annotation.area)


def iou(box_a, box_b):
    ax1, ay1, ax2, ay2 = box_a
    bx1, by1, bx2, by2 = box_b
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    return inter / union


def nms(detections, iou_threshold):
    """Greedy same-class suppression; deterministic tie order."""
    if not (0.0 <= iou_threshold <= 1.0):
        raise ValueError("iou_threshold must lie in [0,1]")
    order = sorted(detections,
                   key=lambda d: (-d.score, tuple(d.box), d.class_id))
    kept = []
    for d in order:
        if all(k.class_id != d.class_id or iou(k.box, d.box) < iou_threshold
               for k in kept):
            kept.append(d)
    return kept


# ---------------------------------------------------------------------------
# matching


def match_detections(detections, ground_truths, iou_thresh=0.5):
    """Greedy per-image/per-class matching in descending score order.

    Returns (order, matched_gt) where `order` is the globally score-sorted
    detection list and matched_gt[i] is the Annotation matched to order[i],
    or None for a false positive. Each ground truth matches at most once.
    """
    order = sorted(detections,
                   key=lambda d: (-d.score, d.image_id, tuple(d.box), d.class_id))
    by_img = {}
    for g in ground_truths:
        by_img.setdefault(g.image_id, []).append(g)
    used = set()
    matched = []
    for d in order:
        best, best_iou = None, 0.0
        for g in by_img.get(d.image_id, ()):
            if g.class_id != d.class_id or id(g) in used:
                continue
            v = iou(d.box, g.box)
            if v >= iou_thresh and v > best_iou:
                best, best_iou = g, v
        if best is not None:
            used.add(id(best))
        matched.append(best)
    return order, matched


def _in_bucket(area, bucket):
    return bucket is None or bucket_of_area(area) is bucket


def recall_accuracy(detections, ground_truths, iou_thresh=0.5, bucket=None):
    """(recall, accuracy) within a size bucket (None = everything).

    Recall counts matched ground truths of the bucket; accuracy is precision
    over detections assigned to the bucket — by their matched ground truth's
    area when matched, by their own box area otherwise. Empty denominators
    give 1.0 (vacuous).
    """
    order, matched = match_detections(detections, ground_truths, iou_thresh)
    gt_in = [g for g in ground_truths if _in_bucket(box_area(g.box), bucket)]
    tp = fp = 0
    for d, g in zip(order, matched):
        if g is not None:
            if _in_bucket(box_area(g.box), bucket):
                tp += 1
        elif _in_bucket(box_area(d.box), bucket):
            fp += 1
    recall = tp / len(gt_in) if gt_in else 1.0
    accuracy = tp / (tp + fp) if (tp + fp) > 0 else 1.0
    return recall, accuracy


def accuracy_recall_curve(detections, ground_truths, bucket=None, iou_thresh=0.5):
    """One (recall, accuracy) point per distinct score, descending threshold."""
    points = []
    for t in sorted({d.score for d in detections}, reverse=True):
        sub = [d for d in detections if d.score >= t]
        points.append((t,) + recall_accuracy(sub, ground_truths, iou_thresh, bucket))
    return points


def log_average_miss_rate(detections, ground_truths, num_images=None,
                          iou_thresh=0.5):
    """Caltech-protocol LAMR over 9 log-spaced FPPI references in [1e-2, 1].

    The (FPPI, miss-rate) curve is swept over distinct score thresholds and
    seeded with the empty-detector point (0, 1); each reference takes the
    lowest miss rate among points with FPPI <= reference; rates are clamped
    to >= 1e-10 before the geometric mean.
    """
    if not ground_truths:
        raise ValueError("log_average_miss_rate requires ground truths")
    if num_images is None:
        num_images = len({g.image_id for g in ground_truths})
    n_gt = len(ground_truths)
    order, matched = match_detections(detections, ground_truths, iou_thresh)

    curve = [(0.0, 1.0)]
    tp = fp = 0
    scores = [d.score for d in order]
    for i, g in enumerate(matched):
        if g is not None:
            tp += 1
        else:
            fp += 1
        last_of_threshold = i + 1 == len(order) or scores[i + 1] != scores[i]
        if last_of_threshold:
            curve.append((fp / num_images, 1.0 - tp / n_gt))

    refs = np.logspace(-2.0, 0.0, 9)
    rates = []
    for ref in refs:
        best = min(mr for fppi, mr in curve if fppi <= ref)
        rates.append(max(best, 1e-10))
    return float(np.exp(np.mean(np.log(rates))))


# ---------------------------------------------------------------------------
# report files


def write_metrics_csv(path, detections, ground_truths, iou_thresh=0.5):
    order, matched = match_detections(detections, ground_truths, iou_thresh)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bucket", "recall", "accuracy", "num_gt", "num_det"])
        for bucket in (SizeBucket.SMALL, SizeBucket.MEDIUM, SizeBucket.LARGE, None):
            r, a = recall_accuracy(detections, ground_truths, iou_thresh, bucket)
            n_gt = sum(_in_bucket(box_area(g.box), bucket) for g in ground_truths)
            n_det = sum(
                _in_bucket(box_area(g.box if g is not None else d.box), bucket)
                for d, g in zip(order, matched))
            w.writerow([bucket.value if bucket else "All",
                        f"{r:.6f}", f"{a:.6f}", n_gt, n_det])


def write_curve_csv(path, detections, ground_truths, iou_thresh=0.5):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bucket", "threshold", "recall", "accuracy"])
        for bucket in (SizeBucket.SMALL, SizeBucket.MEDIUM, SizeBucket.LARGE, None):
            pts = accuracy_recall_curve(detections, ground_truths, bucket, iou_thresh)
            for t, r, a in pts:
                w.writerow([bucket.value if bucket else "All",
                            f"{t:.6f}", f"{r:.6f}", f"{a:.6f}"])

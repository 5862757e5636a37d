"""Detection evaluation: tIoU, interpolated per-class AP, and mAP averaged
over tIoU thresholds 0.50:0.05:0.95 (ActivityNet/HACS matching semantics)."""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

DEFAULT_THRESHOLDS = tuple(round(0.50 + 0.05 * i, 2) for i in range(10))


def tiou(a, b):
    """Temporal IoU of two (start, end) intervals in seconds."""
    (a0, a1), (b0, b1) = a, b
    inter = max(0.0, min(a1, b1) - max(a0, b0))
    union = (a1 - a0) + (b1 - b0) - inter
    return inter / union if union > 0 else 0.0


def _interpolated_ap(tp_flags, n_gt):
    """Area under the non-increasing precision envelope, VOC/ActivityNet style."""
    tp = np.asarray(tp_flags, dtype=np.float64)
    if tp.size == 0 or n_gt == 0:
        return 0.0
    cum_tp = np.cumsum(tp)
    precision = cum_tp / np.arange(1, tp.size + 1)
    recall = cum_tp / n_gt
    mprec = np.concatenate([[0.0], precision, [0.0]])
    mrec = np.concatenate([[0.0], recall, [1.0]])
    for i in range(mprec.size - 2, -1, -1):
        mprec[i] = max(mprec[i], mprec[i + 1])
    idx = np.nonzero(mrec[1:] != mrec[:-1])[0] + 1
    return float(np.sum((mrec[idx] - mrec[idx - 1]) * mprec[idx]))


def match_detections(dets, gts, threshold):
    """Greedy TP/FP assignment for one class.

    dets: list of (video_id, start, end, score); gts: list of (video_id,
    start, end). Detections are visited by score desc (ties by start asc);
    each claims the unmatched same-video GT of highest tIoU when >= threshold.
    """
    order = sorted(range(len(dets)), key=lambda i: (-dets[i][3], dets[i][1]))
    taken = [False] * len(gts)
    flags = np.zeros(len(dets))
    for rank, i in enumerate(order):
        vid, s, e, _ = dets[i]
        best, best_iou = -1, 0.0
        for j, (gvid, gs, ge) in enumerate(gts):
            if taken[j] or gvid != vid:
                continue
            val = tiou((s, e), (gs, ge))
            if val > best_iou:
                best, best_iou = j, val
        if best >= 0 and best_iou >= threshold:
            taken[best] = True
            flags[rank] = 1.0
    return flags


def average_precision(dets, gts, threshold):
    """Interpolated AP for one class at one tIoU threshold."""
    if not gts:
        return 0.0
    return _interpolated_ap(match_detections(dets, gts, threshold), len(gts))


@dataclass
class EvalReport:
    thresholds: tuple
    per_threshold_map: dict            # threshold -> mAP
    average_map: float
    per_class_ap: dict                 # class name -> {threshold: AP}
    unknown_label_count: int = 0
    classes_evaluated: list = field(default_factory=list)

    def to_json(self):
        return json.dumps({
            "thresholds": list(self.thresholds),
            "per_threshold_map": {f"{t:.2f}": v for t, v in self.per_threshold_map.items()},
            "average_map": self.average_map,
            "per_class_ap": {c: {f"{t:.2f}": v for t, v in row.items()}
                             for c, row in self.per_class_ap.items()},
            "unknown_label_count": self.unknown_label_count,
            "classes_evaluated": self.classes_evaluated,
        }, indent=2, sort_keys=True)

    def format_table(self):
        header = "  ".join(f"{t:>5.2f}" for t in self.thresholds)
        values = "  ".join(f"{100 * self.per_threshold_map[t]:>5.1f}" for t in self.thresholds)
        lines = [f"{'mAP@IoU (%)':<14}{header}  Average mAP",
                 f"{'':<14}{values}  {100 * self.average_map:>11.2f}"]
        return "\n".join(lines)


def evaluate(results, annotations, thresholds=DEFAULT_THRESHOLDS, subset=None):
    """Score a results payload against HACS-style annotations.

    results: {"results": {vid: [{"label", "segment", "score"}]}}.
    annotations: {"database": {...}, "classes": [...]}. Classes with no GT
    anywhere are excluded from mAP; unknown result labels are counted and
    skipped.
    """
    try:
        database = annotations["database"]
        class_names = list(annotations["classes"])
    except (KeyError, TypeError) as exc:
        raise DataError(f"malformed annotation payload: {exc}") from exc
    videos = {vid for vid, entry in database.items()
              if subset is None or entry.get("subset") == subset}

    gts = {name: [] for name in class_names}
    for vid in videos:
        for seg in database[vid].get("annotations", []):
            if seg["label"] not in gts:
                raise DataError(f"ground truth of '{vid}' uses unknown class '{seg['label']}'")
            s, e = seg["segment"]
            gts[seg["label"]].append((vid, float(s), float(e)))

    dets = {name: [] for name in class_names}
    unknown = 0
    for vid, entries in results.get("results", {}).items():
        if vid not in videos:
            continue
        for entry in entries:
            if entry["label"] not in dets:
                unknown += 1
                continue
            s, e = entry["segment"]
            dets[entry["label"]].append((vid, float(s), float(e), float(entry["score"])))

    evaluated = [name for name in class_names if gts[name]]
    per_class = {name: {} for name in evaluated}
    per_threshold = {}
    for t in thresholds:
        aps = []
        for name in evaluated:
            ap = average_precision(dets[name], gts[name], t)
            per_class[name][t] = ap
            aps.append(ap)
        per_threshold[t] = float(np.mean(aps)) if aps else 0.0
    avg = float(np.mean([per_threshold[t] for t in thresholds])) if thresholds else 0.0
    return EvalReport(thresholds=tuple(thresholds), per_threshold_map=per_threshold,
                      average_map=avg, per_class_ap=per_class,
                      unknown_label_count=unknown, classes_evaluated=evaluated)

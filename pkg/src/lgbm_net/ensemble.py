"""Detection-level fusion of multiple trained models: per-model score
normalization, weighted concatenation, class-wise NMS."""

from collections import defaultdict
from dataclasses import replace

from .errors import ConfigError
from .localization import nms


def normalize_scores(detections):
    """Per-class min-max rescaling of scores to [0, 1] within one model's
    output; a constant score set maps to 0.5."""
    by_class = defaultdict(list)
    for det in detections:
        by_class[det.class_id].append(det)
    out = []
    for dets in by_class.values():
        lo = min(d.score for d in dets)
        hi = max(d.score for d in dets)
        if hi - lo <= 0:
            out.extend(replace(d, score=0.5) for d in dets)
        else:
            out.extend(replace(d, score=(d.score - lo) / (hi - lo)) for d in dets)
    return out


def ensemble_detections(model_outputs, weights=None, nms_threshold=0.6):
    """Soft union fusion of per-model detection lists (one flat list each,
    possibly spanning several videos)."""
    if not model_outputs:
        raise ConfigError("need at least one model output to ensemble")
    if weights is None:
        weights = [1.0] * len(model_outputs)
    if len(weights) != len(model_outputs):
        raise ConfigError("one weight per model output required")
    if any(w < 0 for w in weights) or sum(weights) <= 0:
        raise ConfigError("weights must be nonnegative with positive sum")

    pooled = defaultdict(list)
    for dets, w in zip(model_outputs, weights):
        for det in normalize_scores(dets):
            pooled[det.video_id].append(replace(det, score=w * det.score))
    fused = {}
    for vid, dets in pooled.items():
        fused[vid] = nms(dets, nms_threshold)
    return fused

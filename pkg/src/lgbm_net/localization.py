"""Suppression-branch CAS to scored temporal detections.

Pipeline: sigmoid activations -> multi-threshold superlevel-set ("watershed")
proposals per class -> outer-inner contrast scoring -> snippet-to-seconds
conversion -> class-wise NMS.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import torch

from .errors import ConfigError
from .model import as_tensor
from .training import topk_mean_aggregate


def default_thresholds():
    return [round(0.1 + 0.05 * i, 2) for i in range(17)]  # 0.10 .. 0.90


@dataclass
class LocalizationConfig:
    thresholds: list = field(default_factory=default_thresholds)
    margin_ratio: float = 0.25
    min_video_score: float = 0.1   # classes below this sigmoid score are skipped
    nms_tiou: float = 0.6
    smooth_width: int = 1          # moving-average width; 1 = no smoothing
    topk_ratio: int = 8

    def validate(self):
        if any(b <= a for a, b in zip(self.thresholds, self.thresholds[1:])):
            raise ConfigError("thresholds must be strictly increasing")
        if not all(0 < t < 1 for t in self.thresholds):
            raise ConfigError("thresholds must lie in (0, 1)")
        if not 0 < self.nms_tiou < 1:
            raise ConfigError("nms_tiou must lie in (0, 1)")
        if self.smooth_width < 1 or self.smooth_width % 2 == 0:
            raise ConfigError("smooth_width must be odd and >= 1")
        return self


@dataclass(frozen=True)
class Proposal:
    class_id: int
    t_start: int   # inclusive snippet index
    t_end: int     # inclusive snippet index
    threshold_level: float


@dataclass(frozen=True)
class Detection:
    video_id: str
    class_id: int
    start_sec: float
    end_sec: float
    score: float


def cas_to_activation(cas_supp):
    """Sigmoid of the C foreground columns; the background column is dropped."""
    cas = np.asarray(cas_supp, dtype=np.float64)
    return 1.0 / (1.0 + np.exp(-cas[:, :-1]))


def smooth_activation(act, width):
    if width <= 1:
        return act
    kernel = np.ones(width) / width
    return np.apply_along_axis(lambda col: np.convolve(col, kernel, mode="same"), 0, act)


def watershed_proposals(act_c, thresholds, class_id=0):
    """Maximal superlevel runs of one class activation profile, per threshold."""
    act_c = np.asarray(act_c, dtype=np.float64)
    proposals = []
    for theta in thresholds:
        above = act_c >= theta
        if not above.any():
            continue
        padded = np.concatenate([[False], above, [False]])
        edges = np.flatnonzero(padded[1:] != padded[:-1])
        for start, end in zip(edges[::2], edges[1::2]):
            proposals.append(Proposal(class_id=class_id, t_start=int(start),
                                      t_end=int(end - 1), threshold_level=float(theta)))
    return proposals


def score_proposal(act_c, proposal, video_score_c, margin_ratio=0.25):
    """Inner mean minus flank mean, offset by the video-level class score.

    Flanks extend ceil(margin_ratio * len) snippets on each side, clipped to
    the profile bounds; when both flanks are empty the outer term is 0.
    """
    t = len(act_c)
    s, e = proposal.t_start, proposal.t_end + 1
    inner = float(np.mean(act_c[s:e]))
    margin = math.ceil(margin_ratio * (e - s))
    flank = np.concatenate([act_c[max(0, s - margin):s], act_c[e:min(t, e + margin)]])
    outer = float(flank.mean()) if flank.size else 0.0
    return inner - outer + float(video_score_c)


def tiou_1d(a_start, a_end, b_start, b_end):
    inter = max(0.0, min(a_end, b_end) - max(a_start, b_start))
    union = (a_end - a_start) + (b_end - b_start) - inter
    return inter / union if union > 0 else 0.0


def nms(detections, tiou_threshold):
    """Greedy class-wise suppression, stable by (score desc, start asc)."""
    if not 0 < tiou_threshold < 1:
        raise ConfigError("tiou_threshold must lie in (0, 1)")
    order = sorted(detections, key=lambda d: (-d.score, d.start_sec))
    kept = []
    for det in order:
        clash = any(k.class_id == det.class_id
                    and tiou_1d(k.start_sec, k.end_sec, det.start_sec, det.end_sec)
                    >= tiou_threshold for k in kept)
        if not clash:
            kept.append(det)
    return kept


def detections_from_forward(video, fwd, cfg):
    """Turn one forward pass into NMS-ed detections for that video."""
    cfg.validate()
    cas_supp = fwd.cas_supp.detach().numpy()
    act = smooth_activation(cas_to_activation(cas_supp), cfg.smooth_width)
    video_scores = torch.sigmoid(
        topk_mean_aggregate(fwd.cas_supp.detach(), cfg.topk_ratio)).numpy()
    delta = video.snippet_duration_sec
    dets = []
    for c in range(act.shape[1]):
        if video_scores[c] < cfg.min_video_score:
            continue
        for prop in watershed_proposals(act[:, c], cfg.thresholds, class_id=c):
            score = score_proposal(act[:, c], prop, video_scores[c], cfg.margin_ratio)
            start = prop.t_start * delta
            end = min((prop.t_end + 1) * delta, video.video_duration_sec)
            if end <= start:
                continue
            dets.append(Detection(video_id=video.video_id, class_id=c,
                                  start_sec=start, end_sec=end, score=score))
    return nms(dets, cfg.nms_tiou)


def localize(video, model, cfg=None):
    """Full per-video detection: forward pass + post-processing."""
    cfg = cfg or LocalizationConfig()
    with torch.no_grad():
        fwd = model(as_tensor(video.features))
    return detections_from_forward(video, fwd, cfg)


def detections_to_results(detections_by_video, class_names):
    """ActivityNet-style results payload {"results": {vid: [...]}}."""
    results = {}
    for vid, dets in detections_by_video.items():
        results[vid] = [{"label": class_names[d.class_id],
                         "segment": [float(d.start_sec), float(d.end_sec)],
                         "score": float(d.score)}
                        for d in sorted(dets, key=lambda d: (-d.score, d.start_sec))]
    return {"results": results}


def results_to_detections(results, class_names):
    """Inverse of detections_to_results; unknown labels are collected, not raised."""
    index = {name: i for i, name in enumerate(class_names)}
    by_video, unknown = {}, 0
    for vid, entries in results.get("results", {}).items():
        dets = []
        for entry in entries:
            cls = index.get(entry["label"])
            if cls is None:
                unknown += 1
                continue
            s, e = entry["segment"]
            dets.append(Detection(video_id=vid, class_id=cls,
                                  start_sec=float(s), end_sec=float(e),
                                  score=float(entry["score"])))
        by_video[vid] = dets
    return by_video, unknown

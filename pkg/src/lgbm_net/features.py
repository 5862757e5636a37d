"""Feature sequences, annotations and the synthetic dataset generator.

Feature file layout (".lgbf"): 4-byte magic b"LGBF", little-endian uint32
header length, UTF-8 JSON header, then T*D float32 values (little-endian,
row-major).
"""

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError

MAGIC = b"LGBF"

SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class FeatureSequence:
    video_id: str
    features: np.ndarray  # (T, D) float32
    snippet_duration_sec: float
    video_duration_sec: float

    def __post_init__(self):
        f = np.asarray(self.features, dtype=np.float32)
        object.__setattr__(self, "features", f)
        if f.ndim != 2 or f.shape[0] < 1 or f.shape[1] < 1:
            raise DataError(f"features must be a T x D matrix with T,D >= 1, got shape {f.shape}")
        if not np.isfinite(f).all():
            raise DataError(f"non-finite feature values in video '{self.video_id}'")
        if self.snippet_duration_sec <= 0 or self.video_duration_sec <= 0:
            raise DataError("durations must be positive")
        t, dur, snip = f.shape[0], self.video_duration_sec, self.snippet_duration_sec
        if t * snip < dur - snip:
            raise DataError(
                f"{t} snippets of {snip}s do not cover a {dur}s video (video '{self.video_id}')")

    @property
    def num_snippets(self):
        return self.features.shape[0]

    @property
    def feature_dim(self):
        return self.features.shape[1]


@dataclass(frozen=True)
class VideoAnnotation:
    video_id: str
    labels: np.ndarray  # (C,) multi-hot
    duration_sec: float
    segments: tuple = ()  # of (class_id, start_sec, end_sec)

    def __post_init__(self):
        lab = np.asarray(self.labels, dtype=np.float32)
        object.__setattr__(self, "labels", lab)
        object.__setattr__(self, "segments", tuple(tuple(s) for s in self.segments))
        for cls, s, e in self.segments:
            if not (0 <= s < e <= self.duration_sec + 1e-6):
                raise DataError(
                    f"bad segment [{s}, {e}] for a {self.duration_sec}s video '{self.video_id}'")
            if lab[int(cls)] == 0:
                raise DataError(f"segment class {cls} not in video-level labels of '{self.video_id}'")


@dataclass
class DatasetManifest:
    class_names: list
    splits: dict = field(default_factory=dict)        # video_id -> split
    feature_files: dict = field(default_factory=dict)  # video_id -> path

    def __post_init__(self):
        if len(set(self.class_names)) != len(self.class_names):
            raise DataError("class names must be unique")
        for vid, split in self.splits.items():
            if split not in SPLITS:
                raise DataError(f"unknown split '{split}' for video '{vid}'")

    @property
    def num_classes(self):
        return len(self.class_names)

    def class_index(self, name):
        try:
            return self.class_names.index(name)
        except ValueError:
            raise DataError(f"unknown class label '{name}'") from None

    def videos(self, split=None):
        vids = sorted(self.splits)
        if split is None:
            return vids
        return [v for v in vids if self.splits[v] == split]

    def save(self, path):
        payload = {"class_names": self.class_names, "splits": self.splits,
                   "feature_files": {k: str(v) for k, v in self.feature_files.items()}}
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True))

    @classmethod
    def load(cls, path):
        try:
            payload = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise DataError(f"cannot read manifest {path}: {exc}") from exc
        return cls(class_names=list(payload["class_names"]),
                   splits=dict(payload["splits"]),
                   feature_files=dict(payload.get("feature_files", {})))


def write_features(seq, path):
    """Serialize a FeatureSequence; the round trip is bit-exact."""
    header = {"video_id": seq.video_id,
              "T": int(seq.num_snippets), "D": int(seq.feature_dim),
              "snippet_duration_sec": float(seq.snippet_duration_sec),
              "video_duration_sec": float(seq.video_duration_sec),
              "dtype": "f32"}
    blob = json.dumps(header).encode("utf-8")
    payload = np.ascontiguousarray(seq.features, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(payload)


def load_features(path, manifest=None):
    """Read one feature file, validating magic, header and payload size."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read feature file {path}: {exc}") from exc
    if len(raw) < 8 or raw[:4] != MAGIC:
        raise DataError(f"{path}: missing LGBF magic")
    (hlen,) = struct.unpack("<I", raw[4:8])
    if len(raw) < 8 + hlen:
        raise DataError(f"{path}: truncated header")
    try:
        header = json.loads(raw[8:8 + hlen].decode("utf-8"))
        t, d = int(header["T"]), int(header["D"])
        vid = header["video_id"]
        snip = float(header["snippet_duration_sec"])
        dur = float(header["video_duration_sec"])
    except (ValueError, KeyError, UnicodeDecodeError) as exc:
        raise DataError(f"{path}: malformed header: {exc}") from exc
    if header.get("dtype") != "f32":
        raise DataError(f"{path}: unsupported dtype {header.get('dtype')!r}")
    payload = raw[8 + hlen:]
    expected = t * d * 4
    if len(payload) != expected:
        raise DataError(f"{path}: payload holds {len(payload)} bytes, header implies {expected}")
    feats = np.frombuffer(payload, dtype="<f4").reshape(t, d)
    if manifest is not None and vid not in manifest.splits:
        raise DataError(f"{path}: video '{vid}' not in manifest")
    return FeatureSequence(video_id=vid, features=feats,
                           snippet_duration_sec=snip, video_duration_sec=dur)


def save_annotations(annotations, class_names, path, splits=None):
    """Write HACS/ActivityNet-style annotation JSON."""
    database = {}
    for vid, ann in annotations.items():
        database[vid] = {
            "duration": float(ann.duration_sec),
            "subset": (splits or {}).get(vid, "train"),
            "annotations": [{"label": class_names[int(c)], "segment": [float(s), float(e)]}
                            for c, s, e in ann.segments],
        }
    Path(path).write_text(json.dumps({"database": database, "classes": list(class_names)},
                                     indent=2, sort_keys=True))


def load_annotations(path):
    """Read annotation JSON; returns (class_names, {vid: VideoAnnotation}, {vid: split})."""
    try:
        payload = json.loads(Path(path).read_text())
        database = payload["database"]
        class_names = list(payload["classes"])
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise DataError(f"cannot read annotations {path}: {exc}") from exc
    index = {name: i for i, name in enumerate(class_names)}
    annotations, splits = {}, {}
    for vid, entry in database.items():
        labels = np.zeros(len(class_names), dtype=np.float32)
        segments = []
        for seg in entry.get("annotations", []):
            name = seg["label"]
            if name not in index:
                raise DataError(f"annotation of '{vid}' uses unknown class '{name}'")
            s, e = seg["segment"]
            labels[index[name]] = 1.0
            segments.append((index[name], float(s), float(e)))
        annotations[vid] = VideoAnnotation(video_id=vid, labels=labels,
                                           duration_sec=float(entry["duration"]),
                                           segments=segments)
        splits[vid] = entry.get("subset", "train")
    return class_names, annotations, splits


@dataclass
class SynthConfig:
    n_videos: int = 250
    C: int = 5
    T_range: tuple = (90, 110)
    D: int = 32
    fg_snr: float = 1.0
    seed: int = 0
    noise_std: float = 0.25
    bg_class_std: float = 0.0  # std of zero-mean background noise along class prototypes
    distractor_rate: float = 3.0  # mean count of short impostor bursts per video
    distractor_len_range: tuple = (2, 4)
    segment_len_range: tuple = (10, 30)
    val_fraction: float = 0.2
    snippet_duration_sec: float = 1.0

    def validate(self):
        if self.C < 2:
            raise ConfigError("need at least 2 action classes")
        if self.D < 2:
            raise ConfigError("need feature dim >= 2")
        if self.fg_snr <= 0:
            raise ConfigError("fg_snr must be positive (classes must be distinguishable)")
        if self.n_videos < 1:
            raise ConfigError("need at least one video")
        lo, hi = self.T_range
        if lo < self.segment_len_range[0] + 2 or lo > hi:
            raise ConfigError(
                f"T_range {self.T_range} too small for segments of length >= {self.segment_len_range[0]}")


def _place_segments(rng, t, len_range):
    """Place 1-3 non-overlapping segments (snippet index spans) at random."""
    n_seg = int(rng.integers(1, 4))
    spans = []
    for _ in range(n_seg):
        for _attempt in range(20):
            lo, hi = len_range
            length = int(rng.integers(lo, min(hi, max(lo, t // 2)) + 1))
            start = int(rng.integers(0, t - length + 1))
            span = (start, start + length)
            # keep a one-snippet background gap between segments
            if all(span[1] + 1 <= s or e + 1 <= span[0] for s, e in spans):
                spans.append(span)
                break
    return sorted(spans)


def generate_synthetic_dataset(cfg):
    """Build a solvable localization dataset with known segments.

    All rows share a zero-mean isotropic Gaussian (optionally plus variance
    bg_class_std^2 along each unit-norm class prototype); foreground rows
    additionally get the class prototype scaled by fg_snr as their mean.
    Background also contains short impostor bursts (distractor_rate per video
    on average, distractor_len_range snippets long) carrying a random class
    prototype at full fg_snr, so per-snippet evidence cannot separate them
    from genuine segments -- only their duration can. Deterministic in
    cfg.seed.
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    protos = rng.standard_normal((cfg.C, cfg.D))
    protos /= np.linalg.norm(protos, axis=1, keepdims=True)

    n_val = int(round(cfg.n_videos * cfg.val_fraction))
    manifest = DatasetManifest(class_names=[f"action_{i:02d}" for i in range(cfg.C)])
    sequences, annotations = {}, {}
    for i in range(cfg.n_videos):
        vid = f"synthetic_{i:05d}"
        t = int(rng.integers(cfg.T_range[0], cfg.T_range[1] + 1))
        cls = int(rng.integers(0, cfg.C))
        spans = _place_segments(rng, t, cfg.segment_len_range)
        feats = rng.standard_normal((t, cfg.D)) * cfg.noise_std
        if cfg.bg_class_std > 0:
            feats += (rng.standard_normal((t, cfg.C)) * cfg.bg_class_std) @ protos
        for s, e in spans:
            feats[s:e] += cfg.fg_snr * protos[cls]
        if cfg.distractor_rate > 0:
            # keep a 2-snippet margin so bursts never extend a real segment
            blocked = np.zeros(t, dtype=bool)
            for s, e in spans:
                blocked[max(0, s - 2):min(t, e + 2)] = True
            for _ in range(int(rng.poisson(cfg.distractor_rate))):
                length = int(rng.integers(cfg.distractor_len_range[0],
                                          cfg.distractor_len_range[1] + 1))
                starts = [s for s in range(t - length + 1)
                          if not blocked[s:s + length].any()]
                if not starts:
                    break
                s = starts[int(rng.integers(0, len(starts)))]
                feats[s:s + length] += cfg.fg_snr * protos[int(rng.integers(0, cfg.C))]
                blocked[max(0, s - 2):min(t, s + length + 2)] = True
        labels = np.zeros(cfg.C, dtype=np.float32)
        labels[cls] = 1.0
        dur = t * cfg.snippet_duration_sec
        segments = [(cls, s * cfg.snippet_duration_sec, e * cfg.snippet_duration_sec)
                    for s, e in spans]
        sequences[vid] = FeatureSequence(video_id=vid, features=feats.astype(np.float32),
                                         snippet_duration_sec=cfg.snippet_duration_sec,
                                         video_duration_sec=dur)
        annotations[vid] = VideoAnnotation(video_id=vid, labels=labels,
                                           duration_sec=dur, segments=segments)
        manifest.splits[vid] = "val" if i >= cfg.n_videos - n_val else "train"
    return manifest, sequences, annotations


def write_dataset(out_dir, manifest, sequences, annotations):
    """Materialize a dataset directory: features/, annotations.json, manifest.json."""
    out = Path(out_dir)
    (out / "features").mkdir(parents=True, exist_ok=True)
    for vid, seq in sequences.items():
        rel = f"features/{vid}.lgbf"
        write_features(seq, out / rel)
        manifest.feature_files[vid] = rel
    save_annotations(annotations, manifest.class_names, out / "annotations.json",
                     splits=manifest.splits)
    manifest.save(out / "manifest.json")


def load_dataset(data_dir):
    """Load a dataset directory written by write_dataset."""
    root = Path(data_dir)
    manifest = DatasetManifest.load(root / "manifest.json")
    class_names, annotations, _ = load_annotations(root / "annotations.json")
    if class_names != manifest.class_names:
        raise DataError("manifest and annotation class lists disagree")
    sequences = {vid: load_features(root / rel, manifest)
                 for vid, rel in manifest.feature_files.items()}
    return manifest, sequences, annotations

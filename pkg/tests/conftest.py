import numpy as np
import pytest

import lgbm_net as L


@pytest.fixture(scope="session")
def tiny_dataset():
    cfg = L.SynthConfig(n_videos=12, C=3, T_range=(40, 50), D=8, fg_snr=1.0,
                        seed=7, segment_len_range=(6, 12))
    return L.generate_synthetic_dataset(cfg)


@pytest.fixture(scope="session")
def tiny_model():
    cfg = L.ModelConfig(D=8, C=3, hidden=8)
    return L.build_model(cfg, seed=0)


def annotations_payload(manifest, annotations, videos=None):
    videos = videos if videos is not None else sorted(annotations)
    return {
        "database": {
            vid: {
                "duration": annotations[vid].duration_sec,
                "subset": manifest.splits.get(vid, "val"),
                "annotations": [
                    {"label": manifest.class_names[c], "segment": [s, e]}
                    for c, s, e in annotations[vid].segments
                ],
            }
            for vid in videos
        },
        "classes": manifest.class_names,
    }


def perfect_results(manifest, annotations, videos=None):
    videos = videos if videos is not None else sorted(annotations)
    return {
        "results": {
            vid: [
                {"label": manifest.class_names[c], "segment": [s, e], "score": 1.0}
                for c, s, e in annotations[vid].segments
            ]
            for vid in videos
        }
    }

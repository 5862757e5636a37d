"""Scikit-learn style wrapper so the localizer composes with sklearn
pipelines and parameter search (get_params/set_params via BaseEstimator)."""

import numpy as np
import torch
from sklearn.base import BaseEstimator

from .errors import DataError
from .features import DatasetManifest, FeatureSequence
from .localization import LocalizationConfig, localize
from .model import ModelConfig, as_tensor
from .training import TrainConfig, topk_mean_aggregate, train


def _check_inputs(X, y=None):
    if not X:
        raise DataError("X must be a non-empty list of FeatureSequence")
    for seq in X:
        if not isinstance(seq, FeatureSequence):
            raise DataError(f"expected FeatureSequence, got {type(seq).__name__}")
    if y is not None and len(y) != len(X):
        raise DataError(f"len(y)={len(y)} != len(X)={len(X)}")


class TemporalActionLocalizer(BaseEstimator):
    """Weakly-supervised temporal action localizer.

    fit() takes a list of FeatureSequence and a list of VideoAnnotation
    (video-level labels only are used); predict() returns per-video detection
    lists; predict_proba() returns video-level class probabilities.
    """

    def __init__(self, hidden=32, global_op="recurrent", conv_kernel=3,
                 recurrent_bidirectional=True, attention_kind="local_global",
                 topk_ratio=8, lambda_base=1.0, lambda_supp=1.0, lambda_att=0.1,
                 learning_rate=0.05, momentum=0.9, steps=400, batch_size=8,
                 random_state=0, localization_config=None, class_names=None):
        self.hidden = hidden
        self.global_op = global_op
        self.conv_kernel = conv_kernel
        self.recurrent_bidirectional = recurrent_bidirectional
        self.attention_kind = attention_kind
        self.topk_ratio = topk_ratio
        self.lambda_base = lambda_base
        self.lambda_supp = lambda_supp
        self.lambda_att = lambda_att
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.steps = steps
        self.batch_size = batch_size
        self.random_state = random_state
        self.localization_config = localization_config
        self.class_names = class_names

    def fit(self, X, y):
        _check_inputs(X, y)
        C = len(y[0].labels)
        names = list(self.class_names) if self.class_names else [f"class_{i}" for i in range(C)]
        manifest = DatasetManifest(class_names=names,
                                   splits={seq.video_id: "train" for seq in X})
        sequences = {seq.video_id: seq for seq in X}
        annotations = {ann.video_id: ann for ann in y}
        model_cfg = ModelConfig(D=X[0].feature_dim, C=C, hidden=self.hidden,
                                global_op=self.global_op, conv_kernel=self.conv_kernel,
                                recurrent_bidirectional=self.recurrent_bidirectional,
                                attention_kind=self.attention_kind)
        train_cfg = TrainConfig(topk_ratio=self.topk_ratio, lambda_base=self.lambda_base,
                                lambda_supp=self.lambda_supp, lambda_att=self.lambda_att,
                                learning_rate=self.learning_rate, momentum=self.momentum,
                                steps=self.steps, batch_size=self.batch_size,
                                seed=self.random_state)
        self.model_, self.train_log_ = train(manifest, sequences, annotations,
                                             model_cfg, train_cfg)
        self.classes_ = names
        return self

    def _require_fitted(self):
        if not hasattr(self, "model_"):
            raise DataError("estimator is not fitted; call fit() first")

    def predict(self, X):
        """Per-video detection lists."""
        self._require_fitted()
        _check_inputs(X)
        cfg = (self.localization_config or LocalizationConfig())
        return [localize(seq, self.model_, cfg) for seq in X]

    def predict_proba(self, X):
        """Video-level foreground class probabilities, shape (n_videos, C)."""
        self._require_fitted()
        _check_inputs(X)
        rows = []
        with torch.no_grad():
            for seq in X:
                fwd = self.model_(as_tensor(seq.features))
                agg = topk_mean_aggregate(fwd.cas_supp, self.topk_ratio)
                rows.append(torch.sigmoid(agg[:-1]).numpy())
        return np.stack(rows)

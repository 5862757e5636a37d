"""Weakly-supervised temporal action localization with local-global
background modeling."""

from .ensemble import ensemble_detections, normalize_scores
from .errors import ConfigError, DataError, LGBMNetError, NumericalError
from .estimator import TemporalActionLocalizer
from .evaluation import EvalReport, average_precision, evaluate, tiou
from .features import (DatasetManifest, FeatureSequence, SynthConfig,
                       VideoAnnotation, generate_synthetic_dataset,
                       load_annotations, load_dataset, load_features,
                       save_annotations, write_dataset, write_features)
from .localization import (Detection, LocalizationConfig, Proposal,
                           cas_to_activation, localize, nms, score_proposal,
                           watershed_proposals)
from .model import (ForwardOutput, LGBMNet, ModelConfig, build_model,
                    load_checkpoint, save_checkpoint)
from .training import (TrainConfig, attention_supervision_loss, branch_targets,
                       topk_mean_aggregate, total_loss, train,
                       video_classification_loss)

__version__ = "0.1.0"

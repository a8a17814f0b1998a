"""Hand-flapping detection from hand-landmark time series."""

__version__ = "0.1.0"

from .augmentation import AugmentationParams, apply_augmentation, sample_augmentation
from .data import (
    Clip,
    DatasetManifest,
    Hand,
    HandFrame,
    Label,
    LandmarkFrame,
    LandmarkPoint,
    ManifestEntry,
    load_clip,
    load_dataset,
    load_manifest,
    save_clip,
    save_manifest,
)
from .errors import FlapnetError, ParseError, ValidationError
from .evaluation import (
    AggregateReport,
    Metrics,
    confusion_metrics,
    cross_validate,
    emit_report,
    roc_auroc,
    stratified_kfold,
)
from .features import FeatureSelection, SEQ_LEN, build_features, effective_dim
from .model import (
    AdamState,
    ModelConfig,
    ModelParameters,
    adam_step,
    backward,
    bce_loss,
    forward,
    init_parameters,
    load_model,
    lstm_forward,
    param_count,
    predict,
    save_model,
    train,
)
from .segmentation import Annotation, Behavior, SpanPlan, cut_clip, plan_spans
from .synth import synth_generate

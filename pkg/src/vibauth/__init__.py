"""Vibration-based user authentication for head-mounted devices."""

from .authentication import (
    AuthDecision,
    AuthenticationEnsemble,
    authenticate,
    build_ensemble,
    decide,
)
from .classifier import (
    ClassifierModel,
    TrainConfig,
    predict,
    predict_proba,
    split_dataset,
    train_classifier,
)
from .config import RunConfig
from .errors import VibauthError
from .estimators import FeatureExtractor, TwoStepAuthenticator, VibrationUserClassifier
from .evaluation import EvalReport, compute_metrics, evaluate_ensemble, sweep
from .features import FeaturePair, extract_features, featurize_recordings
from .mfcc import MfccConfig, compute_mfcc
from .recording import GESTURES, BurstSegment, VibrationRecording
from .segmentation import clip_sample, detect_burst, to_primitive_feature
from .synth import generate_corpus, generate_recording, make_impostor, make_user

__version__ = "0.1.0"

__all__ = [
    "AuthDecision",
    "AuthenticationEnsemble",
    "BurstSegment",
    "ClassifierModel",
    "EvalReport",
    "FeatureExtractor",
    "FeaturePair",
    "GESTURES",
    "MfccConfig",
    "RunConfig",
    "TrainConfig",
    "TwoStepAuthenticator",
    "VibauthError",
    "VibrationRecording",
    "VibrationUserClassifier",
    "authenticate",
    "build_ensemble",
    "clip_sample",
    "compute_metrics",
    "compute_mfcc",
    "decide",
    "detect_burst",
    "evaluate_ensemble",
    "extract_features",
    "featurize_recordings",
    "generate_corpus",
    "generate_recording",
    "make_impostor",
    "make_user",
    "predict",
    "predict_proba",
    "split_dataset",
    "sweep",
    "to_primitive_feature",
    "train_classifier",
]

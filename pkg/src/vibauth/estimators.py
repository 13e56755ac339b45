"""Estimator-style wrappers over the functional pipeline.

These follow the fit/transform/predict and get_params conventions so the
pipeline composes with the wider ecosystem; all numerical work stays in the
underlying modules.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin

from .authentication import AuthDecision, authenticate, build_ensemble
from .classifier import TrainConfig, predict, predict_proba, train_classifier
from .features import FeaturePair, extract_features, stack_pairs
from .recording import VibrationRecording


class FeatureExtractor(BaseEstimator, TransformerMixin):
    """Stateless transformer from recordings to FeaturePairs."""

    def __init__(
        self,
        duration_ms: float = 1000.0,
        window_ms: float = 50.0,
        step_ms: float = 5.0,
        ratio_threshold: float = 5.0,
    ):
        self.duration_ms = duration_ms
        self.window_ms = window_ms
        self.step_ms = step_ms
        self.ratio_threshold = ratio_threshold

    def fit(self, X: list[VibrationRecording], y=None):
        return self

    def transform(self, X: list[VibrationRecording]) -> list[FeaturePair]:
        return [
            extract_features(
                rec,
                self.duration_ms,
                window_ms=self.window_ms,
                step_ms=self.step_ms,
                ratio_threshold=self.ratio_threshold,
            )
            for rec in X
        ]


class VibrationUserClassifier(BaseEstimator, ClassifierMixin):
    """Multiclass user classifier over FeaturePairs.

    y defaults to the user labels carried by the pairs. Fitted attributes:
    model_ (the trained weights) and classes_ (user ids by class index).
    """

    def __init__(
        self,
        learning_rate: float = 1e-3,
        batch_size: int = 32,
        n_epochs: int = 50,
        seed: int = 0,
    ):
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.n_epochs = n_epochs
        self.seed = seed

    def _config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            n_epochs=self.n_epochs,
            seed=self.seed,
        )

    def fit(self, X: list[FeaturePair], y=None):
        if y is None:
            y = [pair.user for pair in X]
        if any(label is None for label in y):
            raise ValueError("every training pair needs a user label")
        users = tuple(sorted(set(y)))
        index_of = {user: i for i, user in enumerate(users)}
        labels = np.array([index_of[label] for label in y], dtype=np.int64)
        primitive, mfcc = stack_pairs(X)
        self.model_ = train_classifier(
            primitive, mfcc, labels, self._config(), n_classes=len(users), users=users
        )
        self.classes_ = np.array(users)
        return self

    def predict_proba(self, X: list[FeaturePair]) -> np.ndarray:
        primitive, mfcc = stack_pairs(X)
        return predict_proba(self.model_, primitive, mfcc)

    def predict(self, X: list[FeaturePair]) -> np.ndarray:
        primitive, mfcc = stack_pairs(X)
        return self.classes_[predict(self.model_, primitive, mfcc)]


class TwoStepAuthenticator(BaseEstimator):
    """Trains the classifier ensemble and applies the two-step rule.

    predict maps each pair to the accepted user id, or 0 for a rejection.
    """

    def __init__(
        self,
        alpha: float = 0.9,
        beta: float = 0.8,
        learning_rate: float = 1e-3,
        batch_size: int = 32,
        n_epochs: int = 50,
        seed: int = 0,
    ):
        self.alpha = alpha
        self.beta = beta
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.n_epochs = n_epochs
        self.seed = seed

    def fit(self, X: list[FeaturePair], y=None):
        if y is None:
            y = [pair.user for pair in X]
        if any(label is None for label in y):
            raise ValueError("every training pair needs a user label")
        primitive, mfcc = stack_pairs(X)
        config = TrainConfig(
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            n_epochs=self.n_epochs,
            seed=self.seed,
        )
        self.ensemble_ = build_ensemble(primitive, mfcc, np.array(y), config)
        return self

    def decide(self, pair: FeaturePair, verbose: bool = False) -> AuthDecision:
        return authenticate(
            self.ensemble_, pair.primitive, pair.mfcc, self.alpha, self.beta, verbose
        )

    def predict(self, X: list[FeaturePair]) -> np.ndarray:
        out = np.zeros(len(X), dtype=np.int64)
        for i, pair in enumerate(X):
            decision = self.decide(pair)
            out[i] = decision.candidate if decision.accepted else 0
        return out

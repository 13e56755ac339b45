"""Error-rate evaluation of a trained ensemble.

Definitions used throughout:
  FAR  = accepted impostor samples / all impostor samples
  FRR  = (rejected + accepted-as-wrong-user legitimate samples) / all legit
  accuracy = correctly accepted legitimate samples / all legit
so accuracy + FRR = 1 on the legitimate set. The classification confusion
matrix ignores thresholds and records the base classifier's candidate.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .authentication import (
    AuthDecision,
    AuthenticationEnsemble,
    build_ensemble,
    decide,
)
from .classifier import TrainConfig, predict_proba, split_dataset
from .errors import ShapeMismatch
from .features import featurize_recordings
from .recording import VibrationRecording


@dataclass(frozen=True)
class GestureMetrics:
    n_legitimate: int
    n_impostor: int
    accuracy: float
    far: float
    frr: float


@dataclass(frozen=True)
class EvalReport:
    users: tuple[int, ...]
    n_legitimate: int
    n_impostor: int
    accuracy: float
    far: float
    frr: float
    classification_accuracy: float
    confusion_classification: np.ndarray  # (N, N): true user x candidate
    confusion_auth: np.ndarray  # (N+1, N+1): row 0 impostor, col 0 reject
    per_gesture: dict[str, GestureMetrics] = field(default_factory=dict)


def batch_decisions(
    ensemble: AuthenticationEnsemble,
    primitive: np.ndarray,
    mfcc: np.ndarray,
    alpha: float,
    beta: float,
) -> list[AuthDecision]:
    """Decide every sample, batching the classifier forward passes.

    Member classifiers only run on samples whose step-one confidence could
    pass, which keeps impostor-heavy evaluations cheap.
    """
    n = primitive.shape[0]
    base = predict_proba(ensemble.base, primitive, mfcc)
    passing = np.flatnonzero(base.max(axis=1) >= alpha)
    member_probs: dict[int, np.ndarray] = {}
    if passing.size:
        for user, model in ensemble.members.items():
            member_probs[user] = predict_proba(model, primitive[passing], mfcc[passing])
    row_of = {int(i): r for r, i in enumerate(passing)}
    decisions = []
    for i in range(n):
        def lookup(user: int, i: int = i):
            model = ensemble.members[user]
            return member_probs[user][row_of[i]], model.users

        decisions.append(decide(base[i], ensemble.users, lookup, alpha, beta))
    return decisions


def compute_metrics(
    users: tuple[int, ...],
    legit_decisions: Sequence[AuthDecision],
    legit_users: Sequence[int],
    impostor_decisions: Sequence[AuthDecision] = (),
    legit_gestures: Sequence[str] | None = None,
    impostor_gestures: Sequence[str] | None = None,
) -> EvalReport:
    """Aggregate decisions into an EvalReport.

    legit_users gives the true identity of each legitimate decision. Gesture
    sequences, when provided, must parallel their decision sequences and
    switch on the per-gesture breakdown.
    """
    if len(legit_decisions) != len(legit_users):
        raise ShapeMismatch("legit decisions and true users differ in length")
    if legit_gestures is not None and len(legit_gestures) != len(legit_decisions):
        raise ShapeMismatch("legit gestures and decisions differ in length")
    if impostor_gestures is not None and len(impostor_gestures) != len(impostor_decisions):
        raise ShapeMismatch("impostor gestures and decisions differ in length")
    index_of = {user: i for i, user in enumerate(users)}
    n = len(users)
    conf_cls = np.zeros((n, n), dtype=np.int64)
    conf_auth = np.zeros((n + 1, n + 1), dtype=np.int64)
    correct_accepts = 0
    for decision, true_user in zip(legit_decisions, legit_users):
        t = index_of[true_user]
        conf_cls[t, index_of[decision.step_one.candidate]] += 1
        if decision.accepted:
            conf_auth[t + 1, index_of[decision.candidate] + 1] += 1
            if decision.candidate == true_user:
                correct_accepts += 1
        else:
            conf_auth[t + 1, 0] += 1
    far_hits = 0
    for decision in impostor_decisions:
        if decision.accepted:
            conf_auth[0, index_of[decision.candidate] + 1] += 1
            far_hits += 1
        else:
            conf_auth[0, 0] += 1
    n_legit = len(legit_decisions)
    n_imp = len(impostor_decisions)
    accuracy = correct_accepts / n_legit if n_legit else 0.0
    per_gesture: dict[str, GestureMetrics] = {}
    if legit_gestures is not None or impostor_gestures is not None:
        names = sorted(set(legit_gestures or ()) | set(impostor_gestures or ()))
        for name in names:
            lg = [
                (d, u)
                for d, u, g in zip(legit_decisions, legit_users, legit_gestures or ())
                if g == name
            ]
            ig = [
                d
                for d, g in zip(impostor_decisions, impostor_gestures or ())
                if g == name
            ]
            ok = sum(1 for d, u in lg if d.accepted and d.candidate == u)
            acc = ok / len(lg) if lg else 0.0
            per_gesture[name] = GestureMetrics(
                n_legitimate=len(lg),
                n_impostor=len(ig),
                accuracy=acc,
                far=sum(1 for d in ig if d.accepted) / len(ig) if ig else 0.0,
                frr=1.0 - acc if lg else 0.0,
            )
    return EvalReport(
        users=users,
        n_legitimate=n_legit,
        n_impostor=n_imp,
        accuracy=accuracy,
        far=far_hits / n_imp if n_imp else 0.0,
        frr=1.0 - accuracy if n_legit else 0.0,
        classification_accuracy=(
            float(np.trace(conf_cls) / conf_cls.sum()) if conf_cls.sum() else 0.0
        ),
        confusion_classification=conf_cls,
        confusion_auth=conf_auth,
        per_gesture=per_gesture,
    )


def evaluate_ensemble(
    ensemble: AuthenticationEnsemble,
    legit: tuple[np.ndarray, np.ndarray, Sequence[int], Sequence[str]],
    impostor: tuple[np.ndarray, np.ndarray, Sequence[str]],
    alpha: float,
    beta: float,
) -> EvalReport:
    """Decide both sample sets and aggregate the metrics."""
    prim_l, mfcc_l, users_l, gestures_l = legit
    prim_i, mfcc_i, gestures_i = impostor
    legit_decisions = batch_decisions(ensemble, prim_l, mfcc_l, alpha, beta)
    impostor_decisions = (
        batch_decisions(ensemble, prim_i, mfcc_i, alpha, beta) if len(prim_i) else []
    )
    return compute_metrics(
        ensemble.users,
        legit_decisions,
        list(users_l),
        impostor_decisions,
        legit_gestures=list(gestures_l),
        impostor_gestures=list(gestures_i),
    )


def report_as_dict(report: EvalReport) -> dict:
    return {
        "users": list(report.users),
        "n_legitimate": report.n_legitimate,
        "n_impostor": report.n_impostor,
        "accuracy": report.accuracy,
        "far": report.far,
        "frr": report.frr,
        "classification_accuracy": report.classification_accuracy,
        "confusion_classification": report.confusion_classification.tolist(),
        "confusion_auth": report.confusion_auth.tolist(),
        "per_gesture": {
            name: {
                "n_legitimate": m.n_legitimate,
                "n_impostor": m.n_impostor,
                "accuracy": m.accuracy,
                "far": m.far,
                "frr": m.frr,
            }
            for name, m in report.per_gesture.items()
        },
    }


@dataclass(frozen=True)
class SweepCell:
    duration_ms: float
    n_users: int
    report: EvalReport


def sweep(
    legit_recordings: list[VibrationRecording],
    impostor_recordings: list[VibrationRecording],
    durations_ms: Sequence[float],
    user_counts: Sequence[int],
    config: TrainConfig,
    alpha: float,
    beta: float,
    train_fraction: float = 0.6,
    split_seed: int = 0,
) -> list[SweepCell]:
    """Train and evaluate one ensemble per (duration, user-count) cell.

    Each cell restricts the corpus to the n lowest user ids, re-extracts
    features at that duration, splits stratified, trains a fresh ensemble,
    and scores it against every impostor recording.
    """
    all_users = sorted({r.user for r in legit_recordings})
    cells: list[SweepCell] = []
    for duration_ms in durations_ms:
        legit_feats = featurize_recordings(legit_recordings, duration_ms)
        imp_feats = (
            featurize_recordings(impostor_recordings, duration_ms)
            if impostor_recordings
            else (np.zeros((0, 1, 1, 1)), np.zeros((0, 1, 1, 1)), [], [])
        )
        prim, mfcc, rec_users, rec_gestures = legit_feats
        rec_users_arr = np.array(rec_users)
        for n_users in user_counts:
            chosen = set(all_users[:n_users])
            mask = np.array([u in chosen for u in rec_users])
            p, m = prim[mask], mfcc[mask]
            u = rec_users_arr[mask]
            g = np.array(rec_gestures)[mask]
            train_idx, test_idx = split_dataset(u, g, train_fraction, split_seed)
            ensemble = build_ensemble(p[train_idx], m[train_idx], u[train_idx], config)
            report = evaluate_ensemble(
                ensemble,
                (p[test_idx], m[test_idx], u[test_idx].tolist(), g[test_idx].tolist()),
                (imp_feats[0], imp_feats[1], imp_feats[3]),
                alpha,
                beta,
            )
            cells.append(SweepCell(duration_ms=duration_ms, n_users=n_users, report=report))
    return cells


def write_summary_csv(path: Path, cells: Sequence[SweepCell]) -> None:
    """One row per cell and gesture; gesture 'all' is the pooled result."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["duration_ms", "n_users", "gesture", "accuracy", "far", "frr"])
        for cell in cells:
            r = cell.report
            writer.writerow(
                [cell.duration_ms, cell.n_users, "all", f"{r.accuracy:.6f}", f"{r.far:.6f}", f"{r.frr:.6f}"]
            )
            for name in sorted(cell.report.per_gesture):
                m = cell.report.per_gesture[name]
                writer.writerow(
                    [cell.duration_ms, cell.n_users, name, f"{m.accuracy:.6f}", f"{m.far:.6f}", f"{m.frr:.6f}"]
                )

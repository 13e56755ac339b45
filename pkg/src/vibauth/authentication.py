"""Two-step acceptance decision over an ensemble of user classifiers.

One base classifier knows all N enrolled users; each of N leave-one-out
members is trained with a different user removed. A sample is accepted only
if the base classifier names a user with confidence at or above alpha, and
every member that was not trained without that user both agrees on the name
and clears beta. Members are consulted in ascending user order and the scan
stops at the first failure unless verbose evaluation is requested.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .classifier import (
    ClassifierModel,
    TrainConfig,
    predict_proba,
    retrain_without,
    train_classifier,
)
from .errors import ShapeMismatch, TooFewUsers, UnknownCandidate
from .validation import check_probability

MIN_USERS = 3


@dataclass(frozen=True)
class StepOneResult:
    candidate: int
    confidence: float
    passed: bool


@dataclass(frozen=True)
class MemberEvidence:
    """Vote of one leave-one-out member about a step-one candidate."""

    member: int
    predicted: int
    confidence: float
    agrees: bool
    passed: bool


@dataclass(frozen=True)
class AuthDecision:
    accepted: bool
    candidate: int | None
    alpha: float
    beta: float
    step_one: StepOneResult
    evidence: tuple[MemberEvidence, ...]


@dataclass
class AuthenticationEnsemble:
    """Base classifier over all users plus one leave-one-out member each."""

    users: tuple[int, ...]
    base: ClassifierModel
    members: dict[int, ClassifierModel]

    def __post_init__(self) -> None:
        if len(self.users) < MIN_USERS:
            raise TooFewUsers(f"need at least {MIN_USERS} users, got {len(self.users)}")
        if tuple(sorted(self.users)) != self.users:
            raise ValueError("ensemble users must be sorted ascending")
        if set(self.members) != set(self.users):
            raise ValueError("ensemble needs exactly one member per user")


MemberProbs = Callable[[int], tuple[np.ndarray, tuple[int, ...]]]


def evaluate_step_one(
    base_probs: np.ndarray, users: tuple[int, ...], alpha: float
) -> StepOneResult:
    """Candidate identity from the base classifier; ties pick the lowest id."""
    if base_probs.shape != (len(users),):
        raise ShapeMismatch(f"expected {len(users)} probabilities, got {base_probs.shape}")
    idx = int(np.argmax(base_probs))
    confidence = float(base_probs[idx])
    return StepOneResult(users[idx], confidence, confidence >= alpha)


def evaluate_member(
    member: int,
    probs: np.ndarray,
    member_users: tuple[int, ...],
    candidate: int,
    beta: float,
) -> MemberEvidence:
    idx = int(np.argmax(probs))
    predicted = member_users[idx]
    confidence = float(probs[idx])
    agrees = predicted == candidate
    return MemberEvidence(member, predicted, confidence, agrees, agrees and confidence >= beta)


def decide(
    base_probs: np.ndarray,
    users: tuple[int, ...],
    member_probs: MemberProbs,
    alpha: float,
    beta: float,
    verbose: bool = False,
) -> AuthDecision:
    """Run the full two-step rule over probability vectors.

    member_probs(user) must return that member's probability vector and the
    user ids its entries refer to; it is only called for members actually
    consulted, so a short-circuited rejection never evaluates later members.
    """
    check_probability(alpha, "alpha")
    check_probability(beta, "beta")
    step_one = evaluate_step_one(base_probs, users, alpha)
    if not step_one.passed:
        return AuthDecision(False, None, alpha, beta, step_one, ())
    candidate = step_one.candidate
    if candidate not in users:
        raise UnknownCandidate(f"candidate {candidate} is not an enrolled user")
    evidence: list[MemberEvidence] = []
    for member in users:
        if member == candidate:
            continue
        probs, member_users = member_probs(member)
        entry = evaluate_member(member, probs, member_users, candidate, beta)
        evidence.append(entry)
        if not entry.passed and not verbose:
            return AuthDecision(False, candidate, alpha, beta, step_one, tuple(evidence))
    accepted = all(entry.passed for entry in evidence)
    return AuthDecision(accepted, candidate, alpha, beta, step_one, tuple(evidence))


def authenticate(
    ensemble: AuthenticationEnsemble,
    primitive: np.ndarray,
    mfcc: np.ndarray,
    alpha: float,
    beta: float,
    verbose: bool = False,
) -> AuthDecision:
    """Decide one sample given its two feature tensors (3, rows, cols)."""
    prim_batch = primitive[None]
    mfcc_batch = mfcc[None]
    base_probs = predict_proba(ensemble.base, prim_batch, mfcc_batch)[0]

    def member_probs(user: int) -> tuple[np.ndarray, tuple[int, ...]]:
        member = ensemble.members[user]
        return predict_proba(member, prim_batch, mfcc_batch)[0], member.users

    return decide(base_probs, ensemble.users, member_probs, alpha, beta, verbose)


def build_ensemble(
    primitive: np.ndarray,
    mfcc: np.ndarray,
    user_ids: np.ndarray,
    config: TrainConfig,
) -> AuthenticationEnsemble:
    """Train the base classifier and all leave-one-out members.

    The base model trains with config.seed; the member excluding the j-th
    user (ascending order, 1-based) trains with config.seed + j, so every
    model is reproducible in isolation.
    """
    user_ids = np.asarray(user_ids, dtype=np.int64)
    users = tuple(sorted(set(user_ids.tolist())))
    if len(users) < MIN_USERS:
        raise TooFewUsers(f"need at least {MIN_USERS} users, got {len(users)}")
    index_of = {user: i for i, user in enumerate(users)}
    labels = np.array([index_of[u] for u in user_ids.tolist()], dtype=np.int64)
    base = train_classifier(
        primitive, mfcc, labels, config, n_classes=len(users), users=users
    )
    members: dict[int, ClassifierModel] = {}
    for j, user in enumerate(users, start=1):
        member_config = replace(config, seed=config.seed + j)
        members[user] = retrain_without(
            primitive, mfcc, labels, exclude=j - 1, config=member_config, users=users
        )
    return AuthenticationEnsemble(users=users, base=base, members=members)


def decision_as_dict(decision: AuthDecision) -> dict:
    """JSON-ready rendering of a decision, evidence in consulted order."""
    return {
        "accepted": decision.accepted,
        "candidate": decision.candidate,
        "alpha": decision.alpha,
        "beta": decision.beta,
        "step_one": {
            "candidate": decision.step_one.candidate,
            "confidence": decision.step_one.confidence,
            "passed": decision.step_one.passed,
        },
        "evidence": [
            {
                "member": entry.member,
                "predicted": entry.predicted,
                "confidence": entry.confidence,
                "agrees": entry.agrees,
                "passed": entry.passed,
            }
            for entry in decision.evidence
        ],
    }

"""Acceptance gate: one test per shipping criterion, one printed line each.

The heavyweight fixtures (synthetic corpus, feature tensors, trained
ensemble) are shared module-wide so the end-to-end budget is paid once.
"""

import time

import numpy as np
import pytest

from vibauth.authentication import build_ensemble, decide
from vibauth.classifier import TrainConfig, predict_proba, split_dataset, train_classifier
from vibauth.cli import main
from vibauth.evaluation import compute_metrics
from vibauth.features import extract_features, featurize_recordings
from vibauth.network import (
    batchnorm_forward,
    batchnorm_backward,
    conv2d_backward,
    conv2d_forward,
    cross_entropy,
    dense_backward,
    dense_forward,
    maxpool_backward,
    maxpool_forward,
    relu_backward,
    relu_forward,
    softmax,
    softmax_cross_entropy_grad,
)
from vibauth.recording import GESTURES
from vibauth.segmentation import detect_burst
from vibauth.synth import PAD_MS, SAMPLE_RATE_HZ, generate_recording, make_impostor, make_user

SEED = 0
N_USERS = 10
N_IMPOSTORS = 10
PER_GESTURE = 20
DURATION_MS = 1000.0
ALPHA, BETA = 0.9, 0.8
TRAIN = TrainConfig(learning_rate=2e-3, batch_size=32, n_epochs=6, seed=SEED)

TIMINGS: dict[str, float] = {}


def report(criterion: int, passed: bool, detail: str) -> None:
    print(f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}")
    assert passed, f"criterion {criterion}: {detail}"


# --- shared heavyweight fixtures ------------------------------------------

@pytest.fixture(scope="module")
def corpus():
    """All recordings of the reference synthetic cohort, in memory."""
    t0 = time.monotonic()
    legit = []
    for user in range(1, N_USERS + 1):
        profile = make_user(SEED, user)
        for gesture in GESTURES:
            for index in range(PER_GESTURE):
                legit.append(generate_recording(SEED, profile, gesture, index))
    impostors = []
    for k in range(N_IMPOSTORS):
        profile = make_impostor(SEED, k)
        for gesture in GESTURES:
            for index in range(PER_GESTURE):
                impostors.append(generate_recording(SEED, profile, gesture, index))
    TIMINGS["synth"] = time.monotonic() - t0
    return legit, impostors


@pytest.fixture(scope="module")
def features(corpus):
    legit, impostors = corpus
    t0 = time.monotonic()
    legit_feats = featurize_recordings(legit, DURATION_MS)
    imp_feats = featurize_recordings(impostors, DURATION_MS)
    TIMINGS["featurize"] = time.monotonic() - t0
    return legit_feats, imp_feats


@pytest.fixture(scope="module")
def trained(features):
    (prim, mfcc, users, gestures), _ = features
    users_arr = np.array(users)
    gestures_arr = np.array(gestures)
    train_idx, test_idx = split_dataset(users_arr, gestures_arr, 0.6, SEED)
    t0 = time.monotonic()
    ensemble = build_ensemble(prim[train_idx], mfcc[train_idx], users_arr[train_idx], TRAIN)
    TIMINGS["train"] = time.monotonic() - t0
    return ensemble, train_idx, test_idx


@pytest.fixture(scope="module")
def decision_tables(trained, features):
    """Classifier probabilities for the fixed test set, computed once.

    Member probabilities are cached for every sample whose step-one
    confidence clears the loosest alpha under test (0.9), which covers all
    stricter thresholds.
    """
    ensemble, _, test_idx = trained
    (prim, mfcc, users, gestures), (iprim, imfcc, _, igestures) = features
    users_arr = np.array(users)
    gestures_arr = np.array(gestures)
    all_prim = np.concatenate([prim[test_idx], iprim])
    all_mfcc = np.concatenate([mfcc[test_idx], imfcc])
    t0 = time.monotonic()
    base = predict_proba(ensemble.base, all_prim, all_mfcc)
    passing = np.flatnonzero(base.max(axis=1) >= ALPHA)
    member_cache: dict[int, dict[int, np.ndarray]] = {}
    for user, model in ensemble.members.items():
        probs = predict_proba(model, all_prim[passing], all_mfcc[passing])
        member_cache[user] = {int(i): probs[r] for r, i in enumerate(passing)}
    TIMINGS["eval"] = time.monotonic() - t0
    return {
        "ensemble": ensemble,
        "base": base,
        "member_cache": member_cache,
        "n_legit": test_idx.size,
        "legit_users": users_arr[test_idx].tolist(),
        "legit_gestures": gestures_arr[test_idx].tolist(),
        "impostor_gestures": list(igestures),
    }


def cached_decisions(tables, alpha, beta):
    ensemble = tables["ensemble"]
    member_users = {u: m.users for u, m in ensemble.members.items()}
    decisions = []
    for i in range(tables["base"].shape[0]):
        def lookup(user, i=i):
            return tables["member_cache"][user][i], member_users[user]

        decisions.append(decide(tables["base"][i], ensemble.users, lookup, alpha, beta))
    return decisions


# --- FD helpers for the gradient suite ------------------------------------

EPS = 1e-5


def numeric_grad(f, x):
    grad = np.zeros_like(x)
    flat, gflat = x.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + EPS
        hi = f()
        flat[i] = orig - EPS
        lo = f()
        flat[i] = orig
        gflat[i] = (hi - lo) / (2.0 * EPS)
    return grad


def rel_err(a, b):
    denom = max(np.linalg.norm(b), 1e-12)
    return np.linalg.norm(a - b) / denom


# --- criteria ---------------------------------------------------------------

def test_criterion_1_feature_shapes():
    rec = generate_recording(SEED, make_user(SEED, 1), "Standing", 0)
    t0 = time.monotonic()
    pair = extract_features(rec, DURATION_MS)
    elapsed = time.monotonic() - t0
    ok = (
        pair.mfcc.shape == (3, 98, 39)
        and pair.primitive.shape == (3, 50, 40)
        and elapsed < 1.0
    )
    report(
        1,
        ok,
        f"mfcc {pair.mfcc.shape[1:]} primitive {pair.primitive.shape[1:]}"
        f" in {elapsed * 1000:.0f} ms",
    )


def test_criterion_2_gradient_suite():
    rng = np.random.default_rng(12)
    t0 = time.monotonic()
    shapes: set[tuple] = set()
    worst = 0.0

    def check(tag, shape, analytic, numeric):
        nonlocal worst
        shapes.add((tag, tuple(shape)))
        worst = max(worst, rel_err(analytic, numeric))

    for bshape, kshape in [
        ((2, 3, 6, 5), (4, 3, 3, 3)),
        ((1, 2, 5, 7), (3, 2, 1, 3)),
        ((3, 1, 4, 4), (2, 1, 5, 3)),
    ]:
        x = rng.normal(0, 1, bshape)
        k = rng.normal(0, 0.5, kshape)
        b = rng.normal(0, 0.5, kshape[0])
        out, cache = conv2d_forward(x, k, b)
        proj = rng.normal(0, 1, out.shape)
        dx, dk, db = conv2d_backward(proj, cache)
        loss = lambda: float((conv2d_forward(x, k, b)[0] * proj).sum())
        check("conv.x", x.shape, dx, numeric_grad(loss, x))
        check("conv.k", k.shape, dk, numeric_grad(loss, k))
        check("conv.b", b.shape, db, numeric_grad(loss, b))

    for shape, train in [
        ((4, 3, 5, 2), True),
        ((2, 5, 3, 3), True),
        ((3, 2, 2, 4), True),
        ((2, 4, 3, 5), False),
    ]:
        c = shape[1]
        x = rng.normal(0, 2, shape)
        gamma = rng.uniform(0.5, 1.5, c)
        beta = rng.normal(0, 0.5, c)
        mean = rng.normal(0, 0.2, c)
        var = rng.uniform(0.5, 2.0, c)
        out, cache, _, _ = batchnorm_forward(x, gamma, beta, mean, var, train)
        proj = rng.normal(0, 1, out.shape)
        dx, dgamma, dbeta = batchnorm_backward(proj, cache)
        loss = lambda: float(
            (batchnorm_forward(x, gamma, beta, mean, var, train)[0] * proj).sum()
        )
        tag = "bn.train" if train else "bn.eval"
        check(f"{tag}.x", x.shape, dx, numeric_grad(loss, x))
        check(f"{tag}.gamma", gamma.shape, dgamma, numeric_grad(loss, gamma))
        check(f"{tag}.beta", beta.shape, dbeta, numeric_grad(loss, beta))

    for shape, pool in [((2, 3, 6, 8), (2, 2)), ((1, 4, 9, 6), (3, 3)), ((2, 2, 5, 7), (2, 3))]:
        size = int(np.prod(shape))
        x = 0.1 * rng.permutation(size).astype(float).reshape(shape)
        out, cache = maxpool_forward(x, pool)
        proj = rng.normal(0, 1, out.shape)
        dx = maxpool_backward(proj, cache)
        loss = lambda: float((maxpool_forward(x, pool)[0] * proj).sum())
        check("maxpool.x", x.shape, dx, numeric_grad(loss, x))

    for shape in [(3, 4, 5, 2), (2, 7, 3, 3)]:
        x = rng.normal(0, 1, shape)
        x += np.where(x >= 0, 0.05, -0.05)  # keep clear of the kink
        out, cache = relu_forward(x)
        proj = rng.normal(0, 1, out.shape)
        dx = relu_backward(proj, cache)
        loss = lambda: float((relu_forward(x)[0] * proj).sum())
        check("relu.x", x.shape, dx, numeric_grad(loss, x))

    for n, d, k in [(4, 7, 3), (2, 11, 5), (6, 4, 2)]:
        x = rng.normal(0, 1, (n, d))
        w = rng.normal(0, 0.5, (d, k))
        b = rng.normal(0, 0.5, k)
        out, cache = dense_forward(x, w, b)
        proj = rng.normal(0, 1, out.shape)
        dx, dw, db = dense_backward(proj, cache)
        loss = lambda: float((dense_forward(x, w, b)[0] * proj).sum())
        check("dense.x", x.shape, dx, numeric_grad(loss, x))
        check("dense.w", w.shape, dw, numeric_grad(loss, w))
        check("dense.b", b.shape, db, numeric_grad(loss, b))

    for n, k in [(4, 5), (2, 3), (7, 4)]:
        logits = rng.normal(0, 1, (n, k))
        labels = rng.integers(0, k, n)
        analytic = softmax_cross_entropy_grad(softmax(logits), labels)
        loss = lambda: float(cross_entropy(softmax(logits), labels).sum())
        check("softmax_ce.logits", logits.shape, analytic, numeric_grad(loss, logits))

    elapsed = time.monotonic() - t0
    ok = worst <= 1e-6 and len(shapes) >= 20 and elapsed < 120.0
    report(
        2,
        ok,
        f"{len(shapes)} shapes, worst rel err {worst:.2e}, {elapsed:.1f} s",
    )


def test_criterion_3_algebraic_invariants():
    rng = np.random.default_rng(21)
    logits = rng.normal(0, 3, (50, 7))
    probs = softmax(logits)
    sums_ok = np.abs(probs.sum(axis=1) - 1.0).max() <= 1e-12
    shift_ok = (
        np.abs(softmax(logits + rng.normal(0, 5, (50, 1))) - probs).max() <= 1e-12
    )

    onehot = np.zeros((4, 6))
    labels = np.array([2, 0, 5, 3])
    onehot[np.arange(4), labels] = 1.0
    ce_onehot_ok = np.abs(cross_entropy(onehot, labels)).max() <= 1e-12
    uniform = np.full((4, 6), 1.0 / 6.0)
    ce_uniform_ok = np.abs(cross_entropy(uniform, labels) - np.log(6.0)).max() <= 1e-12

    # Batch variance must dwarf the 1e-5 stabilizer for the unit-variance
    # check to be meaningful at 1e-6.
    x = rng.normal(0.0, 50.0, (8, 4, 6, 5))
    out, _, _, _ = batchnorm_forward(
        x, np.ones(4), np.zeros(4), np.zeros(4), np.ones(4), train=True
    )
    ch_mean = out.mean(axis=(0, 2, 3))
    ch_var = out.var(axis=(0, 2, 3))
    bn_ok = np.abs(ch_mean).max() < 1e-9 and np.abs(ch_var - 1.0).max() <= 1e-6

    ok = sums_ok and shift_ok and ce_onehot_ok and ce_uniform_ok and bn_ok
    report(
        3,
        ok,
        f"softmax sum/shift {sums_ok}/{shift_ok}, cross-entropy onehot/uniform"
        f" {ce_onehot_ok}/{ce_uniform_ok}, batchnorm moments {bn_ok}",
    )


def test_criterion_4_two_step_oracle():
    def oracle(base, users, tables, alpha, beta):
        best = int(np.argmax(base))
        if base[best] < alpha:
            return False, None
        candidate = users[best]
        for member in users:
            if member == candidate:
                continue
            probs, member_users = tables[member]
            mi = int(np.argmax(probs))
            if member_users[mi] != candidate or probs[mi] < beta:
                return False, candidate
        return True, candidate

    rng = np.random.default_rng(4242)
    t0 = time.monotonic()
    mismatches = 0
    for trial in range(1000):
        n = int(rng.integers(3, 6))
        users = tuple(sorted(rng.choice(np.arange(1, 30), size=n, replace=False).tolist()))
        base = rng.dirichlet(np.ones(n) * rng.uniform(0.3, 3.0))
        tables = {}
        for member in users:
            member_users = tuple(u for u in users if u != member)
            tables[member] = (rng.dirichlet(np.ones(n - 1)), member_users)
        alpha = float(rng.uniform(0.05, 0.95))
        beta = float(rng.uniform(0.05, 0.95))
        got = decide(base, users, lambda u: tables[u], alpha, beta)
        want = oracle(base, users, tables, alpha, beta)
        if (got.accepted, got.candidate) != want:
            mismatches += 1
    elapsed = time.monotonic() - t0
    ok = mismatches == 0 and elapsed < 10.0
    report(4, ok, f"1000 trials, {mismatches} mismatches, {elapsed:.2f} s")


def test_criterion_5_burst_synchronization(corpus):
    legit, _ = corpus
    true_start = int(round(PAD_MS * SAMPLE_RATE_HZ / 1000.0))
    tolerance = int(round(10.0 * SAMPLE_RATE_HZ / 1000.0))
    sample = legit[:: len(legit) // 100][:100]
    assert len(sample) == 100
    hits = 0
    worst_ms = 0.0
    for rec in sample:
        seg = detect_burst(rec)
        err = abs(seg.start_index - true_start)
        worst_ms = max(worst_ms, 1000.0 * err / SAMPLE_RATE_HZ)
        if err <= tolerance:
            hits += 1
    ok = hits == 100
    report(5, ok, f"{hits}/100 within 10 ms (worst {worst_ms:.2f} ms)")


def test_criterion_6_end_to_end(decision_tables):
    decisions = cached_decisions(decision_tables, ALPHA, BETA)
    n_legit = decision_tables["n_legit"]
    ensemble = decision_tables["ensemble"]
    report_obj = compute_metrics(
        ensemble.users,
        decisions[:n_legit],
        decision_tables["legit_users"],
        decisions[n_legit:],
        legit_gestures=decision_tables["legit_gestures"],
        impostor_gestures=decision_tables["impostor_gestures"],
    )
    elapsed = sum(TIMINGS[k] for k in ("synth", "featurize", "train", "eval"))
    ok = (
        report_obj.classification_accuracy >= 0.95
        and report_obj.far <= 0.10
        and report_obj.frr <= 0.10
        and elapsed <= 900.0
    )
    report(
        6,
        ok,
        f"classification {report_obj.classification_accuracy:.3f},"
        f" FAR {report_obj.far:.3f}, FRR {report_obj.frr:.3f},"
        f" {elapsed:.0f} s end to end",
    )


def test_criterion_7_training_convergence(features, trained):
    (prim, mfcc, users, gestures), _ = features
    _, train_idx, _ = trained
    users_arr = np.array(users)
    keep = train_idx[users_arr[train_idx] <= 3]
    labels = users_arr[keep] - 1
    config = TrainConfig(learning_rate=2e-3, batch_size=32, n_epochs=12, seed=SEED)
    model = train_classifier(prim[keep], mfcc[keep], labels, config, n_classes=3)
    trace = np.array(model.loss_trace)
    ratio_ok = trace[-1] < 0.1 * trace[0]
    moving = np.convolve(trace, np.full(5, 0.2), mode="valid")
    monotone_ok = bool(np.all(np.diff(moving) <= 1e-12))
    ok = ratio_ok and monotone_ok and len(trace) <= 50
    report(
        7,
        ok,
        f"loss {trace[0]:.3f} -> {trace[-1]:.4f} over {len(trace)} epochs,"
        f" moving average non-increasing: {monotone_ok}",
    )


def test_criterion_8_determinism(tmp_path, monkeypatch):
    args = [
        "--seed", "3",
        "--n-users", "3",
        "--n-impostors", "1",
        "--per-gesture", "2",
        "--n-epochs", "2",
        "--learning-rate", "0.003",
        "--batch-size", "8",
    ]
    outputs = []
    for run in ("a", "b"):
        root = tmp_path / run
        root.mkdir()
        monkeypatch.chdir(root)
        assert main(["synth", "--out", "corpus"] + args) == 0
        assert main(["train", "--corpus", "corpus", "--out", "model"] + args) == 0
        files = {}
        for sub in ("corpus", "model"):
            for path in sorted((root / sub).iterdir()):
                files[f"{sub}/{path.name}"] = path.read_bytes()
        outputs.append(files)
    first, second = outputs
    same_names = set(first) == set(second)
    diffs = [name for name in first if same_names and first[name] != second[name]]
    ok = same_names and not diffs
    report(
        8,
        ok,
        f"{len(first)} files byte-identical across reruns"
        if ok
        else f"differing files: {diffs or 'name sets differ'}",
    )


def test_criterion_9_threshold_monotonicity(decision_tables):
    def accept_set(alpha, beta):
        return {
            i
            for i, d in enumerate(cached_decisions(decision_tables, alpha, beta))
            if d.accepted
        }

    loose = accept_set(0.9, 0.8)
    strict_alpha = accept_set(0.95, 0.8)
    strict_beta = accept_set(0.9, 0.85)
    alpha_ok = strict_alpha <= loose
    beta_ok = strict_beta <= loose
    ok = alpha_ok and beta_ok
    report(
        9,
        ok,
        f"accept sets {len(strict_alpha)} (alpha 0.95) and {len(strict_beta)}"
        f" (beta 0.85) within {len(loose)} (0.9/0.8): {alpha_ok}/{beta_ok}",
    )

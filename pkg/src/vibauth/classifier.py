"""User classifier: twin conv encoders merged into one softmax head.

The primitive and cepstral encodings of a burst pass through separate
3-stage conv/batchnorm/relu/pool stacks, are concatenated along height,
flattened, and classified by a dense softmax layer. Training is plain
minibatch Adam on cross-entropy with a fixed seed; identical inputs and
config reproduce identical weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyClass, ShapeMismatch, StratumTooSmall
from .network import (
    AdamOptimizer,
    batchnorm_backward,
    batchnorm_forward,
    concat_heights,
    conv2d_backward,
    conv2d_forward,
    cross_entropy,
    dense_backward,
    dense_forward,
    kaiming_uniform,
    maxpool_backward,
    maxpool_forward,
    relu_backward,
    relu_forward,
    softmax,
    softmax_cross_entropy_grad,
    split_heights,
)

Pools = tuple[tuple[int, int], ...]

DEFAULT_CHANNELS = (32, 64, 128)
DEFAULT_PRIMITIVE_POOLS: Pools = ((3, 4), (3, 4), (2, 2))
DEFAULT_MFCC_POOLS: Pools = ((2, 3), (2, 3), (3, 4))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 32
    n_epochs: int = 50
    seed: int = 0
    channels: tuple[int, int, int] = DEFAULT_CHANNELS
    primitive_pools: Pools = DEFAULT_PRIMITIVE_POOLS
    mfcc_pools: Pools = DEFAULT_MFCC_POOLS

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 2:
            raise ValueError("batch_size must be at least 2")
        if self.n_epochs < 1:
            raise ValueError("n_epochs must be at least 1")
        if len(self.channels) != len(self.primitive_pools) or len(self.channels) != len(
            self.mfcc_pools
        ):
            raise ValueError("channels and pool schedules must have equal length")


@dataclass
class ClassifierModel:
    """Trained weights plus the metadata needed to rebuild and reuse them.

    users maps class index to user id; params holds trainable tensors and
    stats the batchnorm running averages, both keyed by layer name.
    """

    n_classes: int
    users: tuple[int, ...]
    primitive_shape: tuple[int, int]
    mfcc_shape: tuple[int, int]
    config: TrainConfig
    params: dict[str, np.ndarray]
    stats: dict[str, np.ndarray]
    loss_trace: list[float] = field(default_factory=list)


def pooled_shape(shape: tuple[int, int], pools: Pools) -> tuple[int, int]:
    """Spatial dims after a pool schedule (floor division per stage)."""
    h, w = shape
    for kh, kw in pools:
        if h < kh or w < kw:
            raise ShapeMismatch(f"pool {(kh, kw)} exceeds remaining dims {(h, w)}")
        h, w = h // kh, w // kw
    return h, w


def init_model(
    n_classes: int,
    primitive_shape: tuple[int, int],
    mfcc_shape: tuple[int, int],
    config: TrainConfig,
    users: tuple[int, ...] | None = None,
) -> ClassifierModel:
    """Build a model with Kaiming-uniform conv/dense weights from the seed."""
    if n_classes < 2:
        raise ValueError("a classifier needs at least two classes")
    ph, pw = pooled_shape(primitive_shape, config.primitive_pools)
    mh, mw = pooled_shape(mfcc_shape, config.mfcc_pools)
    if pw != mw:
        raise ShapeMismatch(
            f"encoder outputs must share width to concatenate: {pw} != {mw}"
        )
    rng = np.random.default_rng(config.seed)
    params: dict[str, np.ndarray] = {}
    stats: dict[str, np.ndarray] = {}
    for prefix in ("prim", "mfcc"):
        cin = 3
        for i, cout in enumerate(config.channels, start=1):
            fan_in = cin * 9
            params[f"{prefix}.conv{i}.kernel"] = kaiming_uniform(
                (cout, cin, 3, 3), fan_in, rng
            )
            params[f"{prefix}.conv{i}.bias"] = np.zeros(cout)
            params[f"{prefix}.bn{i}.gamma"] = np.ones(cout)
            params[f"{prefix}.bn{i}.beta"] = np.zeros(cout)
            stats[f"{prefix}.bn{i}.mean"] = np.zeros(cout)
            stats[f"{prefix}.bn{i}.var"] = np.ones(cout)
            cin = cout
    flat_dim = config.channels[-1] * (ph + mh) * pw
    params["head.weight"] = kaiming_uniform((flat_dim, n_classes), flat_dim, rng)
    params["head.bias"] = np.zeros(n_classes)
    return ClassifierModel(
        n_classes=n_classes,
        users=users if users is not None else tuple(range(n_classes)),
        primitive_shape=primitive_shape,
        mfcc_shape=mfcc_shape,
        config=config,
        params=params,
        stats=stats,
    )


def _encoder_forward(x, params, stats, prefix: str, pools: Pools, train: bool):
    caches = []
    h = x
    for i, pool in enumerate(pools, start=1):
        conv, bn = f"{prefix}.conv{i}", f"{prefix}.bn{i}"
        h, c_conv = conv2d_forward(h, params[f"{conv}.kernel"], params[f"{conv}.bias"])
        h, c_bn, new_mean, new_var = batchnorm_forward(
            h,
            params[f"{bn}.gamma"],
            params[f"{bn}.beta"],
            stats[f"{bn}.mean"],
            stats[f"{bn}.var"],
            train,
        )
        if train:
            stats[f"{bn}.mean"] = new_mean
            stats[f"{bn}.var"] = new_var
        h, c_relu = relu_forward(h)
        h, c_pool = maxpool_forward(h, pool)
        caches.append((c_conv, c_bn, c_relu, c_pool))
    return h, caches


def _encoder_backward(grad, caches, prefix: str, grads: dict) -> None:
    for i in range(len(caches), 0, -1):
        c_conv, c_bn, c_relu, c_pool = caches[i - 1]
        grad = maxpool_backward(grad, c_pool)
        grad = relu_backward(grad, c_relu)
        grad, dgamma, dbeta = batchnorm_backward(grad, c_bn)
        grads[f"{prefix}.bn{i}.gamma"] = dgamma
        grads[f"{prefix}.bn{i}.beta"] = dbeta
        # The first conv sees the feature tensor itself, so its input
        # gradient has no consumer.
        grad, dkernel, dbias = conv2d_backward(grad, c_conv, need_input_grad=i > 1)
        grads[f"{prefix}.conv{i}.kernel"] = dkernel
        grads[f"{prefix}.conv{i}.bias"] = dbias


def model_forward(
    model: ClassifierModel, primitive: np.ndarray, mfcc: np.ndarray, train: bool = False
):
    """Class probabilities for a batch. Returns (probs, cache)."""
    if primitive.shape[0] != mfcc.shape[0]:
        raise ShapeMismatch("primitive and mfcc batches differ in length")
    cfg = model.config
    a, ca = _encoder_forward(
        primitive, model.params, model.stats, "prim", cfg.primitive_pools, train
    )
    b, cb = _encoder_forward(mfcc, model.params, model.stats, "mfcc", cfg.mfcc_pools, train)
    merged = concat_heights(a, b)
    flat = merged.reshape(merged.shape[0], -1)
    logits, c_dense = dense_forward(flat, model.params["head.weight"], model.params["head.bias"])
    probs = softmax(logits)
    return probs, (ca, cb, a.shape[2], merged.shape, c_dense)


def model_backward(model: ClassifierModel, cache, grad_logits: np.ndarray) -> dict:
    """Parameter gradients given d(loss)/d(logits) for the cached forward."""
    ca, cb, height_a, merged_shape, c_dense = cache
    grads: dict[str, np.ndarray] = {}
    dflat, dweight, dbias = dense_backward(grad_logits, c_dense)
    grads["head.weight"] = dweight
    grads["head.bias"] = dbias
    da, db = split_heights(dflat.reshape(merged_shape), height_a)
    _encoder_backward(da, ca, "prim", grads)
    _encoder_backward(db, cb, "mfcc", grads)
    return grads


def train_classifier(
    primitive: np.ndarray,
    mfcc: np.ndarray,
    labels: np.ndarray,
    config: TrainConfig,
    n_classes: int | None = None,
    users: tuple[int, ...] | None = None,
) -> ClassifierModel:
    """Fit the twin-encoder classifier with minibatch Adam.

    labels are class indices in [0, n_classes). Every class must appear at
    least once (EmptyClass otherwise). A trailing batch with fewer than two
    samples is dropped, since batchnorm cannot normalize it. The per-epoch
    mean loss lands in model.loss_trace.
    """
    labels = np.asarray(labels, dtype=np.int64)
    n = labels.shape[0]
    if primitive.shape[0] != n or mfcc.shape[0] != n:
        raise ShapeMismatch("feature batches and labels differ in length")
    if n_classes is None:
        n_classes = int(labels.max()) + 1 if n else 0
    counts = np.bincount(labels, minlength=n_classes)
    if (counts == 0).any():
        missing = int(np.flatnonzero(counts == 0)[0])
        raise EmptyClass(f"class {missing} has no training samples")
    model = init_model(
        n_classes,
        primitive.shape[2:],
        mfcc.shape[2:],
        config,
        users=users,
    )
    rng = np.random.default_rng([config.seed, 1])  # shuffle stream, distinct from init
    optimizer = AdamOptimizer(learning_rate=config.learning_rate)
    for _ in range(config.n_epochs):
        order = rng.permutation(n)
        loss_sum = 0.0
        seen = 0
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            if batch.shape[0] < 2:
                continue
            probs, cache = model_forward(model, primitive[batch], mfcc[batch], train=True)
            losses = cross_entropy(probs, labels[batch])
            loss_sum += float(losses.sum())
            seen += batch.shape[0]
            grad_logits = softmax_cross_entropy_grad(probs, labels[batch]) / batch.shape[0]
            grads = model_backward(model, cache, grad_logits)
            optimizer.step(model.params, grads)
        model.loss_trace.append(loss_sum / seen)
    return model


def predict_proba(
    model: ClassifierModel,
    primitive: np.ndarray,
    mfcc: np.ndarray,
    batch_size: int = 64,
) -> np.ndarray:
    """Inference-mode probabilities, batched to bound peak memory."""
    chunks = []
    for start in range(0, primitive.shape[0], batch_size):
        probs, _ = model_forward(
            model,
            primitive[start : start + batch_size],
            mfcc[start : start + batch_size],
            train=False,
        )
        chunks.append(probs)
    return np.concatenate(chunks) if chunks else np.zeros((0, model.n_classes))


def predict(model: ClassifierModel, primitive: np.ndarray, mfcc: np.ndarray) -> np.ndarray:
    """Class indices; argmax ties resolve to the lowest index."""
    return np.argmax(predict_proba(model, primitive, mfcc), axis=1)


def split_dataset(
    user_ids: np.ndarray,
    gestures: np.ndarray,
    train_fraction: float = 0.6,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Stratified index split over (user, gesture) groups.

    Each stratum contributes round-half-up(train_fraction * size) training
    samples but always keeps at least one test sample. Strata with fewer
    than two members cannot satisfy both sides (StratumTooSmall).
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    user_ids = np.asarray(user_ids)
    gestures = np.asarray(gestures)
    if user_ids.shape != gestures.shape:
        raise ShapeMismatch("user_ids and gestures differ in length")
    rng = np.random.default_rng(seed)
    train_idx: list[np.ndarray] = []
    test_idx: list[np.ndarray] = []
    strata = sorted(set(zip(user_ids.tolist(), gestures.tolist())))
    for user, gesture in strata:
        members = np.flatnonzero((user_ids == user) & (gestures == gesture))
        if members.shape[0] < 2:
            raise StratumTooSmall(
                f"stratum (user={user}, gesture={gesture}) has {members.shape[0]} samples"
            )
        members = members[rng.permutation(members.shape[0])]
        n_train = int(math.floor(train_fraction * members.shape[0] + 0.5))
        n_train = min(max(n_train, 1), members.shape[0] - 1)
        train_idx.append(members[:n_train])
        test_idx.append(members[n_train:])
    return np.sort(np.concatenate(train_idx)), np.sort(np.concatenate(test_idx))


def retrain_without(
    primitive: np.ndarray,
    mfcc: np.ndarray,
    labels: np.ndarray,
    exclude: int,
    config: TrainConfig,
    users: tuple[int, ...],
) -> ClassifierModel:
    """Train on all classes except one, compacting the remaining indices."""
    keep = labels != exclude
    kept_users = tuple(u for i, u in enumerate(users) if i != exclude)
    remap = np.arange(len(users), dtype=np.int64)
    remap[exclude + 1 :] -= 1  # classes above the hole shift down one slot
    return train_classifier(
        primitive[keep],
        mfcc[keep],
        remap[labels[keep]],
        config,
        n_classes=len(users) - 1,
        users=kept_users,
    )

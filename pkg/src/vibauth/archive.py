"""Bit-exact model persistence.

Single-model layout:
  8-byte magic "VIBHEAD1"
  u32 little-endian header length
  UTF-8 JSON header (metadata plus declared tensor order and shapes)
  concatenated float64 little-endian C-order tensor payloads
  8-byte blake2b checksum of everything above

An ensemble is a directory of model files plus ensemble.json recording the
member mapping and the training provenance needed to re-derive its test
split. Writes go through a temp file and os.replace, so a crash never
leaves a half-written archive behind.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from pathlib import Path

import numpy as np

from .authentication import AuthenticationEnsemble
from .classifier import ClassifierModel, TrainConfig
from .errors import ArchiveError

MAGIC = b"VIBHEAD1"
_CHECKSUM_BYTES = 8


def _checksum(payload: bytes) -> bytes:
    return hashlib.blake2b(payload, digest_size=_CHECKSUM_BYTES).digest()


def _model_header(model: ClassifierModel) -> dict:
    cfg = model.config
    return {
        "n_classes": model.n_classes,
        "users": list(model.users),
        "primitive_shape": list(model.primitive_shape),
        "mfcc_shape": list(model.mfcc_shape),
        "learning_rate": cfg.learning_rate,
        "batch_size": cfg.batch_size,
        "n_epochs": cfg.n_epochs,
        "seed": cfg.seed,
        "channels": list(cfg.channels),
        "primitive_pools": [list(p) for p in cfg.primitive_pools],
        "mfcc_pools": [list(p) for p in cfg.mfcc_pools],
        "loss_trace": model.loss_trace,
        "params": [[k, list(model.params[k].shape)] for k in sorted(model.params)],
        "stats": [[k, list(model.stats[k].shape)] for k in sorted(model.stats)],
    }


def _atomic_write(path: Path, payload: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(payload)
    os.replace(tmp, path)


def save_model(path: Path, model: ClassifierModel) -> None:
    """Serialize one classifier; output bytes depend only on the model."""
    path = Path(path)
    header = _model_header(model)
    encoded = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<I", len(encoded))
    blob += encoded
    for name, _ in header["params"]:
        blob += np.ascontiguousarray(model.params[name], dtype="<f8").tobytes()
    for name, _ in header["stats"]:
        blob += np.ascontiguousarray(model.stats[name], dtype="<f8").tobytes()
    blob += _checksum(bytes(blob))
    _atomic_write(path, bytes(blob))


def load_model(path: Path) -> ClassifierModel:
    """Read a model archive back; any corruption raises ArchiveError."""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise ArchiveError(f"cannot read {path}: {exc}") from exc
    if len(blob) < len(MAGIC) + 4 + _CHECKSUM_BYTES:
        raise ArchiveError(f"{path} is truncated")
    if blob[: len(MAGIC)] != MAGIC:
        raise ArchiveError(f"{path} has wrong magic {blob[:8]!r}")
    body, stored = blob[:-_CHECKSUM_BYTES], blob[-_CHECKSUM_BYTES:]
    if _checksum(body) != stored:
        raise ArchiveError(f"{path} failed its checksum")
    (header_len,) = struct.unpack_from("<I", blob, len(MAGIC))
    header_start = len(MAGIC) + 4
    header_end = header_start + header_len
    if header_end > len(body):
        raise ArchiveError(f"{path} header overruns the file")
    try:
        header = json.loads(blob[header_start:header_end].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ArchiveError(f"{path} header is not valid JSON: {exc}") from exc
    config = TrainConfig(
        learning_rate=header["learning_rate"],
        batch_size=header["batch_size"],
        n_epochs=header["n_epochs"],
        seed=header["seed"],
        channels=tuple(header["channels"]),
        primitive_pools=tuple(tuple(p) for p in header["primitive_pools"]),
        mfcc_pools=tuple(tuple(p) for p in header["mfcc_pools"]),
    )
    offset = header_end
    params: dict[str, np.ndarray] = {}
    stats: dict[str, np.ndarray] = {}
    for target, entries in ((params, header["params"]), (stats, header["stats"])):
        for name, shape in entries:
            count = int(np.prod(shape)) if shape else 1
            end = offset + 8 * count
            if end > len(body):
                raise ArchiveError(f"{path} tensor {name} overruns the file")
            target[name] = np.frombuffer(body[offset:end], dtype="<f8").reshape(shape).copy()
            offset = end
    if offset != len(body):
        raise ArchiveError(f"{path} has {len(body) - offset} unexpected trailing bytes")
    return ClassifierModel(
        n_classes=header["n_classes"],
        users=tuple(header["users"]),
        primitive_shape=tuple(header["primitive_shape"]),
        mfcc_shape=tuple(header["mfcc_shape"]),
        config=config,
        params=params,
        stats=stats,
        loss_trace=list(header["loss_trace"]),
    )


def save_ensemble(directory: Path, ensemble: AuthenticationEnsemble, meta: dict) -> None:
    """Write base + member archives and ensemble.json into directory.

    meta carries provenance (corpus path, duration, split parameters) and is
    stored verbatim under the "training" key.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_model(directory / "base.model", ensemble.base)
    members = {}
    for user, model in ensemble.members.items():
        name = f"member_{user:02d}.model"
        save_model(directory / name, model)
        members[str(user)] = name
    manifest = {
        "users": list(ensemble.users),
        "base": "base.model",
        "members": members,
        "training": meta,
    }
    _atomic_write(
        directory / "ensemble.json",
        (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode(),
    )


def load_ensemble(directory: Path) -> tuple[AuthenticationEnsemble, dict]:
    """Read an ensemble directory; returns (ensemble, training metadata)."""
    directory = Path(directory)
    manifest_path = directory / "ensemble.json"
    if not manifest_path.is_file():
        raise ArchiveError(f"no ensemble.json in {directory}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise ArchiveError(f"{manifest_path} is not valid JSON: {exc}") from exc
    base = load_model(directory / manifest["base"])
    members = {
        int(user): load_model(directory / name)
        for user, name in manifest["members"].items()
    }
    ensemble = AuthenticationEnsemble(
        users=tuple(manifest["users"]), base=base, members=members
    )
    return ensemble, manifest.get("training", {})

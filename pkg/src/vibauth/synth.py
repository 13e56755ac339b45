"""Synthetic head-vibration corpus with per-user resonant signatures.

Each subject gets a bank of 2-4 parallel biquad resonators per axis, drawn
once from a seeded stream. A recording drives that bank with a ramped motor
tone (fundamental plus fixed harmonics) so the resonators shape the spectrum
in a subject-specific way, couples the axes, and adds sensor noise. Every
draw comes from a counter-style stream keyed by (seed, purpose, subject,
gesture, index), so any single recording regenerates bit-identically without
replaying the rest of the corpus.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import sosfilt

from .errors import BadRange
from .recording import (
    GESTURES,
    VibrationRecording,
    read_recording_csv,
    write_recording_csv,
)

SAMPLE_RATE_HZ = 2000
DRIVE_HZ = 300.0
# Relative amplitude of the drive's second and third harmonic. The bank
# turns these fixed ratios into subject-specific spectral shapes.
HARMONICS = ((2.0, 0.35), (3.0, 0.2))
RAMP_MS = 20.0
BURST_MS = 1200.0
PAD_MS = 500.0

_PROFILE_STREAM = 1
_RECORDING_STREAM = 2


@dataclass(frozen=True)
class Resonator:
    """One constant-peak-gain bandpass section."""

    center_hz: float
    q: float
    gain: float

    def sos(self, sample_rate_hz: float) -> np.ndarray:
        if not 0 < self.center_hz < sample_rate_hz / 2:
            raise BadRange(f"center {self.center_hz} Hz outside (0, Nyquist)")
        w0 = 2.0 * np.pi * self.center_hz / sample_rate_hz
        alpha = np.sin(w0) / (2.0 * self.q)
        a0 = 1.0 + alpha
        return np.array(
            [[alpha / a0, 0.0, -alpha / a0, 1.0, -2.0 * np.cos(w0) / a0, (1.0 - alpha) / a0]]
        )


@dataclass(frozen=True)
class GestureEffect:
    amplitude: float
    noise_scale: float
    sway: bool


GESTURE_EFFECTS = {
    "Standing": GestureEffect(amplitude=1.0, noise_scale=1.0, sway=False),
    "SittingUpright": GestureEffect(amplitude=0.96, noise_scale=0.9, sway=False),
    "SittingLeanForward": GestureEffect(amplitude=0.9, noise_scale=0.95, sway=False),
    "SittingLeanBackward": GestureEffect(amplitude=0.93, noise_scale=0.9, sway=False),
    "Walking": GestureEffect(amplitude=1.05, noise_scale=2.0, sway=True),
}


@dataclass(frozen=True)
class SyntheticUserProfile:
    """Physical signature of one subject.

    subject_key identifies the subject in the stream keyspace: (0, user_id)
    for enrolled users, (1, k) for impostors. sections holds one resonator
    tuple per axis; coupling mixes axis responses (rows: output axis).
    """

    subject_key: tuple[int, int]
    user: int | None
    sections: tuple[tuple[Resonator, ...], ...]
    noise_sigma: float
    coupling: np.ndarray


def stream_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent deterministic stream for (seed, key)."""
    return np.random.Generator(
        np.random.Philox(key=np.random.SeedSequence(seed, spawn_key=key).generate_state(2, np.uint64))
    )


def _draw_profile(rng: np.random.Generator, subject_key: tuple[int, int], user: int | None):
    sections = []
    for _ in range(3):
        n_extra = int(rng.integers(1, 4))  # 2 to 4 sections total per axis
        axis = [
            # Section 0 sits near the drive tone with moderate Q and a gain
            # floor of 1, guaranteeing a solid response at the fundamental.
            Resonator(
                center_hz=float(rng.uniform(260.0, 340.0)),
                q=float(rng.uniform(1.5, 4.0)),
                gain=float(rng.uniform(1.0, 2.0)),
            )
        ]
        for _ in range(n_extra):
            axis.append(
                Resonator(
                    center_hz=float(rng.uniform(150.0, 900.0)),
                    q=float(rng.uniform(2.0, 15.0)),
                    gain=float(rng.uniform(0.3, 1.2)),
                )
            )
        sections.append(tuple(axis))
    coupling = np.eye(3)
    off = rng.uniform(0.03, 0.12, size=6)
    coupling[np.triu_indices(3, 1)] = off[:3]
    coupling[np.tril_indices(3, -1)] = off[3:]
    return SyntheticUserProfile(
        subject_key=subject_key,
        user=user,
        sections=tuple(sections),
        noise_sigma=float(rng.uniform(0.005, 0.015)),
        coupling=coupling,
    )


def make_user(seed: int, user: int) -> SyntheticUserProfile:
    """Deterministic profile for an enrolled user id (positive int)."""
    if user < 0:
        raise BadRange("user ids must be non-negative")
    key = (0, user)
    return _draw_profile(stream_rng(seed, _PROFILE_STREAM, *key), key, user)


def make_impostor(seed: int, index: int) -> SyntheticUserProfile:
    """Deterministic profile for the index-th impostor (user is None)."""
    if index < 0:
        raise BadRange("impostor indices must be non-negative")
    key = (1, index)
    return _draw_profile(stream_rng(seed, _PROFILE_STREAM, *key), key, None)


def _drive_signal(n: int, sample_rate_hz: float, phase: float) -> np.ndarray:
    t = np.arange(n) / sample_rate_hz
    drive = np.sin(2.0 * np.pi * DRIVE_HZ * t + phase)
    for mult, rel in HARMONICS:
        drive += rel * np.sin(2.0 * np.pi * DRIVE_HZ * mult * t + mult * phase)
    ramp = int(round(RAMP_MS * sample_rate_hz / 1000.0))
    envelope = np.ones(n)
    edge = 0.5 * (1.0 - np.cos(np.pi * np.arange(ramp) / ramp))
    envelope[:ramp] = edge
    envelope[-ramp:] = edge[::-1]
    return drive * envelope


def generate_recording(
    seed: int,
    profile: SyntheticUserProfile,
    gesture: str,
    index: int,
    sample_rate_hz: float = SAMPLE_RATE_HZ,
    burst_ms: float = BURST_MS,
    pad_ms: float = PAD_MS,
) -> VibrationRecording:
    """One padded recording: silence, ramped burst through the bank, silence.

    The true burst start is pad_ms into the recording. Deterministic in
    (seed, profile.subject_key, gesture, index) alone.
    """
    if gesture not in GESTURE_EFFECTS:
        raise BadRange(f"unknown gesture {gesture!r}")
    effect = GESTURE_EFFECTS[gesture]
    gesture_idx = GESTURES.index(gesture)
    rng = stream_rng(seed, _RECORDING_STREAM, *profile.subject_key, gesture_idx, index)

    n_pad = int(round(pad_ms * sample_rate_hz / 1000.0))
    n_burst = int(round(burst_ms * sample_rate_hz / 1000.0))
    n_total = n_burst + 2 * n_pad

    phase = float(rng.uniform(0.0, 2.0 * np.pi))
    drive = _drive_signal(n_burst, sample_rate_hz, phase) * effect.amplitude
    # Motor rumble rides on the drive so the bank shapes it per subject.
    rumble = rng.normal(0.0, 0.02, n_burst)
    excitation = drive + rumble

    responses = np.zeros((3, n_burst))
    for axis in range(3):
        for section in profile.sections[axis]:
            responses[axis] += section.gain * sosfilt(section.sos(sample_rate_hz), excitation)
    mixed = profile.coupling @ responses

    axes = np.zeros((3, n_total))
    axes[:, n_pad : n_pad + n_burst] = mixed
    if effect.sway:
        sway_hz = float(rng.uniform(1.5, 2.5))
        t = np.arange(n_total) / sample_rate_hz
        for axis in range(3):
            axes[axis] += 0.05 * np.sin(
                2.0 * np.pi * sway_hz * t + float(rng.uniform(0.0, 2.0 * np.pi))
            )
    sigma = profile.noise_sigma * effect.noise_scale
    axes += rng.normal(0.0, sigma, (3, n_total))
    return VibrationRecording(
        sample_rate_hz=sample_rate_hz,
        axes=axes,
        gesture=gesture,
        user=profile.user,
    )


@dataclass(frozen=True)
class CorpusEntry:
    path: str
    user: int | None
    gesture: str
    index: int


def generate_corpus(
    seed: int,
    n_users: int,
    n_impostors: int,
    per_gesture: int,
    out_dir: Path,
    sample_rate_hz: float = SAMPLE_RATE_HZ,
) -> list[CorpusEntry]:
    """Write the full CSV corpus plus manifest.json; returns the entries.

    Users are numbered 1..n_users. Every subject, impostors included,
    records per_gesture samples of every gesture. Output bytes depend only
    on the arguments.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    profiles = [make_user(seed, u) for u in range(1, n_users + 1)]
    profiles += [make_impostor(seed, k) for k in range(n_impostors)]
    entries: list[CorpusEntry] = []
    for profile in profiles:
        kind, ident = profile.subject_key
        stem = f"user{ident:02d}" if kind == 0 else f"impostor{ident:02d}"
        for gesture in GESTURES:
            for index in range(per_gesture):
                rec = generate_recording(
                    seed, profile, gesture, index, sample_rate_hz=sample_rate_hz
                )
                name = f"{stem}_{gesture}_{index:02d}.csv"
                write_recording_csv(out_dir / name, rec)
                entries.append(CorpusEntry(name, profile.user, gesture, index))
    manifest = {
        "seed": seed,
        "sample_rate_hz": sample_rate_hz,
        "n_users": n_users,
        "n_impostors": n_impostors,
        "per_gesture": per_gesture,
        "recordings": [
            {"path": e.path, "user": e.user, "gesture": e.gesture, "index": e.index}
            for e in entries
        ],
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )
    return entries


def read_manifest(corpus_dir: Path) -> dict:
    path = Path(corpus_dir) / "manifest.json"
    if not path.is_file():
        raise FileNotFoundError(f"no manifest.json in {corpus_dir}")
    return json.loads(path.read_text())


def load_corpus(corpus_dir: Path):
    """Read every manifest entry; returns (legit, impostor) recording lists
    in manifest order."""
    corpus_dir = Path(corpus_dir)
    manifest = read_manifest(corpus_dir)
    legit, impostors = [], []
    for entry in manifest["recordings"]:
        rec = read_recording_csv(corpus_dir / entry["path"])
        (legit if rec.user is not None else impostors).append(rec)
    return legit, impostors

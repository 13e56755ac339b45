"""Recording container and CSV round-trip tests."""

import numpy as np
import pytest

from vibauth.errors import VibauthError
from vibauth.recording import (
    GESTURES,
    VibrationRecording,
    read_recording_csv,
    write_recording_csv,
)


def make_recording(n=200, user=3, gesture="Standing"):
    rng = np.random.default_rng(0)
    return VibrationRecording(
        sample_rate_hz=2000.0,
        axes=rng.normal(size=(3, n)),
        gesture=gesture,
        user=user,
    )


class TestVibrationRecording:
    def test_basic_properties(self):
        rec = make_recording(n=500)
        assert rec.n_samples == 500
        assert rec.duration_ms == pytest.approx(250.0)

    def test_axes_are_read_only(self):
        rec = make_recording()
        with pytest.raises(ValueError):
            rec.axes[0, 0] = 1.0

    def test_rejects_wrong_axis_count(self):
        with pytest.raises(ValueError):
            VibrationRecording(2000.0, np.zeros((2, 10)), "Standing", 1)

    def test_rejects_unknown_gesture(self):
        with pytest.raises(ValueError):
            VibrationRecording(2000.0, np.zeros((3, 10)), "Jogging", 1)

    def test_rejects_non_finite_samples(self):
        axes = np.zeros((3, 10))
        axes[1, 4] = np.nan
        with pytest.raises(ValueError):
            VibrationRecording(2000.0, axes, "Standing", 1)

    def test_impostor_has_no_user(self):
        rec = make_recording(user=None)
        assert rec.user is None

    def test_with_axes_replaces_samples(self):
        rec = make_recording(n=100)
        other = rec.with_axes(np.ones((3, 50)))
        assert other.n_samples == 50
        assert other.user == rec.user
        assert rec.n_samples == 100

    def test_gesture_vocabulary_is_fixed(self):
        assert len(GESTURES) == 5
        assert "Walking" in GESTURES


class TestCsvRoundTrip:
    def test_roundtrip_preserves_metadata_and_samples(self, tmp_path):
        rec = make_recording(n=123, user=7, gesture="Walking")
        path = tmp_path / "rec.csv"
        write_recording_csv(path, rec)
        back = read_recording_csv(path)
        assert back.user == 7
        assert back.gesture == "Walking"
        assert back.sample_rate_hz == 2000.0
        np.testing.assert_allclose(back.axes, rec.axes, rtol=1e-8)

    def test_roundtrip_preserves_impostor(self, tmp_path):
        rec = make_recording(user=None)
        path = tmp_path / "imp.csv"
        write_recording_csv(path, rec)
        assert read_recording_csv(path).user is None

    def test_write_is_deterministic(self, tmp_path):
        rec = make_recording()
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_recording_csv(a, rec)
        write_recording_csv(b, rec)
        assert a.read_bytes() == b.read_bytes()

    def test_malformed_file_names_the_path(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("not,a,recording\n")
        with pytest.raises(VibauthError, match="bad.csv"):
            read_recording_csv(path)

    def test_corrupt_sample_row_is_rejected(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("sample_rate_hz,2000\n0.1,0.2\n")
        with pytest.raises(VibauthError, match=":2"):
            read_recording_csv(path)

    def test_bad_user_id_is_rejected(self, tmp_path):
        path = tmp_path / "u.csv"
        path.write_text("sample_rate_hz,2000\n0.1,0.2,0.3\nuser,alice\n")
        with pytest.raises(VibauthError, match="user"):
            read_recording_csv(path)

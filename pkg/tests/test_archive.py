"""Model archive format tests: bit-exact roundtrips and corruption handling."""

import hashlib
import json
import struct

import numpy as np
import pytest

from vibauth.archive import MAGIC, load_ensemble, load_model, save_ensemble, save_model
from vibauth.authentication import AuthenticationEnsemble
from vibauth.classifier import TrainConfig, init_model
from vibauth.errors import ArchiveError

CONFIG = TrainConfig(channels=(4, 8, 8), seed=5)


def checksum(body):
    return hashlib.blake2b(body, digest_size=8).digest()


def make_model(seed=5, users=(1, 2, 3)):
    model = init_model(
        len(users), (50, 40), (98, 39), TrainConfig(channels=(4, 8, 8), seed=seed), users=users
    )
    rng = np.random.default_rng(seed + 100)
    for key in model.stats:
        model.stats[key] = rng.normal(0.0, 1.0, model.stats[key].shape)
    model.loss_trace = [1.25, 0.5, 0.125]
    return model


@pytest.fixture()
def saved(tmp_path):
    model = make_model()
    path = tmp_path / "model.bin"
    save_model(path, model)
    return model, path


class TestRoundtrip:
    def test_everything_survives_bit_exactly(self, saved):
        model, path = saved
        loaded = load_model(path)
        assert loaded.n_classes == model.n_classes
        assert loaded.users == model.users
        assert loaded.primitive_shape == model.primitive_shape
        assert loaded.mfcc_shape == model.mfcc_shape
        assert loaded.config == model.config
        assert loaded.loss_trace == model.loss_trace
        assert set(loaded.params) == set(model.params)
        assert set(loaded.stats) == set(model.stats)
        for key in model.params:
            np.testing.assert_array_equal(loaded.params[key], model.params[key])
        for key in model.stats:
            np.testing.assert_array_equal(loaded.stats[key], model.stats[key])

    def test_serialization_is_deterministic(self, saved, tmp_path):
        model, path = saved
        again = tmp_path / "again.bin"
        save_model(again, model)
        assert again.read_bytes() == path.read_bytes()

    def test_layout_starts_with_magic_and_header(self, saved):
        _, path = saved
        blob = path.read_bytes()
        assert blob[:8] == MAGIC
        (header_len,) = struct.unpack_from("<I", blob, 8)
        header = json.loads(blob[12 : 12 + header_len].decode())
        assert header["users"] == [1, 2, 3]
        assert ["head.weight", [80, 3]] in header["params"]

    def test_no_temp_file_left_behind(self, saved, tmp_path):
        assert list(tmp_path.glob("*.tmp")) == []


class TestCorruption:
    def test_missing_file(self, tmp_path):
        with pytest.raises(ArchiveError, match="cannot read"):
            load_model(tmp_path / "absent.bin")

    def test_tiny_file(self, tmp_path):
        path = tmp_path / "tiny.bin"
        path.write_bytes(b"VIBH")
        with pytest.raises(ArchiveError, match="truncated"):
            load_model(path)

    def test_wrong_magic(self, saved):
        _, path = saved
        blob = bytearray(path.read_bytes())
        blob[:8] = b"NOTMAGIC"
        path.write_bytes(bytes(blob))
        with pytest.raises(ArchiveError, match="magic"):
            load_model(path)

    def test_flipped_payload_byte(self, saved):
        _, path = saved
        blob = bytearray(path.read_bytes())
        blob[len(blob) // 2] ^= 0xFF
        path.write_bytes(bytes(blob))
        with pytest.raises(ArchiveError, match="checksum"):
            load_model(path)

    def test_truncated_payload(self, saved):
        _, path = saved
        blob = path.read_bytes()
        path.write_bytes(blob[: len(blob) - 100])
        with pytest.raises(ArchiveError):
            load_model(path)

    def test_trailing_garbage_with_fixed_checksum(self, saved):
        _, path = saved
        body = path.read_bytes()[:-8] + b"\x00" * 8
        path.write_bytes(body + checksum(body))
        with pytest.raises(ArchiveError, match="trailing"):
            load_model(path)

    def test_header_length_overrun(self, saved):
        _, path = saved
        body = bytearray(path.read_bytes()[:-8])
        struct.pack_into("<I", body, 8, len(body))
        path.write_bytes(bytes(body) + checksum(bytes(body)))
        with pytest.raises(ArchiveError, match="header overruns"):
            load_model(path)

    def test_header_not_json(self, saved):
        _, path = saved
        body = bytearray(path.read_bytes()[:-8])
        body[12:16] = b"!!!!"
        path.write_bytes(bytes(body) + checksum(bytes(body)))
        with pytest.raises(ArchiveError, match="JSON"):
            load_model(path)

    def test_tensor_overrun(self, saved):
        _, path = saved
        body = path.read_bytes()[:-8][:-16]
        path.write_bytes(body + checksum(body))
        with pytest.raises(ArchiveError, match="overruns"):
            load_model(path)


class TestEnsembleArchive:
    def make_ensemble(self):
        users = (1, 2, 3)
        members = {}
        for j, user in enumerate(users, start=1):
            rest = tuple(u for u in users if u != user)
            members[user] = make_model(seed=5 + j, users=rest)
        return AuthenticationEnsemble(users=users, base=make_model(), members=members)

    def test_roundtrip(self, tmp_path):
        ensemble = self.make_ensemble()
        meta = {"corpus": "corp", "duration_ms": 1000.0, "split_seed": 0}
        save_ensemble(tmp_path / "ens", ensemble, meta)
        loaded, loaded_meta = load_ensemble(tmp_path / "ens")
        assert loaded_meta == meta
        assert loaded.users == ensemble.users
        for key in ensemble.base.params:
            np.testing.assert_array_equal(loaded.base.params[key], ensemble.base.params[key])
        for user in ensemble.users:
            assert loaded.members[user].users == ensemble.members[user].users
            for key in ensemble.members[user].params:
                np.testing.assert_array_equal(
                    loaded.members[user].params[key], ensemble.members[user].params[key]
                )

    def test_expected_files(self, tmp_path):
        save_ensemble(tmp_path / "ens", self.make_ensemble(), {})
        names = sorted(p.name for p in (tmp_path / "ens").iterdir())
        assert names == [
            "base.model",
            "ensemble.json",
            "member_01.model",
            "member_02.model",
            "member_03.model",
        ]

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(ArchiveError, match="ensemble.json"):
            load_ensemble(tmp_path)

    def test_corrupt_manifest(self, tmp_path):
        save_ensemble(tmp_path / "ens", self.make_ensemble(), {})
        (tmp_path / "ens" / "ensemble.json").write_text("{broken")
        with pytest.raises(ArchiveError, match="JSON"):
            load_ensemble(tmp_path / "ens")

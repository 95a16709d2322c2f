import numpy as np
import pytest

from emotichat.tensorio import TensorFileError, load_tensors, save_tensors


def test_round_trip(tmp_path, rng):
    tensors = {
        "a": rng.normal(size=(3, 4)),
        "b.c": rng.normal(size=7),
        "scalarish": rng.normal(size=(1,)),
    }
    header = {"kind": "test", "nested": {"x": 1}}
    path = tmp_path / "model.ectf"
    save_tensors(path, header, tensors)
    loaded_header, loaded = load_tensors(path)
    assert loaded_header == header
    assert set(loaded) == set(tensors)
    for name in tensors:
        np.testing.assert_array_equal(loaded[name], tensors[name])


def test_corruption_detected(tmp_path, rng):
    path = tmp_path / "model.ectf"
    save_tensors(path, {}, {"w": rng.normal(size=(2, 2))})
    blob = bytearray(path.read_bytes())
    blob[len(blob) // 2] ^= 0xFF
    path.write_bytes(bytes(blob))
    with pytest.raises(TensorFileError, match="checksum"):
        load_tensors(path)


def test_not_a_container(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"definitely not tensors")
    with pytest.raises(TensorFileError):
        load_tensors(path)

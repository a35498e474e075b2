import numpy as np
import pytest

from sifttrainer.container import read_container, write_container


def test_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    tensors = {"a": rng.standard_normal((2, 3)).astype(np.float32),
               "b": rng.standard_normal(5).astype(np.float32)}
    write_container(tmp_path / "x.tnsr", tensors, attrs={"k": "v"})
    loaded, attrs = read_container(tmp_path / "x.tnsr")
    assert attrs == {"k": "v"}
    for name in tensors:
        np.testing.assert_array_equal(loaded[name], tensors[name])


def test_cross_implementation_interchange(tmp_path):
    # files written by either implementation read back identically in the other
    spatialsift_io = pytest.importorskip("spatialsift.tensorio")
    rng = np.random.default_rng(1)
    tensors = {"w.kernel": rng.standard_normal((4, 2, 1, 3)).astype(np.float32),
               "w.bias": rng.standard_normal(4).astype(np.float32)}
    attrs = {"format": "test", "n": "1"}

    write_container(tmp_path / "trainer.tnsr", tensors, attrs)
    theirs, their_attrs = spatialsift_io.load_tensors(tmp_path / "trainer.tnsr")
    assert their_attrs == attrs
    for name in tensors:
        np.testing.assert_array_equal(theirs[name], tensors[name])

    spatialsift_io.save_tensors(tmp_path / "primary.tnsr", tensors, attrs)
    mine, my_attrs = read_container(tmp_path / "primary.tnsr")
    assert my_attrs == attrs
    for name in tensors:
        np.testing.assert_array_equal(mine[name], tensors[name])

    # identical content -> identical bytes from both writers
    assert (tmp_path / "trainer.tnsr").read_bytes() == (tmp_path / "primary.tnsr").read_bytes()


def test_bad_magic(tmp_path):
    (tmp_path / "bad.tnsr").write_bytes(b"WRONG!!!" + bytes(16))
    with pytest.raises(ValueError, match="magic"):
        read_container(tmp_path / "bad.tnsr")

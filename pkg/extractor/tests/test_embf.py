import numpy as np
import pytest

from embextract.embf import EmbfError, read_embf, write_embf


def test_round_trip(tmp_path):
    rng = np.random.default_rng(7)
    for i in range(10):
        n, d = int(rng.integers(1, 8)), int(rng.integers(1, 16))
        ids = [f"r{i}-{j}" for j in range(n)]
        rows = rng.standard_normal((n, d)).astype(np.float32)
        path = tmp_path / f"f{i}.embf"
        write_embf(path, f"model{i}", ids, rows)
        model_id, back_ids, back = read_embf(path)
        assert model_id == f"model{i}"
        assert back_ids == ids
        assert back.tobytes() == rows.tobytes()


def test_checksum_detects_flipped_byte(tmp_path):
    path = tmp_path / "f.embf"
    write_embf(path, "m", ["a", "b"], np.zeros((2, 3), dtype=np.float32))
    data = bytearray(path.read_bytes())
    data[-7] ^= 0x10
    path.write_bytes(bytes(data))
    with pytest.raises(EmbfError, match="checksum"):
        read_embf(path)


def test_truncated_and_foreign_files(tmp_path):
    path = tmp_path / "f.embf"
    write_embf(path, "m", ["a"], np.ones((1, 2), dtype=np.float32))
    path.write_bytes(path.read_bytes()[:-6])
    with pytest.raises(EmbfError):
        read_embf(path)
    other = tmp_path / "other.bin"
    other.write_bytes(b"JUNKJUNKJUNK")
    with pytest.raises(EmbfError, match="not an EMBF"):
        read_embf(other)


def test_rejects_nonfinite(tmp_path):
    rows = np.array([[np.nan, 0.0]], dtype=np.float32)
    with pytest.raises(EmbfError, match="non-finite"):
        write_embf(tmp_path / "f.embf", "m", ["a"], rows)

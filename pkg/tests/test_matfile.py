import struct

import numpy as np
import pytest

from qlr.matfile import (
    BadDtypeError,
    BadMagicError,
    BadVersionError,
    MatrixFileError,
    NonFinitePayloadError,
    TruncatedError,
    read_matrix,
    write_matrix,
)


def rng(seed=0):
    return np.random.Generator(np.random.Philox(seed))


def test_roundtrip_is_bitwise(tmp_path):
    m = rng(1).standard_normal((7, 3))
    path = tmp_path / "m.qlrm"
    write_matrix(path, m)
    np.testing.assert_array_equal(read_matrix(path), m)


def test_header_layout(tmp_path):
    path = tmp_path / "m.qlrm"
    write_matrix(path, np.array([[1.5, -2.0]]))
    data = path.read_bytes()
    assert data[:4] == b"QLRM"
    version, dtype, reserved, rows, cols = struct.unpack_from("<HBBII", data, 4)
    assert (version, dtype, reserved, rows, cols) == (1, 0, 0, 1, 2)
    assert data[16:] == struct.pack("<2d", 1.5, -2.0)


def test_bad_magic(tmp_path):
    path = tmp_path / "m.qlrm"
    write_matrix(path, np.eye(2))
    data = bytearray(path.read_bytes())
    data[:4] = b"XXXX"
    path.write_bytes(bytes(data))
    with pytest.raises(BadMagicError):
        read_matrix(path)


def test_bad_version(tmp_path):
    path = tmp_path / "m.qlrm"
    write_matrix(path, np.eye(2))
    data = bytearray(path.read_bytes())
    data[4] = 9
    path.write_bytes(bytes(data))
    with pytest.raises(BadVersionError):
        read_matrix(path)


def test_bad_dtype(tmp_path):
    path = tmp_path / "m.qlrm"
    write_matrix(path, np.eye(2))
    data = bytearray(path.read_bytes())
    data[6] = 1
    path.write_bytes(bytes(data))
    with pytest.raises(BadDtypeError):
        read_matrix(path)


def test_truncated_payload(tmp_path):
    path = tmp_path / "m.qlrm"
    write_matrix(path, np.eye(2))
    data = path.read_bytes()
    path.write_bytes(data[:-1])
    with pytest.raises(TruncatedError):
        read_matrix(path)
    path.write_bytes(data + b"\x00")
    with pytest.raises(TruncatedError):
        read_matrix(path)
    path.write_bytes(data[:10])
    with pytest.raises(TruncatedError):
        read_matrix(path)


def test_nonfinite_payload(tmp_path):
    path = tmp_path / "m.qlrm"
    write_matrix(path, np.eye(1))
    header = path.read_bytes()[:16]
    path.write_bytes(header + struct.pack("<d", np.nan))
    with pytest.raises(NonFinitePayloadError):
        read_matrix(path)


def test_zero_dimension_rejected(tmp_path):
    path = tmp_path / "m.qlrm"
    header = struct.pack("<4sHBBII", b"QLRM", 1, 0, 0, 0, 3)
    path.write_bytes(header)
    with pytest.raises(MatrixFileError):
        read_matrix(path)


def test_write_rejects_nonfinite():
    with pytest.raises(ValueError):
        write_matrix("/tmp/never-written.qlrm", np.array([[np.inf]]))


def test_writes_leave_no_temp_files(tmp_path):
    write_matrix(tmp_path / "a.qlrm", np.eye(3))
    write_matrix(tmp_path / "a.qlrm", np.eye(4))  # overwrite in place
    assert sorted(p.name for p in tmp_path.iterdir()) == ["a.qlrm"]
    assert read_matrix(tmp_path / "a.qlrm").shape == (4, 4)

import re

import numpy as np
import pytest

from swmparc.tckio import TrackFileError, read_tck, write_tck


def data_offset(raw: bytes) -> int:
    return raw.find(b"\nEND\n") + 5


def write_raw(tmp_path, streamlines, name="t.tck"):
    path = tmp_path / name
    write_tck(streamlines, path)
    return path, path.read_bytes()


def test_round_trip_values(tmp_path):
    rng = np.random.default_rng(7)
    lines = [rng.uniform(-100, 100, (n, 3)) for n in (2, 5, 21)]
    path, _ = write_raw(tmp_path, lines)
    back = read_tck(path)
    assert len(back) == 3
    for orig, rt in zip(lines, back):
        assert rt.dtype == np.float64
        # storage is float32, so the round trip lands on float32 values
        assert np.array_equal(rt, orig.astype("<f4").astype(np.float64))


def test_rewrite_is_bit_identical(tmp_path):
    rng = np.random.default_rng(8)
    lines = [rng.uniform(-50, 50, (4, 3)) for _ in range(5)]
    path, raw1 = write_raw(tmp_path, lines)
    path2, raw2 = write_raw(tmp_path, read_tck(path), name="t2.tck")
    assert raw1 == raw2


def test_empty_file_round_trip(tmp_path):
    path, raw = write_raw(tmp_path, [])
    assert read_tck(path) == []
    assert b"count: 0" in raw


def test_header_offset_is_self_consistent(tmp_path):
    path, raw = write_raw(tmp_path, [np.zeros((2, 3))])
    offset = data_offset(raw)
    m = re.search(rb"file: \. (\d+)", raw)
    assert int(m.group(1)) == offset


def test_write_rejects_bad_shapes(tmp_path):
    with pytest.raises(ValueError, match="streamline 0"):
        write_tck([np.zeros((1, 3))], tmp_path / "x.tck")
    with pytest.raises(ValueError, match="streamline 1"):
        write_tck([np.zeros((2, 3)), np.zeros((2, 2))], tmp_path / "x.tck")
    bad = np.zeros((3, 3))
    bad[1, 1] = np.nan
    with pytest.raises(ValueError, match="non-finite"):
        write_tck([bad], tmp_path / "x.tck")


def test_bad_magic(tmp_path):
    path, raw = write_raw(tmp_path, [np.zeros((2, 3))])
    path.write_bytes(b"mrtrix quacks" + raw[13:])
    with pytest.raises(TrackFileError, match="bad magic at byte 0"):
        read_tck(path)


def test_missing_end_line(tmp_path):
    path, raw = write_raw(tmp_path, [np.zeros((2, 3))])
    path.write_bytes(raw.replace(b"\nEND\n", b"\nEND "))
    with pytest.raises(TrackFileError, match="END line not found"):
        read_tck(path)


def test_unsupported_datatype(tmp_path):
    path, raw = write_raw(tmp_path, [np.zeros((2, 3))])
    path.write_bytes(raw.replace(b"Float32LE", b"Float64BE"))
    with pytest.raises(TrackFileError, match="unsupported datatype"):
        read_tck(path)


def test_offset_outside_file(tmp_path):
    path, raw = write_raw(tmp_path, [np.zeros((2, 3))])
    offset = data_offset(raw)
    grown = raw.replace(f"file: . {offset}".encode(), b"file: . 99999")
    path.write_bytes(grown)
    with pytest.raises(TrackFileError, match="data offset 99999 outside file"):
        read_tck(path)


def test_truncated_binary_reports_byte(tmp_path):
    path, raw = write_raw(tmp_path, [np.zeros((2, 3))])
    path.write_bytes(raw[:-5])
    with pytest.raises(TrackFileError, match=rf"truncated at byte {len(raw) - 5}"):
        read_tck(path)


def corrupt_triplet(raw: bytes, row: int, values) -> bytes:
    offset = data_offset(raw)
    start = offset + 12 * row
    patch = np.asarray(values, dtype="<f4").tobytes()
    return raw[:start] + patch + raw[start + 12:]


def test_malformed_separator_reports_byte(tmp_path):
    path, raw = write_raw(tmp_path, [np.ones((3, 3))])
    offset = data_offset(raw)
    # row 3 is the NaN separator; make it half-NaN
    path.write_bytes(corrupt_triplet(raw, 3, [np.nan, 0.0, 0.0]))
    with pytest.raises(TrackFileError,
                       match=rf"malformed separator triplet at byte {offset + 36}"):
        read_tck(path)


def test_malformed_terminator(tmp_path):
    path, raw = write_raw(tmp_path, [np.ones((3, 3))])
    path.write_bytes(corrupt_triplet(raw, 4, [np.inf, -np.inf, np.inf]))
    with pytest.raises(TrackFileError, match="malformed terminator"):
        read_tck(path)


def test_empty_streamline_rejected(tmp_path):
    path, raw = write_raw(tmp_path, [np.ones((3, 3))])
    path.write_bytes(corrupt_triplet(raw, 0, [np.nan] * 3))
    with pytest.raises(TrackFileError, match="empty streamline at byte"):
        read_tck(path)


def test_unterminated_streamline_before_terminator(tmp_path):
    path, raw = write_raw(tmp_path, [np.ones((3, 3))])
    # overwrite the separator with a data point: points then Inf, no NaN
    path.write_bytes(corrupt_triplet(raw, 3, [1.0, 2.0, 3.0]))
    with pytest.raises(TrackFileError, match="unterminated streamline"):
        read_tck(path)


def test_trailing_data_after_terminator(tmp_path):
    path, raw = write_raw(tmp_path, [np.ones((3, 3))])
    path.write_bytes(raw + np.zeros((1, 3), dtype="<f4").tobytes())
    with pytest.raises(TrackFileError, match="trailing data after terminator"):
        read_tck(path)


def test_missing_terminator(tmp_path):
    path, raw = write_raw(tmp_path, [np.ones((3, 3))])
    path.write_bytes(raw[:-12])
    with pytest.raises(TrackFileError, match="missing terminator"):
        read_tck(path)


def test_count_mismatch(tmp_path):
    path, raw = write_raw(tmp_path, [np.ones((3, 3))])
    path.write_bytes(raw.replace(b"count: 1", b"count: 3"))
    with pytest.raises(TrackFileError, match="header count 3 != 1"):
        read_tck(path)


def test_missing_file_raises(tmp_path):
    with pytest.raises(TrackFileError, match="cannot read"):
        read_tck(tmp_path / "nope.tck")

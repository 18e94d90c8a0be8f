"""Track-file reader and writer.

Layout: a text header opened by the magic line "mrtrix tracks", key-value
lines, and a closing "END" line; then float32 little-endian xyz triplets
starting at the byte position named by the "file: . <offset>" field.  A
(NaN,NaN,NaN) triplet closes each streamline and an (Inf,Inf,Inf) triplet
closes the stream.  Output bytes are deterministic for identical input.
"""
from __future__ import annotations

import numpy as np

MAGIC = "mrtrix tracks"
DATATYPE = "Float32LE"


class TrackFileError(ValueError):
    """Malformed track file; message carries the byte offset when known."""


def _header_bytes(count: int, offset: int) -> bytes:
    lines = [
        MAGIC,
        f"datatype: {DATATYPE}",
        f"count: {count}",
        f"file: . {offset}",
        "END",
    ]
    return ("\n".join(lines) + "\n").encode("ascii")


def write_tck(streamlines, path) -> None:
    """Write streamlines (sequence of (n,3) arrays) to a track file."""
    arrays = []
    for i, s in enumerate(streamlines):
        a = np.asarray(s, dtype=np.float64)
        if a.ndim != 2 or a.shape[1] != 3 or len(a) < 2:
            raise ValueError(f"streamline {i} is not an (n>=2, 3) array")
        if not np.all(np.isfinite(a)):
            raise ValueError(f"streamline {i} has non-finite points")
        arrays.append(a.astype("<f4"))

    # the header states the byte offset of its own end, so the offset field
    # is grown until the length stops changing
    count = len(arrays)
    offset = len(_header_bytes(count, 0))
    while True:
        header = _header_bytes(count, offset)
        if len(header) == offset:
            break
        offset = len(header)

    nan_sep = np.full((1, 3), np.nan, dtype="<f4")
    parts = []
    for a in arrays:
        parts.append(a)
        parts.append(nan_sep)
    parts.append(np.full((1, 3), np.inf, dtype="<f4"))
    payload = np.concatenate(parts) if parts else np.full((1, 3), np.inf, dtype="<f4")

    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(payload.tobytes())
    except OSError as e:
        raise OSError(f"cannot write track file {path}: {e}") from e


def _parse_header(raw: bytes, path) -> tuple[dict[str, str], int]:
    """Returns (fields, data offset). Raises TrackFileError on bad layout."""
    limit = min(len(raw), 65536)
    text_end = raw.find(b"\nEND\n", 0, limit)
    if not raw.startswith(MAGIC.encode("ascii") + b"\n"):
        raise TrackFileError(f"{path}: bad magic at byte 0 (expected '{MAGIC}')")
    if text_end < 0:
        raise TrackFileError(f"{path}: header END line not found in the first {limit} bytes")
    header_text = raw[: text_end + 1].decode("ascii", errors="replace")
    fields: dict[str, str] = {}
    for line in header_text.splitlines()[1:]:
        if ":" not in line:
            raise TrackFileError(f"{path}: malformed header line {line!r}")
        key, value = line.split(":", 1)
        fields[key.strip()] = value.strip()
    file_field = fields.get("file")
    if file_field is None:
        raise TrackFileError(f"{path}: header missing 'file' field")
    parts = file_field.split()
    if len(parts) != 2 or parts[0] != ".":
        raise TrackFileError(f"{path}: unsupported file field {file_field!r}")
    try:
        offset = int(parts[1])
    except ValueError:
        raise TrackFileError(f"{path}: non-integer data offset {parts[1]!r}") from None
    if offset < text_end + 5 or offset > len(raw):
        raise TrackFileError(f"{path}: data offset {offset} outside file of {len(raw)} bytes")
    datatype = fields.get("datatype")
    if datatype != DATATYPE:
        raise TrackFileError(f"{path}: unsupported datatype {datatype!r}")
    return fields, offset


def read_tck(path) -> list[np.ndarray]:
    """Read a track file into a list of float64 (n,3) arrays."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as e:
        raise TrackFileError(f"cannot read track file {path}: {e}") from e
    fields, offset = _parse_header(raw, path)

    body = raw[offset:]
    if len(body) % 12 != 0:
        raise TrackFileError(
            f"{path}: binary section truncated at byte {offset + len(body)} "
            f"({len(body)} bytes is not a whole number of triplets)")
    triplets = np.frombuffer(body, dtype="<f4").reshape(-1, 3).astype(np.float64)

    nan_rows = np.isnan(triplets).any(axis=1)
    inf_rows = np.isinf(triplets).any(axis=1)
    streamlines: list[np.ndarray] = []
    start = 0
    ended = False
    for row in range(len(triplets)):
        byte = offset + 12 * row
        if inf_rows[row]:
            if not np.all(np.isposinf(triplets[row])):
                raise TrackFileError(f"{path}: malformed terminator triplet at byte {byte}")
            if row != start:
                raise TrackFileError(
                    f"{path}: unterminated streamline before terminator at byte {byte}")
            ended = True
            if row != len(triplets) - 1:
                raise TrackFileError(f"{path}: trailing data after terminator at byte {byte + 12}")
            break
        if nan_rows[row]:
            if not np.all(np.isnan(triplets[row])):
                raise TrackFileError(f"{path}: malformed separator triplet at byte {byte}")
            if row == start:
                raise TrackFileError(f"{path}: empty streamline at byte {byte}")
            streamlines.append(triplets[start:row].copy())
            start = row + 1
    if not ended:
        raise TrackFileError(
            f"{path}: missing terminator triplet at byte {offset + len(body)}")

    declared = fields.get("count")
    if declared is not None:
        try:
            declared_n = int(declared)
        except ValueError:
            raise TrackFileError(f"{path}: non-integer count field {declared!r}") from None
        if declared_n != len(streamlines):
            raise TrackFileError(
                f"{path}: header count {declared_n} != {len(streamlines)} streamlines decoded")
    return streamlines

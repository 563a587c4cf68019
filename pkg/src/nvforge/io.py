"""File formats: timestamp streams (CSV and binary), tables, fit JSON.

No published raw-data format exists for this kind of measurement, so both
stream encodings are defined here and documented in the README:

* CSV: header ``channel,time_ps``, one detection per row.
* NVPS binary: magic ``NVPS``, version u16 little-endian (currently 1),
  record count u64, then 9-byte records of (channel u8, time_ps u64).

Files may interleave several channels; records must be time-ordered and a
single channel's timestamps strictly increasing. A stream's duration is the
file's last timestamp unless the caller overrides it. Validation errors name
the first offending record (1-based, header excluded).
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .photophysics import PhotonStream

__all__ = [
    "ingest_timestamps",
    "write_streams",
    "write_csv_columns",
    "read_csv_columns",
    "write_json",
]

NVPS_MAGIC = b"NVPS"
NVPS_VERSION = 1
_NVPS_RECORD = np.dtype([("channel", "u1"), ("time_ps", "<u8")])
_MAX_TIME = np.iinfo(np.int64).max


def _parse_csv_records(text: str, path: str) -> tuple[np.ndarray, np.ndarray]:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty file, expected a channel,time_ps header")
    if lines[0].replace(" ", "") != "channel,time_ps":
        raise ValueError(f"{path}: first line must be the header 'channel,time_ps'")
    if len(lines) == 1:
        raise ValueError(f"{path}: no records after the header")
    channels = np.empty(len(lines) - 1, dtype=np.int64)
    times = np.empty(len(lines) - 1, dtype=np.int64)
    for i, line in enumerate(lines[1:], start=1):
        parts = line.split(",")
        if len(parts) != 2:
            raise ValueError(f"{path}: record {i}: expected 2 fields, got {len(parts)}")
        try:
            ch, t = int(parts[0]), int(parts[1])
        except ValueError:
            raise ValueError(f"{path}: record {i}: non-integer field in {line!r}") from None
        channels[i - 1] = ch
        times[i - 1] = t
    return channels, times


def _parse_nvps_records(raw: bytes, path: str) -> tuple[np.ndarray, np.ndarray]:
    if len(raw) < 14:
        raise ValueError(f"{path}: truncated header ({len(raw)} bytes)")
    if raw[:4] != NVPS_MAGIC:
        raise ValueError(f"{path}: bad magic {raw[:4]!r}, expected {NVPS_MAGIC!r}")
    version, count = struct.unpack_from("<HQ", raw, 4)
    if version != NVPS_VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    body = raw[14:]
    expected = count * _NVPS_RECORD.itemsize
    if len(body) != expected:
        raise ValueError(f"{path}: body is {len(body)} bytes, expected {expected} for {count} records")
    if count == 0:
        raise ValueError(f"{path}: no records")
    rec = np.frombuffer(body, dtype=_NVPS_RECORD)
    over = np.nonzero(rec["time_ps"] > _MAX_TIME)[0]
    if over.size:
        raise ValueError(f"{path}: record {over[0] + 1}: timestamp exceeds the supported range")
    return rec["channel"].astype(np.int64), rec["time_ps"].astype(np.int64)


def ingest_timestamps(path, format: str = "csv", channel: int | None = None, duration_ps: int | None = None) -> PhotonStream:
    """Read one channel's photon stream from a timestamp file.

    Parameters
    ----------
    format : {"csv", "nvps"}
    channel : int, optional
        Which channel to extract. Required when the file holds several;
        otherwise the single present channel is used.
    duration_ps : int, optional
        Acquisition length override. Defaults to the file's last timestamp
        across all channels, so channels from one file share one duration.
    """
    path = Path(path)
    if format == "csv":
        channels, times = _parse_csv_records(path.read_text(), str(path))
    elif format == "nvps":
        channels, times = _parse_nvps_records(path.read_bytes(), str(path))
    else:
        raise ValueError(f"unknown stream format {format!r}")

    neg = np.nonzero(times < 0)[0]
    if neg.size:
        raise ValueError(f"{path}: record {neg[0] + 1}: negative timestamp {times[neg[0]]}")
    bad = np.nonzero(np.diff(times) < 0)[0]
    if bad.size:
        i = int(bad[0]) + 1
        raise ValueError(
            f"{path}: record {i + 1}: timestamp {times[i]} goes backwards (previous {times[i - 1]})"
        )
    bad_ch = np.nonzero((channels < 0) | (channels > 255))[0]
    if bad_ch.size:
        raise ValueError(f"{path}: record {bad_ch[0] + 1}: channel {channels[bad_ch[0]]} outside [0, 255]")

    present = np.unique(channels)
    if channel is None:
        if present.size != 1:
            raise ValueError(
                f"{path}: file holds channels {present.tolist()}; pass channel= to pick one"
            )
        channel = int(present[0])
    mask = channels == channel
    if not mask.any():
        raise ValueError(f"{path}: no records on channel {channel} (present: {present.tolist()})")
    sel = times[mask]
    dup = np.nonzero(np.diff(sel) == 0)[0]
    if dup.size:
        # locate the duplicate's position in the file for the message
        idx = np.nonzero(mask)[0][dup[0] + 1]
        raise ValueError(f"{path}: record {idx + 1}: duplicate timestamp {sel[dup[0]]} on channel {channel}")

    if duration_ps is None:
        duration_ps = max(int(times[-1]), 1)
    return PhotonStream(channel, sel, int(duration_ps))


def write_streams(path, streams, format: str = "csv") -> None:
    """Write one or more streams as a single time-ordered timestamp file."""
    if isinstance(streams, PhotonStream):
        streams = [streams]
    if not streams:
        raise ValueError("nothing to write")
    channels = np.concatenate([np.full(s.n_photons, s.channel, dtype=np.int64) for s in streams])
    times = np.concatenate([s.timestamps_ps for s in streams])
    order = np.lexsort((channels, times))
    channels, times = channels[order], times[order]
    path = Path(path)
    if format == "csv":
        lines = ["channel,time_ps"]
        lines.extend(f"{c},{t}" for c, t in zip(channels.tolist(), times.tolist()))
        path.write_text("\n".join(lines) + "\n")
    elif format == "nvps":
        rec = np.empty(times.size, dtype=_NVPS_RECORD)
        rec["channel"] = channels
        rec["time_ps"] = times
        header = NVPS_MAGIC + struct.pack("<HQ", NVPS_VERSION, times.size)
        path.write_bytes(header + rec.tobytes())
    else:
        raise ValueError(f"unknown stream format {format!r}")


def _format_cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv_columns(path, header: list, columns: list) -> None:
    """Write named columns as CSV; floats use repr so output is bit-stable."""
    if len(header) != len(columns):
        raise ValueError("header and column counts differ")
    cols = [np.asarray(c) for c in columns]
    n = {c.size for c in cols}
    if len(n) != 1:
        raise ValueError("columns must share one length")
    lines = [",".join(header)]
    for row in zip(*[c.tolist() for c in cols]):
        lines.append(",".join(_format_cell(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv_columns(path, required: list | None = None) -> dict:
    """Read a numeric CSV into {column name: float array}."""
    path = Path(path)
    lines = [ln.strip() for ln in path.read_text().splitlines() if ln.strip()]
    if len(lines) < 2:
        raise ValueError(f"{path}: need a header line and at least one data row")
    header = [h.strip() for h in lines[0].split(",")]
    data = {h: [] for h in header}
    for i, line in enumerate(lines[1:], start=1):
        parts = line.split(",")
        if len(parts) != len(header):
            raise ValueError(f"{path}: row {i}: expected {len(header)} fields, got {len(parts)}")
        for h, p in zip(header, parts):
            try:
                data[h].append(float(p))
            except ValueError:
                raise ValueError(f"{path}: row {i}: non-numeric value {p!r} in column {h}") from None
    out = {h: np.array(v, dtype=float) for h, v in data.items()}
    if required:
        missing = [c for c in required if c not in out]
        if missing:
            raise ValueError(f"{path}: missing required columns {missing} (found {header})")
    return out


def write_json(path, obj) -> None:
    """Canonical JSON: sorted keys, 2-space indent, trailing newline."""
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")

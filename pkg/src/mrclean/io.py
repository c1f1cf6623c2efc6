"""TRIO container reading and writing.

A TRIO container is a directory holding

``header.json``
    ``{"rate_hz": float, "channels": [{"name", "modality", "unit"}, ...],
    "n_samples": int}``
``data.f32``
    little-endian float32 samples, frame-major (all channels of sample 0,
    then all channels of sample 1, ...)
``markers.csv``
    a ``sample,label`` header followed by one row per marker
"""

from __future__ import annotations

import csv
import json
import os
from pathlib import Path

import numpy as np

from .recording import ChannelInfo, MarkerList, Modality, Recording

HEADER_FILE = "header.json"
DATA_FILE = "data.f32"
MARKERS_FILE = "markers.csv"
_DTYPE = np.dtype("<f4")


class ContainerError(ValueError):
    """Raised when a container is missing, malformed or inconsistent."""


def read_markers(path) -> MarkerList:
    """Read a ``sample,label`` CSV. Rows must be sorted by sample."""
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header[:2]] != ["sample", "label"]:
                raise ContainerError(f"{path}: expected header 'sample,label'")
            rows = [(int(r[0]), r[1] if len(r) > 1 else "") for r in reader if r]
    except FileNotFoundError:
        raise ContainerError(f"missing marker file {path}") from None
    try:
        return MarkerList(rows, sort=False)
    except ValueError as exc:
        raise ContainerError(f"{path}: {exc}") from None


def write_markers(markers, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sample", "label"])
        for m in markers:
            writer.writerow([m.sample, m.label])


def load_recording(path) -> Recording:
    """Load a TRIO container directory.

    Raises
    ------
    ContainerError
        On a missing or short data file, a header/data sample-count
        mismatch, unsorted markers or non-finite samples.
    """
    path = Path(path)
    header_path = path / HEADER_FILE
    data_path = path / DATA_FILE
    if not header_path.is_file():
        raise ContainerError(f"missing header file {header_path}")
    if not data_path.is_file():
        raise ContainerError(f"missing data file {data_path}")
    with open(header_path, encoding="utf-8") as fh:
        header = json.load(fh)
    try:
        rate = float(header["rate_hz"])
        channels = [ChannelInfo(c["name"], Modality(c.get("modality", "OTHER")),
                                c.get("unit", "uV")) for c in header["channels"]]
        n_samples = int(header["n_samples"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ContainerError(f"{header_path}: malformed header ({exc})") from None

    raw = np.fromfile(data_path, dtype=_DTYPE)
    expected = n_samples * len(channels)
    if raw.size != expected:
        raise ContainerError(
            f"length mismatch: header declares {n_samples} samples x {len(channels)} "
            f"channels = {expected} values, data file holds {raw.size}"
        )
    data = raw.reshape(n_samples, len(channels)).T.astype(np.float64)
    if not np.all(np.isfinite(data)):
        raise ContainerError(f"{data_path}: non-finite value in data")

    markers_path = path / MARKERS_FILE
    markers = read_markers(markers_path) if markers_path.is_file() else MarkerList()
    try:
        return Recording(rate, channels, data, markers)
    except ValueError as exc:
        raise ContainerError(f"{path}: {exc}") from None


def save_recording(rec: Recording, path) -> None:
    """Write ``rec`` as a TRIO container directory (created if needed).

    Values are stored as float32; loading the container back reproduces
    the float32-rounded data exactly.
    """
    if not np.all(np.isfinite(rec.data)):
        raise ContainerError("non-finite value in recording; refusing to save")
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create container directory {path}: {exc}") from exc
    header = {
        "rate_hz": rec.rate_hz,
        "channels": [c.to_dict() for c in rec.channels],
        "n_samples": rec.n_samples,
    }
    with open(path / HEADER_FILE, "w", encoding="utf-8") as fh:
        json.dump(header, fh, indent=2)
        fh.write("\n")
    np.ascontiguousarray(rec.data.T, dtype=_DTYPE).tofile(path / DATA_FILE)
    write_markers(rec.markers, path / MARKERS_FILE)


def quantize(rec: Recording) -> Recording:
    """Round the data to float32, as a save/load round-trip would."""
    return rec.with_data(rec.data.astype(_DTYPE).astype(np.float64))


def read_csv_recording(path, rate_hz=None, modality=Modality.EEG) -> Recording:
    """Import a small plain CSV fixture.

    The first row holds column names. If the first column is called
    ``time`` (or ``t``) it is used to infer ``rate_hz`` when not given;
    every other column becomes a channel of ``modality``.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        names = [n.strip() for n in next(reader)]
        rows = np.array([[float(v) for v in r] for r in reader if r], dtype=np.float64)
    if rows.size == 0:
        raise ContainerError(f"{path}: no data rows")
    if names[0].lower() in ("time", "t", "time_s"):
        t, rows, names = rows[:, 0], rows[:, 1:], names[1:]
        if rate_hz is None:
            if t.size < 2:
                raise ContainerError(f"{path}: cannot infer rate from a single row")
            rate_hz = 1.0 / float(np.median(np.diff(t)))
    if rate_hz is None:
        raise ContainerError(f"{path}: no time column; rate_hz must be given")
    if not np.all(np.isfinite(rows)):
        raise ContainerError(f"{path}: non-finite value in data")
    return Recording(rate_hz, [ChannelInfo(n, modality) for n in names], rows.T)


def write_table(path, columns: dict) -> None:
    """Write equal-length columns to CSV, header from the dict keys."""
    keys = list(columns)
    cols = [np.asarray(columns[k]).ravel() for k in keys]
    n = len(cols[0]) if cols else 0
    if any(len(c) != n for c in cols):
        raise ValueError("all table columns must have equal length")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(keys)
        for i in range(n):
            writer.writerow([_fmt(c[i]) for c in cols])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    return v


def ensure_parent(path) -> Path:
    path = Path(path)
    if path.parent and not path.parent.exists():
        os.makedirs(path.parent, exist_ok=True)
    return path

"""Bit-exact binary file formats, PGM export, and CSV run logs.

Binary layout (all integers little-endian):

    bytes 0-3    magic: "CTI1" image, "CTS1" sinogram, "CTD1" drift/shifts
    bytes 4-7    format version (uint32, currently 1)
    bytes 8-15   dims: two uint32 (rows, cols)
    bytes 16-    payload: rows*cols IEEE-754 float64, little-endian, row-major

Drift files hold (x*, y*) pairs as (k, 2); per-angle shift vectors reuse the
same magic with dims (k, 1).
"""

import csv
import os
import struct
from dataclasses import dataclass

import numpy as np

from .geometry import DriftModel, Image, Sinogram
from .shift import ShiftParams

MAGIC_IMAGE = b"CTI1"
MAGIC_SINOGRAM = b"CTS1"
MAGIC_DRIFT = b"CTD1"
FORMAT_VERSION = 1

_HEADER = struct.Struct("<4sIII")
# Refuse to allocate absurd payloads from corrupt headers.
_MAX_ELEMENTS = 1 << 28


class FileFormatError(ValueError):
    """Malformed container file."""


class BadMagicError(FileFormatError):
    """Magic bytes do not match the expected content kind."""


class TruncatedPayloadError(FileFormatError):
    """File ends before the payload declared in the header."""


def _write(path, magic, array2d):
    a = np.ascontiguousarray(array2d, dtype="<f8")
    rows, cols = a.shape
    if rows >= 1 << 32 or cols >= 1 << 32:
        raise FileFormatError(f"dimensions {a.shape} overflow the header")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(magic, FORMAT_VERSION, rows, cols))
        fh.write(a.tobytes())


def _read(path, magic):
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise TruncatedPayloadError(f"{path}: header truncated")
        got_magic, version, rows, cols = _HEADER.unpack(head)
        if got_magic != magic:
            raise BadMagicError(
                f"{path}: expected magic {magic.decode()}, found {got_magic!r}"
            )
        if version != FORMAT_VERSION:
            raise FileFormatError(f"{path}: unsupported version {version}")
        count = rows * cols
        if count > _MAX_ELEMENTS:
            raise FileFormatError(f"{path}: dimensions {(rows, cols)} overflow")
        payload = fh.read(8 * count)
        if len(payload) != 8 * count:
            raise TruncatedPayloadError(
                f"{path}: expected {8 * count} payload bytes, found {len(payload)}"
            )
    return np.frombuffer(payload, dtype="<f8").astype(float).reshape(rows, cols)


def write_image(path, image):
    _write(path, MAGIC_IMAGE, image.as_array())


def read_image(path):
    a = _read(path, MAGIC_IMAGE)
    if a.shape[0] != a.shape[1]:
        raise FileFormatError(f"{path}: image must be square, got {a.shape}")
    return Image.from_array(a)


def write_sinogram(path, sino):
    _write(path, MAGIC_SINOGRAM, sino.values)


def read_sinogram(path):
    return Sinogram(values=_read(path, MAGIC_SINOGRAM))


def write_drift(path, drift):
    _write(path, MAGIC_DRIFT, drift.cors.reshape(-1, 2))


def read_drift(path, n_angles=None):
    """Read a drift file; the row count determines the drift kind."""
    a = _read(path, MAGIC_DRIFT)
    if a.shape[1] != 2:
        raise FileFormatError(
            f"{path}: drift files hold (x*, y*) pairs, got {a.shape[1]} columns"
        )
    if a.shape[0] == 0:
        return DriftModel.none()
    if a.shape[0] == 1:
        return DriftModel.single(a[0, 0], a[0, 1])
    if n_angles is not None and a.shape[0] != n_angles:
        raise FileFormatError(
            f"{path}: {a.shape[0]} CoR entries do not match {n_angles} angles"
        )
    return DriftModel.per_angle(a)


def write_shifts(path, shifts):
    p = np.asarray(getattr(shifts, "p", shifts), dtype=float).ravel()
    _write(path, MAGIC_DRIFT, p.reshape(-1, 1))


def read_shifts(path):
    a = _read(path, MAGIC_DRIFT)
    if a.shape[1] != 1:
        raise FileFormatError(
            f"{path}: shift files hold one value per angle, got {a.shape[1]} columns"
        )
    return ShiftParams(p=a.ravel())


def export_pgm(image, path, normalize=False):
    """Write a 16-bit binary PGM (P5) rendering of an image.

    With ``normalize`` the value range is mapped linearly onto [0, 65535]
    (a constant image maps to 0); otherwise values are rounded and clamped
    to [0, 65535].
    """
    a = image.as_array() if isinstance(image, Image) else np.asarray(image, dtype=float)
    if normalize:
        lo, hi = a.min(), a.max()
        scaled = np.zeros_like(a) if hi == lo else (a - lo) / (hi - lo) * 65535.0
    else:
        scaled = np.clip(a, 0.0, 65535.0)
    pixels = np.rint(scaled).astype(">u2")
    with open(path, "wb") as fh:
        fh.write(f"P5\n{a.shape[1]} {a.shape[0]}\n65535\n".encode("ascii"))
        fh.write(pixels.tobytes())


LOG_COLUMNS = ("iter", "phi", "grad_inf_norm", "inner_iters", "step",
               "fg_evals", "wall_ms", "ssim")


@dataclass
class LogRecord:
    iter: int
    phi: float
    grad_inf_norm: float
    inner_iters: int
    step: float
    fg_evals: int
    wall_ms: float
    ssim: float | None = None


def append_log_row(csv_path, record, comments=None):
    """Append one iteration record, writing comments and the header first
    when the file does not exist yet."""
    if isinstance(record, LogRecord):
        row = {k: getattr(record, k) for k in LOG_COLUMNS}
    else:
        row = {k: record.get(k) for k in LOG_COLUMNS}
    fresh = not os.path.exists(csv_path) or os.path.getsize(csv_path) == 0
    with open(csv_path, "a", newline="") as fh:
        if fresh:
            for line in comments or ():
                fh.write(f"# {line}\n")
            fh.write(",".join(LOG_COLUMNS) + "\n")
        writer = csv.writer(fh)
        writer.writerow(
            ["" if row[k] is None else row[k] for k in LOG_COLUMNS]
        )


def read_log(csv_path):
    """Parse a run log back into a list of dicts (comments skipped)."""
    out = []
    with open(csv_path, "r", newline="") as fh:
        rows = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.DictReader(rows)
    for rec in reader:
        parsed = {}
        for k in LOG_COLUMNS:
            v = rec.get(k, "")
            if v == "" or v is None:
                parsed[k] = None
            elif k in ("iter", "inner_iters", "fg_evals"):
                parsed[k] = int(v)
            else:
                parsed[k] = float(v)
        out.append(parsed)
    return out

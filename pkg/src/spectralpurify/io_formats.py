"""Lossless flat-binary array files, 8-bit PNG export, and CSV helpers.

The flat-binary family shares one little-endian layout:

    magic   4 bytes ASCII   ("FPIM" images, "FPDN" denoiser weights,
                             "FPCL" classifier weights)
    version u32             (currently 1)
    ndim    u32
    dims    u32 * ndim
    payload f64 * prod(dims), C order

"FPCL" files carry a small header (kind code, array count) followed by a
sequence of shape-prefixed payloads, one per weight array.

PNG output is for human inspection only; the pipeline always exchanges f64
flat-binary so quantization never corrupts purification inputs.
"""

from __future__ import annotations

import csv
import struct
import zlib
from pathlib import Path

import numpy as np

__all__ = [
    "FormatError",
    "write_array",
    "read_array",
    "write_fpcl",
    "read_fpcl",
    "write_png",
    "write_csv",
    "read_csv",
]

VERSION = 1
MAGICS = (b"FPIM", b"FPDN", b"FPCL")


class FormatError(ValueError):
    """Raised when a flat-binary file fails magic/shape validation."""


def _pack_array(a: np.ndarray) -> bytes:
    a = np.ascontiguousarray(a, dtype=np.float64)
    header = struct.pack("<I", a.ndim) + struct.pack(f"<{a.ndim}I", *a.shape)
    return header + a.tobytes()


def _unpack_array(buf: bytes, offset: int) -> tuple[np.ndarray, int]:
    (ndim,) = struct.unpack_from("<I", buf, offset)
    offset += 4
    if ndim > 8:
        raise FormatError(f"implausible ndim {ndim}")
    dims = struct.unpack_from(f"<{ndim}I", buf, offset)
    offset += 4 * ndim
    count = int(np.prod(dims, dtype=np.int64)) if ndim else 1
    end = offset + 8 * count
    if end > len(buf):
        raise FormatError("payload truncated")
    a = np.frombuffer(buf[offset:end], dtype="<f8").reshape(dims)
    return a.astype(np.float64), end


def write_array(path, array: np.ndarray, magic: str = "FPIM") -> None:
    """Write one f64 array with the given magic ("FPIM" or "FPDN")."""
    m = magic.encode("ascii")
    if m not in MAGICS:
        raise FormatError(f"unknown magic {magic!r}")
    data = m + struct.pack("<I", VERSION) + _pack_array(np.asarray(array))
    Path(path).write_bytes(data)


def read_array(path, magic: str = "FPIM") -> np.ndarray:
    """Read one array back, validating magic and shape header."""
    buf = Path(path).read_bytes()
    if len(buf) < 8:
        raise FormatError(f"{path}: file too short")
    if buf[:4] != magic.encode("ascii"):
        raise FormatError(f"{path}: bad magic {buf[:4]!r}, expected {magic!r}")
    (version,) = struct.unpack_from("<I", buf, 4)
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    array, end = _unpack_array(buf, 8)
    if end != len(buf):
        raise FormatError(f"{path}: trailing bytes after payload")
    return array


def write_fpcl(path, kind_code: int, arrays: list[np.ndarray]) -> None:
    """Write classifier weights: kind code + shape-prefixed f64 arrays."""
    data = b"FPCL" + struct.pack("<III", VERSION, kind_code, len(arrays))
    for a in arrays:
        data += _pack_array(np.asarray(a))
    Path(path).write_bytes(data)


def read_fpcl(path) -> tuple[int, list[np.ndarray]]:
    buf = Path(path).read_bytes()
    if buf[:4] != b"FPCL":
        raise FormatError(f"{path}: bad magic {buf[:4]!r}, expected 'FPCL'")
    version, kind_code, narrays = struct.unpack_from("<III", buf, 4)
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    offset = 16
    arrays = []
    for _ in range(narrays):
        a, offset = _unpack_array(buf, offset)
        arrays.append(a)
    if offset != len(buf):
        raise FormatError(f"{path}: trailing bytes after payload")
    return kind_code, arrays


def _png_chunk(tag: bytes, body: bytes) -> bytes:
    chunk = tag + body
    return struct.pack(">I", len(body)) + chunk + struct.pack(">I", zlib.crc32(chunk))


def write_png(path, image: np.ndarray) -> None:
    """Write an image in [0, 1] (H, W) or (H, W, 1|3) as an 8-bit PNG."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        img = img[:, :, None]
    if img.ndim != 3 or img.shape[2] not in (1, 3):
        raise ValueError(f"expected (H, W) or (H, W, 1|3), got {img.shape}")
    h, w, c = img.shape
    data = np.clip(np.round(img * 255.0), 0, 255).astype(np.uint8)
    color_type = 0 if c == 1 else 2
    raw = b"".join(b"\x00" + data[row].tobytes() for row in range(h))
    out = b"\x89PNG\r\n\x1a\n"
    out += _png_chunk(b"IHDR", struct.pack(">IIBBBBB", w, h, 8, color_type, 0, 0, 0))
    out += _png_chunk(b"IDAT", zlib.compress(raw, 9))
    out += _png_chunk(b"IEND", b"")
    Path(path).write_bytes(out)


def write_csv(path, header: list[str], rows: list[list]) -> None:
    """Write a CSV with '\n' line endings (byte-stable across platforms)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        rows = list(reader)
    if not rows:
        raise FormatError(f"{path}: empty CSV")
    return rows[0], rows[1:]

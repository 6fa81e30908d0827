"""Binary greyscale PGM (P5) images with values in ``[0, 1]``."""

from __future__ import annotations

import os
import tempfile
from typing import NamedTuple

import numpy as np

__all__ = ["PgmError", "WriteResult", "encode_pgm", "write_pgm", "read_pgm", "atomic_write_bytes"]


class PgmError(ValueError):
    pass


class WriteResult(NamedTuple):
    path: str
    clamped: bool  # True if any value was outside [0, 1]


def atomic_write_bytes(path, data: bytes):
    """Write to a temporary file in the target directory, then rename over ``path``."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def encode_pgm(image, maxval: int = 255) -> tuple[bytes, bool]:
    if maxval not in (255, 65535):
        raise PgmError("maxval must be 255 or 65535")
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise PgmError(f"PGM needs a 2-D image, got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise PgmError("image contains non-finite values")
    clamped = bool(np.any(img < 0.0) or np.any(img > 1.0))
    levels = np.rint(np.clip(img, 0.0, 1.0) * maxval)  # np.rint rounds half to even
    dtype = ">u1" if maxval == 255 else ">u2"
    h, w = img.shape
    header = f"P5\n{w} {h}\n{maxval}\n".encode("ascii")
    return header + levels.astype(dtype).tobytes(), clamped


def write_pgm(path, image, maxval: int = 255) -> WriteResult:
    """Map ``[0, 1]`` linearly to ``0..maxval`` and write atomically.

    Out-of-range values are clamped and reported via ``WriteResult.clamped``.
    """
    data, clamped = encode_pgm(image, maxval)
    atomic_write_bytes(path, data)
    return WriteResult(os.fspath(path), clamped)


def _header_tokens(buf: bytes):
    """Yield (token, end offset) for the four header fields, skipping comments."""
    pos, n = 0, len(buf)
    for _ in range(4):
        while pos < n:
            c = buf[pos : pos + 1]
            if c == b"#":
                while pos < n and buf[pos : pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            elif c.isspace():
                pos += 1
            else:
                break
        start = pos
        while pos < n and not buf[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise PgmError("truncated PGM header")
        yield buf[start:pos], pos


def read_pgm(path) -> np.ndarray:
    """Read a P5 image and return ``levels / maxval`` as float64."""
    with open(path, "rb") as fh:
        buf = fh.read()
    toks = list(_header_tokens(buf))
    magic, w, h, maxval = (t for t, _ in toks)
    if magic != b"P5":
        raise PgmError(f"not a binary PGM (magic {magic!r})")
    try:
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError as exc:
        raise PgmError("malformed PGM header") from exc
    if w < 1 or h < 1 or maxval not in (255, 65535):
        raise PgmError(f"unsupported PGM header: {w}x{h}, maxval {maxval}")
    start = toks[-1][1] + 1  # exactly one whitespace byte after maxval
    dtype = ">u1" if maxval == 255 else ">u2"
    nbytes = w * h * np.dtype(dtype).itemsize
    raster = buf[start : start + nbytes]
    if len(raster) != nbytes:
        raise PgmError("truncated PGM raster")
    levels = np.frombuffer(raster, dtype=dtype).reshape(h, w)
    if levels.max(initial=0) > maxval:
        raise PgmError("pixel value exceeds maxval")
    return levels.astype(np.float64) / maxval

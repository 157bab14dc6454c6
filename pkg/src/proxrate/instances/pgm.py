"""Grayscale PGM (P2 ASCII and P5 binary) reading and writing.

Pixels are mapped linearly between ``[0, maxval]`` and ``[0, 1]``.  Binary
files with ``maxval > 255`` store big-endian 16-bit samples.
"""

from __future__ import annotations

import os

import numpy as np

from ..exceptions import FormatError

_WHITESPACE = b" \t\n\r\v\f"


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def skip_space(self):
        data = self.data
        while self.pos < len(data):
            c = data[self.pos:self.pos + 1]
            if c == b"#":
                end = data.find(b"\n", self.pos)
                self.pos = len(data) if end < 0 else end + 1
            elif c in _WHITESPACE:
                self.pos += 1
            else:
                break

    def token(self) -> bytes:
        self.skip_space()
        start = self.pos
        while self.pos < len(self.data) and self.data[self.pos:self.pos + 1] not in _WHITESPACE \
                and self.data[self.pos:self.pos + 1] != b"#":
            self.pos += 1
        if start == self.pos:
            raise FormatError("unexpected end of file", start)
        return self.data[start:self.pos]

    def integer(self, what: str, low: int, high: int) -> int:
        self.skip_space()
        start = self.pos
        tok = self.token()
        if not tok.isdigit():
            raise FormatError(f"expected {what}, found {tok[:16]!r}", start)
        value = int(tok)
        if not low <= value <= high:
            raise FormatError(f"{what} {value} outside [{low}, {high}]", start)
        return value


def parse_pgm(data: bytes) -> np.ndarray:
    """Decode PGM bytes into a float64 array with values in ``[0, 1]``."""
    rd = _Reader(data)
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise FormatError(f"bad magic {magic!r}, expected P2 or P5", 0)
    rd.pos = 2
    width = rd.integer("width", 1, 1 << 24)
    height = rd.integer("height", 1, 1 << 24)
    maxval = rd.integer("maxval", 1, 65535)
    n = width * height
    if magic == b"P5":
        if rd.pos >= len(data) or data[rd.pos:rd.pos + 1] not in _WHITESPACE:
            raise FormatError("missing whitespace before raster", rd.pos)
        start = rd.pos + 1
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        need = n * dtype.itemsize
        if len(data) - start < need:
            raise FormatError(f"truncated raster: need {need} bytes, have {len(data) - start}",
                              len(data))
        raw = np.frombuffer(data, dtype=dtype, count=n, offset=start).astype(np.int64)
        if raw.max() > maxval:
            bad = int(np.argmax(raw > maxval))
            raise FormatError(f"sample exceeds maxval {maxval}", start + bad * dtype.itemsize)
    else:
        raw = np.empty(n, dtype=np.int64)
        for i in range(n):
            raw[i] = rd.integer("sample", 0, maxval)
    return raw.reshape(height, width) / float(maxval)


def load_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return parse_pgm(fh.read())


def encode_pgm(image, binary: bool = True) -> bytes:
    """Encode an image with values in ``[0, 1]`` at maxval 255."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2 or img.size == 0:
        raise FormatError(f"image must be a non-empty 2-D array, got shape {img.shape}", 0)
    if not np.all(np.isfinite(img)):
        raise FormatError("image contains non-finite values", 0)
    scaled = np.clip(img, 0.0, 1.0) * 255.0
    # round half away from zero; values are nonnegative here
    q = np.floor(scaled + 0.5).astype(np.uint8)
    h, w = img.shape
    if binary:
        return b"P5\n%d %d\n255\n" % (w, h) + q.tobytes()
    rows = "\n".join(" ".join(str(v) for v in row) for row in q)
    return ("P2\n%d %d\n255\n" % (w, h) + rows + "\n").encode("ascii")


def save_pgm(image, path, binary: bool = True) -> None:
    data = encode_pgm(image, binary)
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)

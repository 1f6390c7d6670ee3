"""Plain portable-anymap I/O for image fixtures.

Supports the P2/P5 graymap and P3/P6 pixmap variants with maxval up to 255
(the metric suite works on 8-bit sources).  The writer emits a canonical
header, so writing the same array twice yields byte-identical files.
"""

from __future__ import annotations

import numpy as np


class PnmError(ValueError):
    """Malformed or unsupported anymap file."""


def read_pnm(path) -> tuple[np.ndarray, int]:
    """Read a P2/P3/P5/P6 file; returns (array, maxval).

    Grayscale files load as (H, W), color as (H, W, 3), dtype uint8.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    tokens, pos = [], 0
    # header: magic, width, height, maxval, with '#' comments allowed
    while len(tokens) < 4 and pos < len(data):
        if data[pos : pos + 1].isspace():
            pos += 1
        elif data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
        else:
            start = pos
            while pos < len(data) and not data[pos : pos + 1].isspace():
                pos += 1
            tokens.append(data[start:pos])
    if len(tokens) < 4:
        raise PnmError(f"{path}: truncated PNM header")
    magic = tokens[0].decode("ascii")
    if magic not in ("P2", "P3", "P5", "P6"):
        raise PnmError(f"{path}: unsupported PNM magic {magic!r}")
    width, height, maxval = (int(t) for t in tokens[1:4])
    if not 0 < maxval <= 255:
        raise PnmError(f"{path}: only maxval in 1..255 supported, got {maxval}")
    channels = 3 if magic in ("P3", "P6") else 1
    count = width * height * channels
    if magic in ("P5", "P6"):
        pos += 1  # single whitespace byte after maxval
        if len(data) - pos < count:
            raise PnmError(f"{path}: truncated raster data")
        raster = np.frombuffer(data, dtype=np.uint8, count=count, offset=pos)
    else:
        values = data[pos:].split()
        if len(values) < count:
            raise PnmError(f"{path}: expected {count} samples, found {len(values)}")
        raster = np.array([int(v) for v in values[:count]], dtype=np.uint8)
    if raster.size != count:
        raise PnmError(f"{path}: truncated raster data")
    img = raster.reshape((height, width, channels))
    return (img[:, :, 0] if channels == 1 else img).copy(), maxval


def write_pnm(path, image: np.ndarray, maxval: int = 255, ascii_format: bool = False):
    """Write an array as P5/P6 (binary, default) or P2/P3 (ascii).

    Values are rounded and clipped into [0, maxval].
    """
    image = np.asarray(image)
    if image.ndim == 2:
        channels = 1
    elif image.ndim == 3 and image.shape[2] == 3:
        channels = 3
    else:
        raise PnmError("image must be (H, W) or (H, W, 3)")
    if not 0 < maxval <= 255:
        raise PnmError("only maxval in 1..255 supported")
    data = np.clip(np.rint(image.astype(float)), 0, maxval).astype(np.uint8)
    h, w = data.shape[:2]
    if ascii_format:
        magic = "P2" if channels == 1 else "P3"
        body = "\n".join(" ".join(str(v) for v in row) for row in data.reshape(h, -1))
        payload = f"{magic}\n{w} {h}\n{maxval}\n{body}\n".encode("ascii")
    else:
        magic = "P5" if channels == 1 else "P6"
        payload = f"{magic}\n{w} {h}\n{maxval}\n".encode("ascii") + data.tobytes()
    with open(path, "wb") as fh:
        fh.write(payload)

"""Binary PGM (P5) and PFM (Pf) readers and writers."""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np


def write_pgm(path, image: np.ndarray) -> None:
    img = np.asarray(image)
    if img.ndim != 2:
        raise ValueError(f"PGM needs a 2D image, got shape {img.shape}")
    if img.dtype != np.uint8:
        img = np.clip(np.round(img), 0, 255).astype(np.uint8)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(img).tobytes())


def _pgm_tokens(data: bytes, count: int):
    # header tokens may be separated by whitespace and '#' comments
    tokens, pos = [], 0
    while len(tokens) < count:
        m = re.compile(rb"\s*(#[^\n]*\n\s*)*([^\s#]+)").match(data, pos)
        if m is None:
            raise ValueError("truncated PGM header")
        tokens.append(m.group(2))
        pos = m.end()
    return tokens, pos + 1  # a single whitespace byte ends the header


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    (magic, w, h, maxval), start = _pgm_tokens(data, 4)
    if magic != b"P5":
        raise ValueError(f"{path}: not a binary PGM (magic {magic!r})")
    w, h, maxval = int(w), int(h), int(maxval)
    if maxval > 255:
        raw = np.frombuffer(data, dtype=">u2", count=w * h, offset=start)
        return raw.reshape(h, w)
    raw = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=start)
    return raw.reshape(h, w).copy()


def write_pfm(path, image: np.ndarray, scale: float = -1.0) -> None:
    """Single-channel PFM; negative scale means little-endian. Rows go bottom-up."""
    img = np.asarray(image, dtype=np.float32)
    if img.ndim != 2:
        raise ValueError(f"PFM writer handles 2D maps, got shape {img.shape}")
    if scale == 0:
        raise ValueError("PFM scale must be non-zero")
    h, w = img.shape
    dtype = "<f4" if scale < 0 else ">f4"
    with open(path, "wb") as fh:
        fh.write(f"Pf\n{w} {h}\n{scale:g}\n".encode("ascii"))
        fh.write(np.flipud(img).astype(dtype).tobytes())


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.readline().strip()
        if magic == b"Pf":
            channels = 1
        elif magic == b"PF":
            channels = 3
        else:
            raise ValueError(f"{path}: not a PFM file (magic {magic!r})")
        dims = fh.readline().split()
        while dims and dims[0].startswith(b"#"):
            dims = fh.readline().split()
        w, h = int(dims[0]), int(dims[1])
        scale = float(fh.readline().strip())
        dtype = "<f4" if scale < 0 else ">f4"
        data = np.frombuffer(fh.read(), dtype=dtype, count=w * h * channels)
    shape = (h, w) if channels == 1 else (h, w, 3)
    return np.flipud(data.reshape(shape)).astype(np.float32)

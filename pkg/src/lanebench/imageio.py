"""Binary PGM/PPM encoding for frames, masks and patch artifacts."""

import numpy as np

from .geometry import ImageFrame

__all__ = ["encode_pgm", "decode_pgm", "encode_ppm", "frame_to_pgm", "mask_to_pgm"]


def encode_pgm(gray: np.ndarray) -> bytes:
    """8-bit binary PGM (P5) from an (h, w) array."""
    g = np.asarray(gray)
    if g.dtype != np.uint8:
        g = np.clip(np.rint(g), 0, 255).astype(np.uint8)
    h, w = g.shape
    return b"P5\n%d %d\n255\n" % (w, h) + g.tobytes()


def decode_pgm(data: bytes) -> np.ndarray:
    """Parse a binary PGM (P5) into an (h, w) uint8 array."""
    if not data.startswith(b"P5"):
        raise ValueError("not a binary PGM (P5) payload")
    fields: list[bytes] = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    w, h, maxval = (int(f) for f in fields)
    if maxval != 255:
        raise ValueError("only 8-bit PGM is supported")
    raw = data[pos:pos + w * h]
    if len(raw) != w * h:
        raise ValueError("truncated PGM payload")
    return np.frombuffer(raw, dtype=np.uint8).reshape(h, w).copy()


def encode_ppm(frame: ImageFrame) -> bytes:
    """8-bit binary PPM (P6) of an RGB frame."""
    return b"P6\n%d %d\n255\n" % (frame.width, frame.height) + frame.pixels.tobytes()


def frame_to_pgm(frame: ImageFrame) -> bytes:
    return encode_pgm(frame.gray())


def mask_to_pgm(mask: np.ndarray) -> bytes:
    return encode_pgm(np.where(np.asarray(mask, dtype=bool), 255, 0))

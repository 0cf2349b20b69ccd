"""Writer for the shared BEMB embedding file format.

Layout (little-endian): magic "BEMB", u32 version=1, u32 dim, then one
record per image of (u32 id-length, UTF-8 id bytes, dim x float32). The
classifier package reads these files; a cross-package round-trip is part
of the test suite.
"""

from __future__ import annotations

import struct

import numpy as np

BEMB_MAGIC = b"BEMB"
BEMB_VERSION = 1


def write_bemb(path, ids: list[str], vectors: np.ndarray) -> None:
    vectors = np.asarray(vectors, dtype="<f4")
    if vectors.ndim != 2 or vectors.shape[0] != len(ids):
        raise ValueError(f"need one vector per id, got {vectors.shape} for {len(ids)} ids")
    if not np.isfinite(vectors).all():
        raise ValueError("refusing to write non-finite embedding values")
    parts = [BEMB_MAGIC, struct.pack("<II", BEMB_VERSION, vectors.shape[1])]
    for rec_id, vec in zip(ids, vectors):
        raw = rec_id.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
        parts.append(vec.tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))

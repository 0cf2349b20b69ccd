"""Walk an image folder and write one 512-d float32 BEMB record per image,
id'd by relative path. Undecodable files are skipped with a warning."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .augment import list_images
from .bemb import write_bemb

log = logging.getLogger(__name__)


def extract(image_dir, out_path, encoder, batch: int = 32) -> int:
    """Embed every decodable image under ``image_dir``; returns the count."""
    if batch < 1:
        raise ValueError("batch must be at least 1")
    paths = list_images(image_dir)
    ids: list[str] = []
    chunks: list[np.ndarray] = []
    pending_ids: list[str] = []
    pending_imgs: list[Image.Image] = []

    def flush():
        if pending_imgs:
            chunks.append(encoder.encode(pending_imgs))
            ids.extend(pending_ids)
            for im in pending_imgs:
                im.close()
            pending_imgs.clear()
            pending_ids.clear()

    for path in paths:
        try:
            img = Image.open(path)
            img.load()
        except (UnidentifiedImageError, OSError) as exc:
            log.warning("skipping undecodable image %s: %s", path, exc)
            continue
        pending_ids.append(path.relative_to(image_dir).as_posix())
        pending_imgs.append(img)
        if len(pending_imgs) >= batch:
            flush()
    flush()

    if not ids:
        raise RuntimeError(f"no decodable images under {image_dir}")
    vectors = np.concatenate(chunks, axis=0)
    write_bemb(out_path, ids, vectors)
    return len(ids)

"""Image encoders producing 512-d vectors.

``clip`` is the published ViT-B/32 image tower with its own preprocessing
(resize to 224, center crop, channel normalization with the released
constants); it needs torch + transformers and the model weights. ``stub``
is a dependency-free deterministic stand-in with the same geometry: it
downsamples the 224-crop and applies a fixed random projection, so
embeddings vary smoothly with content and are bit-stable across runs.
Vectors from both are stored raw (unnormalized).
"""

from __future__ import annotations

import numpy as np
from PIL import Image

EMBED_DIM = 512
CLIP_MODEL_NAME = "openai/clip-vit-base-patch32"


def center_crop_224(image: Image.Image) -> Image.Image:
    """Resize the short side to 224 and crop the center square."""
    w, h = image.size
    scale = 224 / min(w, h)
    image = image.resize((max(224, round(w * scale)), max(224, round(h * scale))),
                         Image.Resampling.BICUBIC)
    w, h = image.size
    left = (w - 224) // 2
    top = (h - 224) // 2
    return image.crop((left, top, left + 224, top + 224))


class StubEncoder:
    """Deterministic offline encoder for tests and air-gapped runs."""

    name = "stub"
    dim = EMBED_DIM
    _GRID = 16  # 16 x 16 x 3 = 768 features before projection

    def __init__(self):
        rng = np.random.default_rng(0)  # fixed weights: part of the contract
        self._projection = rng.standard_normal((self._GRID * self._GRID * 3, EMBED_DIM))
        self._projection /= np.sqrt(self._GRID * self._GRID * 3)

    def encode(self, images: list[Image.Image]) -> np.ndarray:
        feats = np.empty((len(images), EMBED_DIM), dtype=np.float32)
        for i, img in enumerate(images):
            crop = center_crop_224(img.convert("RGB"))
            small = crop.resize((self._GRID, self._GRID), Image.Resampling.BILINEAR)
            pixels = np.asarray(small, dtype=np.float64).ravel() / 255.0 - 0.5
            feats[i] = (pixels @ self._projection).astype(np.float32)
        return feats


class ClipEncoder:
    """The published ViT-B/32 image encoder (lazy torch/transformers import)."""

    name = "clip"
    dim = EMBED_DIM

    def __init__(self, model_name: str = CLIP_MODEL_NAME, device: str = "cpu"):
        import torch
        from transformers import CLIPImageProcessor, CLIPVisionModelWithProjection

        self._torch = torch
        self._processor = CLIPImageProcessor.from_pretrained(model_name)
        self._model = CLIPVisionModelWithProjection.from_pretrained(model_name)
        self._model.eval().to(device)
        self._device = device

    def encode(self, images: list[Image.Image]) -> np.ndarray:
        torch = self._torch
        inputs = self._processor(
            images=[img.convert("RGB") for img in images], return_tensors="pt"
        ).to(self._device)
        with torch.no_grad():
            out = self._model(**inputs).image_embeds
        return out.cpu().numpy().astype(np.float32)


def make_encoder(name: str):
    if name == "stub":
        return StubEncoder()
    if name == "clip":
        return ClipEncoder()
    raise ValueError(f"unknown encoder {name!r} (expected 'clip' or 'stub')")

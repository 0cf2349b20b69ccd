"""The study's augmentation recipe: horizontal flip, shear up to +/-11
degrees horizontal and +/-6 vertical, rotation up to +/-8 degrees,
brightness within +/-25%, Gaussian blur up to 1.5 px, and noise on up to
2% of pixels. Every sampled parameter is logged in a JSON manifest so
augmented datasets can be audited.
"""

from __future__ import annotations

import json
import math
import shutil
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, ImageEnhance, ImageFilter, ImageOps

# Upper bounds from the dataset-construction recipe; specs may narrow but
# never exceed them.
MAX_SHEAR_X_DEG = 11.0
MAX_SHEAR_Y_DEG = 6.0
MAX_ROTATION_DEG = 8.0
MAX_BRIGHTNESS = 0.25
MAX_BLUR_PX = 1.5
MAX_NOISE_FRACTION = 0.02

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".webp", ".tif", ".tiff"}


@dataclass(frozen=True)
class AugmentSpec:
    horizontal_flip: bool = True
    shear_x_deg: float = MAX_SHEAR_X_DEG
    shear_y_deg: float = MAX_SHEAR_Y_DEG
    rotation_deg: float = MAX_ROTATION_DEG
    brightness: float = MAX_BRIGHTNESS
    blur_px: float = MAX_BLUR_PX
    noise_fraction: float = MAX_NOISE_FRACTION
    copies: int = 2

    def __post_init__(self):
        limits = (
            ("shear_x_deg", MAX_SHEAR_X_DEG),
            ("shear_y_deg", MAX_SHEAR_Y_DEG),
            ("rotation_deg", MAX_ROTATION_DEG),
            ("brightness", MAX_BRIGHTNESS),
            ("blur_px", MAX_BLUR_PX),
            ("noise_fraction", MAX_NOISE_FRACTION),
        )
        for field, bound in limits:
            value = getattr(self, field)
            if not 0.0 <= value <= bound:
                raise ValueError(f"{field}={value} outside [0, {bound}]")
        if self.copies < 0:
            raise ValueError("copies must be non-negative")


def flip_horizontal(image: Image.Image) -> Image.Image:
    """Mirror around the vertical axis (an involution)."""
    return ImageOps.mirror(image)


def shear(image: Image.Image, x_deg: float, y_deg: float) -> Image.Image:
    coeffs = (1.0, math.tan(math.radians(x_deg)), 0.0,
              math.tan(math.radians(y_deg)), 1.0, 0.0)
    return image.transform(image.size, Image.Transform.AFFINE, coeffs,
                           resample=Image.Resampling.BILINEAR)


def add_pixel_noise(image: Image.Image, fraction: float, rng: np.random.Generator) -> Image.Image:
    if fraction <= 0.0:
        return image
    arr = np.asarray(image).copy()
    h, w = arr.shape[:2]
    count = int(round(fraction * h * w))
    if count == 0:
        return image
    ys = rng.integers(0, h, size=count)
    xs = rng.integers(0, w, size=count)
    arr[ys, xs] = rng.integers(0, 256, size=(count, arr.shape[2]), dtype=np.uint8)
    return Image.fromarray(arr)


def sample_params(spec: AugmentSpec, rng: np.random.Generator) -> dict:
    return {
        "flip": bool(spec.horizontal_flip and rng.random() < 0.5),
        "shear_x_deg": float(rng.uniform(-spec.shear_x_deg, spec.shear_x_deg)),
        "shear_y_deg": float(rng.uniform(-spec.shear_y_deg, spec.shear_y_deg)),
        "rotation_deg": float(rng.uniform(-spec.rotation_deg, spec.rotation_deg)),
        "brightness_delta": float(rng.uniform(-spec.brightness, spec.brightness)),
        "blur_px": float(rng.uniform(0.0, spec.blur_px)),
        "noise_fraction": float(rng.uniform(0.0, spec.noise_fraction)),
    }


def apply_params(image: Image.Image, params: dict, rng: np.random.Generator) -> Image.Image:
    out = image.convert("RGB")
    if params["flip"]:
        out = flip_horizontal(out)
    out = shear(out, params["shear_x_deg"], params["shear_y_deg"])
    out = out.rotate(params["rotation_deg"], resample=Image.Resampling.BILINEAR)
    out = ImageEnhance.Brightness(out).enhance(1.0 + params["brightness_delta"])
    if params["blur_px"] > 0.0:
        out = out.filter(ImageFilter.GaussianBlur(params["blur_px"]))
    return add_pixel_noise(out, params["noise_fraction"], rng)


def list_images(image_dir) -> list[Path]:
    root = Path(image_dir)
    return sorted(
        p for p in root.rglob("*")
        if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
    )


def augment(image_dir, spec: AugmentSpec, seed: int, out_dir) -> dict:
    """Copy originals and write ``spec.copies`` augmented variants of each,
    returning (and saving) a manifest of sampled parameters per output."""
    out_root = Path(out_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    entries = []
    for path in list_images(image_dir):
        rel = path.relative_to(image_dir).as_posix()
        dest = out_root / rel
        dest.parent.mkdir(parents=True, exist_ok=True)
        shutil.copyfile(path, dest)
        entries.append({"id": rel, "source": rel, "params": None})
        with Image.open(path) as img:
            base = img.convert("RGB")
            for k in range(spec.copies):
                params = sample_params(spec, rng)
                stem = Path(rel)
                aug_rel = str(stem.with_name(f"{stem.stem}.aug{k}.png"))
                apply_params(base, params, rng).save(out_root / aug_rel)
                entries.append({"id": aug_rel, "source": rel, "params": params})
    manifest = {"seed": seed, "spec": spec.__dict__, "images": entries}
    with open(out_root / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return manifest

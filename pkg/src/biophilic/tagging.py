"""Turning probability vectors into tags, a dominant label, the biophilic
flag, and a curated gallery manifest.

Binarization is strict: a probability equal to the threshold goes negative.
The default curation threshold is 0.65; evaluation uses 0.5. The biophilic
flag is true iff any tag belongs to the taxonomy's flag set, so the same
logic serves both the 15-label and 19-label manifests.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .data import LabelTaxonomy
from .errors import ShapeError, ValidationError

CURATION_THRESHOLD = 0.65
EVAL_THRESHOLD = 0.5


def binarize(probs, threshold: float):
    """1 where p > threshold, else 0 (strict inequality)."""
    arr = np.asarray(probs, dtype=np.float64)
    return (arr > threshold).astype(np.int8)


def dominant_label(probs, taxonomy: LabelTaxonomy) -> str:
    """Label with the highest probability; ties go to the lowest index."""
    arr = np.asarray(probs, dtype=np.float64).ravel()
    if arr.shape[0] != len(taxonomy):
        raise ShapeError(
            f"probability vector has {arr.shape[0]} entries, taxonomy has {len(taxonomy)}"
        )
    return taxonomy.labels[int(np.argmax(arr))]


@dataclass
class TagResult:
    """Curation output for one artwork."""

    image_id: str
    tags: list[tuple[str, float]]  # (label, probability), descending probability
    dominant: str
    probabilities: np.ndarray
    biophilic: bool
    threshold: float

    @property
    def dominant_probability(self) -> float:
        return float(np.max(self.probabilities))

    def to_dict(self) -> dict:
        return {
            "id": self.image_id,
            "tags": [{"label": l, "probability": float(p)} for l, p in self.tags],
            "dominant": self.dominant,
            "probabilities": [float(p) for p in self.probabilities],
            "biophilic": bool(self.biophilic),
            "threshold": self.threshold,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TagResult":
        return cls(
            image_id=d["id"],
            tags=[(t["label"], float(t["probability"])) for t in d["tags"]],
            dominant=d["dominant"],
            probabilities=np.asarray(d["probabilities"], dtype=np.float64),
            biophilic=bool(d["biophilic"]),
            threshold=float(d["threshold"]),
        )


def make_tags(
    probs,
    taxonomy: LabelTaxonomy,
    threshold: float = CURATION_THRESHOLD,
    image_id: str = "",
) -> TagResult:
    """Tags above threshold, the dominant label, and the biophilic flag."""
    arr = np.asarray(probs, dtype=np.float64).ravel()
    if arr.shape[0] != len(taxonomy):
        raise ShapeError(
            f"probability vector has {arr.shape[0]} entries, taxonomy has {len(taxonomy)}"
        )
    if not (0.0 < threshold < 1.0):
        raise ValidationError("threshold must lie strictly between 0 and 1")
    mask = binarize(arr, threshold)
    tagged = [(taxonomy.labels[i], float(arr[i])) for i in range(len(taxonomy)) if mask[i]]
    tagged.sort(key=lambda t: -t[1])  # stable: ties keep taxonomy order
    flag = any(label in taxonomy.biophilic_set for label, _ in tagged)
    return TagResult(
        image_id=image_id,
        tags=tagged,
        dominant=dominant_label(arr, taxonomy),
        probabilities=arr,
        biophilic=flag,
        threshold=float(threshold),
    )


@dataclass
class GalleryManifest:
    """Tag results grouped by dominant label, plus generation metadata."""

    groups: list[dict]  # [{"dominant": label, "items": [TagResult dict, ...]}]
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"groups": self.groups, "metadata": self.metadata}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def build_gallery(results: list[TagResult], metadata: dict | None = None) -> GalleryManifest:
    """Group results by dominant label, each group sorted by descending
    dominant probability then id; groups ordered by label name."""
    if not results:
        raise ValidationError("cannot build a gallery from zero results")
    seen = set()
    for r in results:
        if r.image_id in seen:
            raise ValidationError(f"duplicate image id {r.image_id!r}")
        seen.add(r.image_id)
    by_label: dict[str, list[TagResult]] = {}
    for r in results:
        by_label.setdefault(r.dominant, []).append(r)
    groups = []
    for label in sorted(by_label):
        items = sorted(by_label[label], key=lambda r: (-r.dominant_probability, r.image_id))
        groups.append({"dominant": label, "items": [r.to_dict() for r in items]})
    return GalleryManifest(groups=groups, metadata=dict(metadata or {}))

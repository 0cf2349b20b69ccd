"""Label taxonomy, embedding/label file formats, and the dataset split.

File formats:
  * taxonomy manifest -- JSON {"labels": [...], "biophilic_set": [...],
    "seasonal_parent": {...}}
  * embeddings -- BEMB binary: magic "BEMB", u32 version=1, u32 dim, then
    records of (u32 id-length, UTF-8 id bytes, dim x float32), little-endian
  * labels -- CSV with header "id,<label1>,...,<labelL>" and 0/1 cells
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import FormatError, ValidationError
from .rng import seeded_stream

BEMB_MAGIC = b"BEMB"
BEMB_VERSION = 1
DEFAULT_DIM = 512


@dataclass(frozen=True)
class LabelTaxonomy:
    """Ordered label names plus the subset that raises the biophilic flag."""

    labels: tuple[str, ...]
    biophilic_set: frozenset[str]
    seasonal_parent: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.labels) < 2:
            raise ValidationError("taxonomy needs at least two labels")
        if len(set(self.labels)) != len(self.labels):
            raise ValidationError("duplicate label names in taxonomy")
        unknown = self.biophilic_set - set(self.labels)
        if unknown:
            raise ValidationError(f"biophilic_set members not in labels: {sorted(unknown)}")

    def __len__(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "biophilic_set": sorted(self.biophilic_set),
            "seasonal_parent": dict(self.seasonal_parent),
        }

    def content_hash(self) -> str:
        import hashlib

        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


@dataclass
class Embedding:
    """An image id with its encoder output vector."""

    id: str
    vector: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        self.vector = np.asarray(self.vector, dtype=np.float32).ravel()
        if not np.isfinite(self.vector).all():
            raise ValidationError(f"embedding {self.id!r} has non-finite entries")


@dataclass
class LabelRecord:
    """Binary presence vector aligned to a taxonomy's label order."""

    id: str
    labels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.labels)
        if not np.isin(arr, (0, 1)).all():
            raise ValidationError(f"label record {self.id!r} has entries outside {{0,1}}")
        self.labels = arr.astype(np.int8)


@dataclass(frozen=True)
class SplitSpec:
    """Disjoint train/val/test id lists with their provenance."""

    train_ids: tuple[str, ...]
    val_ids: tuple[str, ...]
    test_ids: tuple[str, ...]
    seed: int
    ratios: tuple[float, float, float]

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "ratios": list(self.ratios),
            "train_ids": list(self.train_ids),
            "val_ids": list(self.val_ids),
            "test_ids": list(self.test_ids),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SplitSpec":
        return cls(
            train_ids=tuple(d["train_ids"]),
            val_ids=tuple(d["val_ids"]),
            test_ids=tuple(d["test_ids"]),
            seed=int(d["seed"]),
            ratios=tuple(float(r) for r in d["ratios"]),
        )


def load_taxonomy(path) -> LabelTaxonomy:
    """Parse and validate a taxonomy manifest."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"taxonomy manifest is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "labels" not in doc:
        raise ValidationError("taxonomy manifest must be an object with a 'labels' list")
    labels = doc["labels"]
    if not isinstance(labels, list) or not all(isinstance(x, str) for x in labels):
        raise ValidationError("'labels' must be a list of strings")
    biophilic = doc.get("biophilic_set", [])
    parent = doc.get("seasonal_parent", {})
    if not isinstance(parent, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in parent.items()
    ):
        raise ValidationError("'seasonal_parent' must map strings to strings")
    return LabelTaxonomy(
        labels=tuple(labels),
        biophilic_set=frozenset(biophilic),
        seasonal_parent=dict(parent),
    )


def save_taxonomy(taxonomy: LabelTaxonomy, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(taxonomy.to_dict(), fh, indent=2)
        fh.write("\n")


def default_manifest_path(name: str = "biophilic15") -> Path:
    """Path of a manifest shipped with the package (biophilic15 or biophilic19)."""
    ref = resources.files("biophilic") / "manifests" / f"{name}.json"
    return Path(str(ref))


def default_taxonomy() -> LabelTaxonomy:
    """The 15-label taxonomy used for training and evaluation."""
    return load_taxonomy(default_manifest_path("biophilic15"))


def read_embeddings(path) -> list[Embedding]:
    """Read a BEMB file; the vector dimension comes from the header."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 12 or blob[:4] != BEMB_MAGIC:
        raise FormatError("not a BEMB file (bad magic or truncated header)")
    version, dim = struct.unpack_from("<II", blob, 4)
    if version != BEMB_VERSION:
        raise FormatError(f"unsupported BEMB version {version}")
    if dim == 0:
        raise FormatError("BEMB header declares zero dimension")
    out = []
    off = 12
    rec_bytes = 4 * dim
    while off < len(blob):
        if off + 4 > len(blob):
            raise FormatError("truncated record header")
        (id_len,) = struct.unpack_from("<I", blob, off)
        off += 4
        if off + id_len + rec_bytes > len(blob):
            raise FormatError("truncated record payload")
        try:
            rec_id = blob[off : off + id_len].decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"record id is not valid UTF-8: {exc}") from exc
        off += id_len
        vec = np.frombuffer(blob, dtype="<f4", count=dim, offset=off).copy()
        off += rec_bytes
        if not np.isfinite(vec).all():
            raise FormatError(f"record {rec_id!r} contains non-finite values")
        out.append(Embedding(id=rec_id, vector=vec))
    return out


def write_embeddings(path, embeddings: list[Embedding], dim: int | None = None) -> None:
    """Write a BEMB file. ``dim`` is required only for an empty record list."""
    if dim is None:
        if not embeddings:
            raise ValidationError("dim is required when writing zero records")
        dim = embeddings[0].vector.shape[0]
    parts = [BEMB_MAGIC, struct.pack("<II", BEMB_VERSION, dim)]
    for emb in embeddings:
        vec = np.asarray(emb.vector, dtype="<f4")
        if vec.shape[0] != dim:
            raise ValidationError(
                f"embedding {emb.id!r} has dimension {vec.shape[0]}, expected {dim}"
            )
        id_bytes = emb.id.encode("utf-8")
        parts.append(struct.pack("<I", len(id_bytes)))
        parts.append(id_bytes)
        parts.append(vec.tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def read_labels(path, taxonomy: LabelTaxonomy) -> list[LabelRecord]:
    """Read a label CSV whose columns follow the taxonomy order exactly."""
    expected = ["id", *taxonomy.labels]
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError("label CSV is empty") from None
        if header != expected:
            raise ValidationError(
                f"label CSV header mismatch: expected {expected}, got {header}"
            )
        records = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(expected):
                raise ValidationError(f"line {lineno}: expected {len(expected)} cells")
            values = row[1:]
            if any(v not in ("0", "1") for v in values):
                raise ValidationError(f"line {lineno}: label cells must be 0 or 1")
            records.append(LabelRecord(id=row[0], labels=np.array([int(v) for v in values])))
    return records


def write_labels(path, records: list[LabelRecord], taxonomy: LabelTaxonomy) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", *taxonomy.labels])
        for rec in records:
            if rec.labels.shape[0] != len(taxonomy):
                raise ValidationError(
                    f"record {rec.id!r} has {rec.labels.shape[0]} labels, "
                    f"taxonomy has {len(taxonomy)}"
                )
            writer.writerow([rec.id, *[str(int(v)) for v in rec.labels]])


def split_dataset(
    ids,
    ratios=(0.7, 0.2, 0.1),
    seed: int = 0,
    counts: tuple[int, int, int] | None = None,
) -> SplitSpec:
    """Shuffle ids deterministically and partition into train/val/test.

    By default train gets floor(r1*N) ids and val floor(r2*N), with the
    remainder going to test. Pass explicit ``counts`` to reproduce a split
    whose sizes do not follow the floor rule (they must sum to N).
    """
    ids = list(ids)
    if not ids:
        raise ValidationError("cannot split an empty id list")
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate ids in split input")
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ValidationError("ratios must be three positive reals")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValidationError(f"ratios must sum to 1, got {sum(ratios)}")
    n = len(ids)
    if counts is None:
        n_train = int(np.floor(ratios[0] * n))
        n_val = int(np.floor(ratios[1] * n))
    else:
        if len(counts) != 3 or any(c < 0 for c in counts):
            raise ValidationError("counts must be three non-negative integers")
        if sum(counts) != n:
            raise ValidationError(f"counts sum to {sum(counts)}, but there are {n} ids")
        n_train, n_val = counts[0], counts[1]
    stream = seeded_stream(seed)
    stream.shuffle(ids)
    return SplitSpec(
        train_ids=tuple(ids[:n_train]),
        val_ids=tuple(ids[n_train : n_train + n_val]),
        test_ids=tuple(ids[n_train + n_val :]),
        seed=seed,
        ratios=ratios,
    )


def save_split(spec: SplitSpec, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(spec.to_dict(), fh, indent=2)
        fh.write("\n")


def load_split(path) -> SplitSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return SplitSpec.from_dict(json.load(fh))


@dataclass
class Dataset:
    """Embeddings and label vectors aligned row-by-row."""

    ids: list[str]
    x: np.ndarray  # N x D float32
    y: np.ndarray  # N x L int8

    def __len__(self) -> int:
        return len(self.ids)


def build_dataset(
    embeddings: list[Embedding],
    records: list[LabelRecord],
    ids=None,
) -> Dataset:
    """Join embeddings with label records by id.

    ``ids`` restricts and orders the result (e.g. one side of a SplitSpec);
    by default every embedding id is used in file order. Every requested id
    must be present on both sides.
    """
    emb_by_id = {e.id: e for e in embeddings}
    rec_by_id = {r.id: r for r in records}
    if ids is None:
        ids = [e.id for e in embeddings]
    ids = list(ids)
    missing_e = [i for i in ids if i not in emb_by_id]
    if missing_e:
        raise ValidationError(f"ids missing from embeddings: {missing_e[:5]}")
    missing_r = [i for i in ids if i not in rec_by_id]
    if missing_r:
        raise ValidationError(f"ids missing from labels: {missing_r[:5]}")
    if not ids:
        raise ValidationError("dataset would be empty")
    x = np.stack([emb_by_id[i].vector for i in ids]).astype(np.float32)
    y = np.stack([rec_by_id[i].labels for i in ids]).astype(np.int8)
    return Dataset(ids=ids, x=x, y=y)

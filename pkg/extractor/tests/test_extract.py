"""Extraction contract: 512-d, deterministic, readable by the classifier
package's BEMB reader."""

import numpy as np
import pytest
from PIL import Image

from biophilic.data import read_embeddings  # the consumer-side reader
from biophilic.numerics import cosine_sim
from biophilic_extract.bemb import write_bemb
from biophilic_extract.encoders import StubEncoder, center_crop_224, make_encoder
from biophilic_extract.extract import extract


@pytest.fixture
def image_dir(tmp_path):
    rng = np.random.default_rng(0)
    root = tmp_path / "images"
    (root / "nested").mkdir(parents=True)
    Image.fromarray(
        rng.integers(0, 256, size=(60, 80, 3), dtype=np.uint8)
    ).save(root / "textured.png")
    Image.new("RGB", (64, 64), (30, 120, 30)).save(root / "nested" / "solid.png")
    return root


def test_vectors_are_512d_and_ids_are_relative_paths(image_dir, tmp_path):
    out = tmp_path / "e.bemb"
    count = extract(image_dir, out, StubEncoder(), batch=1)
    assert count == 2
    records = read_embeddings(out)
    assert [r.id for r in records] == ["nested/solid.png", "textured.png"]
    assert all(r.vector.shape == (512,) for r in records)
    assert all(not r.normalized for r in records)


def test_extraction_is_deterministic(image_dir, tmp_path):
    out1, out2 = tmp_path / "a.bemb", tmp_path / "b.bemb"
    extract(image_dir, out1, StubEncoder())
    extract(image_dir, out2, StubEncoder())
    assert out1.read_bytes() == out2.read_bytes()


def test_solid_vs_textured_embeddings_differ(image_dir, tmp_path):
    out = tmp_path / "e.bemb"
    extract(image_dir, out, StubEncoder())
    by_id = {r.id: r.vector for r in read_embeddings(out)}
    sim = cosine_sim(by_id["textured.png"], by_id["nested/solid.png"])
    assert sim < 0.99


def test_undecodable_files_are_skipped(image_dir, tmp_path, caplog):
    (image_dir / "broken.png").write_bytes(b"this is not a png")
    out = tmp_path / "e.bemb"
    with caplog.at_level("WARNING"):
        count = extract(image_dir, out, StubEncoder())
    assert count == 2
    assert any("broken.png" in rec.message for rec in caplog.records)


def test_zero_successes_is_an_error(tmp_path):
    empty = tmp_path / "none"
    empty.mkdir()
    with pytest.raises(RuntimeError):
        extract(empty, tmp_path / "e.bemb", StubEncoder())


def test_bemb_round_trips_through_the_classifier_package(tmp_path):
    rng = np.random.default_rng(1)
    ids = ["a.png", "dir/b.png", "café.png"]
    vectors = rng.standard_normal((3, 512)).astype(np.float32)
    path = tmp_path / "rt.bemb"
    write_bemb(path, ids, vectors)
    records = read_embeddings(path)
    assert [r.id for r in records] == ids
    assert np.array_equal(np.stack([r.vector for r in records]), vectors)


def test_center_crop_geometry():
    img = Image.new("RGB", (448, 224), (10, 10, 10))
    assert center_crop_224(img).size == (224, 224)
    tall = Image.new("RGB", (100, 300), (10, 10, 10))
    assert center_crop_224(tall).size == (224, 224)


def test_clip_encoder_if_weights_available(image_dir, tmp_path):
    try:
        encoder = make_encoder("clip")
    except Exception as exc:  # no torch/transformers or no downloaded weights
        pytest.skip(f"clip encoder unavailable: {exc}")
    out = tmp_path / "clip.bemb"
    count = extract(image_dir, out, encoder)
    records = read_embeddings(out)
    assert count == 2 and records[0].vector.shape == (512,)

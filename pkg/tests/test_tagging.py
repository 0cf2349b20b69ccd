"""Thresholding, dominant-label selection, the biophilic flag, and gallery
grouping, with the flag logic checked against the curated label list."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from biophilic.data import default_taxonomy, load_taxonomy, default_manifest_path
from biophilic.errors import ValidationError
from biophilic.tagging import (
    TagResult,
    binarize,
    build_gallery,
    dominant_label,
    make_tags,
)

probs_vectors = st.lists(
    st.floats(0.0, 1.0, allow_nan=False), min_size=2, max_size=20
)


class TestBinarize:
    def test_basic(self):
        assert binarize([0.9, 0.1], 0.5).tolist() == [1, 0]

    def test_equality_goes_negative(self):
        assert binarize([0.5], 0.5).tolist() == [0]
        assert binarize([0.65], 0.65).tolist() == [0]

    def test_matches_elementwise_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            v = rng.uniform(0, 1, size=12)
            t = rng.uniform(0.1, 0.9)
            oracle = [1 if x > t else 0 for x in v]
            assert binarize(v, t).tolist() == oracle

    @settings(max_examples=200)
    @given(probs_vectors, st.floats(0.1, 0.8))
    def test_raising_threshold_never_adds_tags(self, vec, t):
        lo = binarize(vec, t)
        hi = binarize(vec, min(t + 0.1, 0.9))
        assert (hi <= lo).all()


class TestDominant:
    def test_one_hot(self, taxonomy15):
        probs = np.zeros(15)
        probs[4] = 1.0
        assert dominant_label(probs, taxonomy15) == taxonomy15.labels[4]

    def test_uniform_vector_takes_first_label(self, taxonomy15):
        assert dominant_label(np.full(15, 0.5), taxonomy15) == taxonomy15.labels[0]

    def test_invariant_under_monotone_transform(self, taxonomy15):
        rng = np.random.default_rng(1)
        for _ in range(30):
            p = rng.uniform(0, 1, 15)
            assert dominant_label(p, taxonomy15) == dominant_label(p**3, taxonomy15)
            assert dominant_label(p, taxonomy15) == dominant_label(
                1 / (1 + np.exp(-5 * p)), taxonomy15
            )


class TestMakeTags:
    def test_water_raises_flag(self, taxonomy15):
        probs = np.full(15, 0.1)
        probs[taxonomy15.index("Water")] = 0.9
        result = make_tags(probs, taxonomy15, threshold=0.65)
        assert [t[0] for t in result.tags] == ["Water"]
        assert result.biophilic

    def test_humans_and_buildings_do_not(self, taxonomy15):
        probs = np.full(15, 0.1)
        probs[taxonomy15.index("Humans")] = 0.9
        probs[taxonomy15.index("Buildings")] = 0.8
        result = make_tags(probs, taxonomy15, threshold=0.65)
        assert {t[0] for t in result.tags} == {"Humans", "Buildings"}
        assert not result.biophilic

    def test_empty_tags_still_reports_dominant(self, taxonomy15):
        probs = np.full(15, 0.2)
        probs[3] = 0.3
        result = make_tags(probs, taxonomy15, threshold=0.65)
        assert result.tags == []
        assert not result.biophilic
        assert result.dominant == taxonomy15.labels[3]

    def test_tags_sorted_by_descending_probability(self, taxonomy15):
        probs = np.zeros(15)
        probs[2] = 0.7
        probs[5] = 0.9
        probs[8] = 0.8
        result = make_tags(probs, taxonomy15, threshold=0.5)
        assert [t[1] for t in result.tags] == [0.9, 0.8, 0.7]

    def test_flag_works_on_extended_taxonomy(self):
        tax = load_taxonomy(default_manifest_path("biophilic19"))
        probs = np.full(19, 0.1)
        probs[tax.index("Northern lights")] = 0.9
        assert make_tags(probs, tax, 0.65).biophilic
        probs = np.full(19, 0.1)
        probs[tax.index("Houses")] = 0.9
        assert not make_tags(probs, tax, 0.65).biophilic

    @settings(max_examples=200)
    @given(st.integers(0, 2**32))
    def test_flag_monotone_in_added_flag_labels(self, seed):
        tax = default_taxonomy()
        rng = np.random.default_rng(seed)
        probs = rng.uniform(0, 1, 15)
        base = make_tags(probs, tax, 0.5)
        boosted = probs.copy()
        boosted[tax.index("Marine")] = 0.99  # add a flag-set tag
        assert make_tags(boosted, tax, 0.5).biophilic
        if base.biophilic:
            # adding a flag label never clears the flag
            assert make_tags(boosted, tax, 0.5).biophilic

    def test_round_trip_dict(self, taxonomy15):
        probs = np.linspace(0.01, 0.99, 15)
        r = make_tags(probs, taxonomy15, 0.5, image_id="art-1")
        again = TagResult.from_dict(r.to_dict())
        assert again.image_id == r.image_id
        assert again.tags == r.tags
        assert again.biophilic == r.biophilic


class TestGallery:
    def _result(self, tax, image_id, dominant_idx, peak):
        probs = np.full(15, 0.05)
        probs[dominant_idx] = peak
        return make_tags(probs, tax, 0.5, image_id=image_id)

    def test_single_record_single_group(self, taxonomy15):
        manifest = build_gallery([self._result(taxonomy15, "a", 0, 0.9)])
        assert len(manifest.groups) == 1
        assert manifest.groups[0]["dominant"] == taxonomy15.labels[0]

    def test_shared_dominant_sorted_by_probability(self, taxonomy15):
        r1 = self._result(taxonomy15, "low", 4, 0.7)
        r2 = self._result(taxonomy15, "high", 4, 0.95)
        manifest = build_gallery([r1, r2])
        assert len(manifest.groups) == 1
        ids = [item["id"] for item in manifest.groups[0]["items"]]
        assert ids == ["high", "low"]

    def test_matches_group_by_oracle(self, taxonomy15):
        rng = np.random.default_rng(2)
        results = []
        for i in range(100):
            idx = int(rng.integers(0, 15))
            results.append(self._result(taxonomy15, f"img{i:03d}", idx,
                                        float(rng.uniform(0.5, 1.0))))
        manifest = build_gallery(results)
        oracle = {}
        for r in results:
            oracle.setdefault(r.dominant, []).append(r)
        assert {g["dominant"] for g in manifest.groups} == set(oracle)
        for g in manifest.groups:
            expect = sorted(oracle[g["dominant"]],
                            key=lambda r: (-r.dominant_probability, r.image_id))
            assert [i["id"] for i in g["items"]] == [r.image_id for r in expect]
        total = sum(len(g["items"]) for g in manifest.groups)
        assert total == 100  # every record in exactly one group

    def test_duplicate_id_rejected(self, taxonomy15):
        r = self._result(taxonomy15, "dup", 0, 0.9)
        with pytest.raises(ValidationError):
            build_gallery([r, r])

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            build_gallery([])

    def test_metadata_carried(self, taxonomy15):
        manifest = build_gallery([self._result(taxonomy15, "a", 0, 0.9)],
                                 metadata={"threshold": 0.65})
        assert manifest.to_dict()["metadata"]["threshold"] == 0.65

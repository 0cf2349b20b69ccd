"""Metric formulas against a brute-force per-cell oracle and stated identities."""

import numpy as np
import pytest

from biophilic.data import LabelTaxonomy
from biophilic.errors import ShapeError, ValidationError
from biophilic.metrics import (
    ClassCounts,
    classification_report,
    count_confusions,
    f1,
    f1_from_precision_recall,
    precision,
    recall,
)


def brute_force_report(pred, actual):
    """Independent loop-based implementation of all four averaging modes."""
    pred = [[int(v) for v in row] for row in pred]
    actual = [[int(v) for v in row] for row in actual]
    n = len(pred)
    n_cls = len(pred[0])

    def prf(tp, fp, fn):
        p = tp / (tp + fp) if tp + fp > 0 else 0.0
        r = tp / (tp + fn) if tp + fn > 0 else 0.0
        f = 2 * p * r / (p + r) if p + r > 0 else 0.0
        return p, r, f

    per_class = []
    for c in range(n_cls):
        tp = fp = fn = 0
        for i in range(n):
            if pred[i][c] == 1 and actual[i][c] == 1:
                tp += 1
            elif pred[i][c] == 1:
                fp += 1
            elif actual[i][c] == 1:
                fn += 1
        per_class.append((tp, fp, fn))

    cls_prf = [prf(*t) for t in per_class]
    supports = [tp + fn for tp, _, fn in per_class]

    micro = prf(
        sum(t[0] for t in per_class),
        sum(t[1] for t in per_class),
        sum(t[2] for t in per_class),
    )
    macro = tuple(sum(v[k] for v in cls_prf) / n_cls for k in range(3))
    total = sum(supports)
    if total > 0:
        weighted = tuple(
            sum(s * v[k] for s, v in zip(supports, cls_prf)) / total for k in range(3)
        )
    else:
        weighted = (0.0, 0.0, 0.0)

    row_scores = []
    for i in range(n):
        inter = sum(1 for c in range(n_cls) if pred[i][c] == 1 and actual[i][c] == 1)
        npred = sum(pred[i])
        nact = sum(actual[i])
        if npred == 0 and nact == 0:
            row_scores.append((1.0, 1.0, 1.0))
            continue
        p = inter / npred if npred else 0.0
        r = inter / nact if nact else 0.0
        f = 2 * p * r / (p + r) if p + r > 0 else 0.0
        row_scores.append((p, r, f))
    samples = tuple(sum(v[k] for v in row_scores) / n for k in range(3))
    return {"micro": micro, "macro": macro, "weighted": weighted, "samples": samples,
            "per_class": cls_prf, "support": supports}


def _tax(n):
    return LabelTaxonomy(labels=tuple(f"L{k}" for k in range(n)), biophilic_set=frozenset())


class TestCounts:
    def test_perfect_predictions(self):
        m = np.array([[1, 0], [0, 1], [1, 1]])
        c = count_confusions(m, m)
        assert c.fp.tolist() == [0, 0] and c.fn.tolist() == [0, 0]
        assert c.tp.tolist() == [2, 2]

    def test_inverted_predictions(self):
        a = np.array([[1, 0], [0, 1]])
        c = count_confusions(1 - a, a)
        assert c.tp.tolist() == [0, 0] and c.tn.tolist() == [0, 0]

    def test_against_brute_force(self):
        rng = np.random.default_rng(7)
        p = rng.integers(0, 2, size=(20, 4))
        a = rng.integers(0, 2, size=(20, 4))
        c = count_confusions(p, a)
        for k in range(4):
            tp = sum(1 for i in range(20) if p[i][k] == 1 and a[i][k] == 1)
            fp = sum(1 for i in range(20) if p[i][k] == 1 and a[i][k] == 0)
            fn = sum(1 for i in range(20) if p[i][k] == 0 and a[i][k] == 1)
            assert (int(c.tp[k]), int(c.fp[k]), int(c.fn[k])) == (tp, fp, fn)
        assert (c.tp + c.fp + c.fn + c.tn == 20).all()
        assert (c.support == c.tp + c.fn).all()

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            count_confusions(np.zeros((2, 2)), np.zeros((3, 2)))

    def test_non_binary_rejected(self):
        with pytest.raises(ValidationError):
            count_confusions(np.array([[2, 0]]), np.array([[1, 0]]))


class TestPerClassFormulas:
    def test_half_precision(self):
        c = ClassCounts(tp=np.array([1]), fp=np.array([1]), fn=np.array([0]),
                        tn=np.array([0]))
        assert precision(c)[0] == 0.5

    def test_f1_equals_x_when_p_equals_r(self):
        for x in (0.25, 0.5, 0.9):
            assert f1_from_precision_recall(x, x) == pytest.approx(x, abs=1e-15)

    def test_plants_and_trees_row(self):
        # 0.96 precision and 0.94 recall round to the published 0.95 F1.
        assert round(f1_from_precision_recall(0.96, 0.94), 2) == 0.95

    def test_zero_denominators(self):
        c = ClassCounts(tp=np.array([0]), fp=np.array([0]), fn=np.array([0]),
                        tn=np.array([5]))
        assert precision(c)[0] == 0.0
        assert recall(c)[0] == 0.0
        assert f1(c)[0] == 0.0


class TestReport:
    def test_perfect_predictions_all_ones(self):
        rng = np.random.default_rng(3)
        a = rng.integers(0, 2, size=(12, 5))
        a[0] = 1  # make sure every row/class has some support
        a[:, 0] = 1
        rep = classification_report(a, a, _tax(5))
        for agg in (rep.micro, rep.macro, rep.weighted, rep.samples):
            assert agg.f1 == pytest.approx(1.0)

    def test_single_class_degenerate_aggregation(self):
        # Duplicating one column: micro, macro, and weighted all collapse to
        # that class's own values.
        p = np.array([[1], [0], [1], [1]])
        a = np.array([[1], [1], [0], [1]])
        tax = LabelTaxonomy(labels=("A", "B"), biophilic_set=frozenset())
        rep = classification_report(np.hstack([p, p]), np.hstack([a, a]), tax)
        pc = rep.per_class[0]
        for agg in (rep.micro, rep.macro, rep.weighted):
            assert agg.precision == pytest.approx(pc.precision)
            assert agg.recall == pytest.approx(pc.recall)
            assert agg.f1 == pytest.approx(pc.f1)

    def test_matches_brute_force_random(self):
        rng = np.random.default_rng(11)
        p = rng.integers(0, 2, size=(50, 6))
        a = rng.integers(0, 2, size=(50, 6))
        rep = classification_report(p, a, _tax(6))
        oracle = brute_force_report(p, a)
        for name, agg in (("micro", rep.micro), ("macro", rep.macro),
                          ("weighted", rep.weighted), ("samples", rep.samples)):
            assert agg.precision == pytest.approx(oracle[name][0], abs=1e-12)
            assert agg.recall == pytest.approx(oracle[name][1], abs=1e-12)
            assert agg.f1 == pytest.approx(oracle[name][2], abs=1e-12)

    def test_micro_f1_is_harmonic_mean(self):
        rng = np.random.default_rng(5)
        p = rng.integers(0, 2, size=(30, 4))
        a = rng.integers(0, 2, size=(30, 4))
        rep = classification_report(p, a, _tax(4))
        assert rep.micro.f1 == pytest.approx(
            f1_from_precision_recall(rep.micro.precision, rep.micro.recall), abs=1e-12
        )

    def test_weighted_f1_between_min_and_max(self):
        rng = np.random.default_rng(13)
        p = rng.integers(0, 2, size=(40, 5))
        a = rng.integers(0, 2, size=(40, 5))
        rep = classification_report(p, a, _tax(5))
        f1s = [c.f1 for c in rep.per_class if c.support > 0]
        assert min(f1s) - 1e-12 <= rep.weighted.f1 <= max(f1s) + 1e-12

    def test_row_permutation_invariance_for_samples(self):
        rng = np.random.default_rng(17)
        p = rng.integers(0, 2, size=(25, 4))
        a = rng.integers(0, 2, size=(25, 4))
        perm = rng.permutation(25)
        r1 = classification_report(p, a, _tax(4))
        r2 = classification_report(p[perm], a[perm], _tax(4))
        for x, y in zip(
            (r1.samples.precision, r1.samples.recall, r1.samples.f1),
            (r2.samples.precision, r2.samples.recall, r2.samples.f1),
        ):
            assert x == pytest.approx(y, abs=1e-12)
        assert r1.micro == r2.micro  # integer counts: exactly equal

    def test_column_permutation_with_relabel(self):
        rng = np.random.default_rng(19)
        p = rng.integers(0, 2, size=(25, 4))
        a = rng.integers(0, 2, size=(25, 4))
        perm = [2, 0, 3, 1]
        tax = _tax(4)
        tax_perm = LabelTaxonomy(
            labels=tuple(tax.labels[j] for j in perm), biophilic_set=frozenset()
        )
        r1 = classification_report(p, a, tax)
        r2 = classification_report(p[:, perm], a[:, perm], tax_perm)
        by_label_1 = {c.label: (c.precision, c.recall, c.f1) for c in r1.per_class}
        by_label_2 = {c.label: (c.precision, c.recall, c.f1) for c in r2.per_class}
        assert by_label_1 == by_label_2
        for agg1, agg2 in ((r1.macro, r2.macro), (r1.weighted, r2.weighted)):
            assert agg1.precision == pytest.approx(agg2.precision, abs=1e-12)
            assert agg1.recall == pytest.approx(agg2.recall, abs=1e-12)
            assert agg1.f1 == pytest.approx(agg2.f1, abs=1e-12)

    def test_all_negative_rows_score_one_in_samples(self):
        z = np.zeros((4, 3), dtype=int)
        rep = classification_report(z, z, _tax(3))
        assert rep.samples.f1 == 1.0
        assert rep.weighted.f1 == 0.0  # no support anywhere

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            classification_report(np.zeros((0, 3)), np.zeros((0, 3)), _tax(3))

    def test_json_rendering_rounds_to_four_decimals(self):
        p = np.array([[1, 0], [1, 1], [0, 1]])
        a = np.array([[1, 1], [1, 0], [0, 1]])
        rep = classification_report(p, a, _tax(2))
        doc = rep.to_dict()
        assert doc["per_class"][0]["precision"] == round(rep.per_class[0].precision, 4)
        assert set(doc) == {"per_class", "micro", "macro", "weighted", "samples"}

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pcrefine import (
    PrototypeSet,
    SelectionConfig,
    cosine,
    masked_pool,
    merge_into_background,
    predicted_prototypes,
    ps_refine,
    select_pseudo_labels,
)
from pcrefine.errors import ConfigError, ContractError


def unit(d, axis):
    v = np.zeros(d)
    v[axis] = 1.0
    return v


class TestPredictedPrototypes:
    def test_singleton_mask(self, schema):
        feats = np.zeros((3, 4))
        feats[1] = [1.0, 2.0, 3.0, 4.0]
        raw = np.array([-1, 5, 0])
        protos = predicted_prototypes(feats, raw, schema)
        assert protos.classes() == [5]
        np.testing.assert_array_equal(protos[5], [1.0, 2.0, 3.0, 4.0])

    def test_no_novel_labels(self, schema):
        feats = np.ones((4, 3))
        raw = np.array([0, 1, 2, -1])
        assert len(predicted_prototypes(feats, raw, schema)) == 0

    def test_matches_pool_oracle(self, schema):
        rng = np.random.default_rng(0)
        feats = rng.normal(size=(200, 6))
        raw = rng.integers(-1, schema.n_classes, size=200)
        protos = predicted_prototypes(feats, raw, schema)
        for c in schema.novel_indices:
            if (raw == c).any():
                np.testing.assert_allclose(
                    protos[c], masked_pool(feats, raw == c), atol=1e-12
                )
            else:
                assert c not in protos


class TestSelect:
    def test_base_predictions_cleared(self, schema):
        raw = np.array([2, 0, 1])
        out = select_pseudo_labels(
            raw, PrototypeSet({}), PrototypeSet({}), SelectionConfig(), schema
        )
        np.testing.assert_array_equal(out, [-1, -1, -1])

    def test_orthogonal_prototypes_filtered(self, schema):
        raw = np.array([4, 4, -1])
        predicted = PrototypeSet({4: unit(4, 0)})
        support = PrototypeSet({4: unit(4, 1)})
        out = select_pseudo_labels(raw, predicted, support, SelectionConfig(0.6), schema)
        np.testing.assert_array_equal(out, [-1, -1, -1])

    def test_per_class_decision_against_point_oracle(self, schema):
        rng = np.random.default_rng(1)
        raw = rng.integers(-1, schema.n_classes, size=500)
        d = 6
        predicted_vecs, support_vecs = {}, {}
        for c in schema.novel_indices:
            if (raw == c).any():
                predicted_vecs[c] = rng.normal(size=d)
                support_vecs[c] = rng.normal(size=d)
        predicted = PrototypeSet(predicted_vecs)
        support = PrototypeSet(support_vecs)
        tau = 0.3
        out = select_pseudo_labels(raw, predicted, support, SelectionConfig(tau), schema)
        # Oracle: evaluate the filter point by point.
        for i in range(500):
            c = int(raw[i])
            if 0 <= c < schema.n_base:
                expected = -1
            elif c >= schema.n_base:
                keep = cosine(predicted[c], support[c]) >= tau
                expected = c if keep else -1
            else:
                expected = -1
            assert out[i] == expected

    def test_missing_support_class_errors(self, schema):
        raw = np.array([5])
        predicted = PrototypeSet({5: unit(3, 0)})
        with pytest.raises(ConfigError, match="5"):
            select_pseudo_labels(raw, predicted, PrototypeSet({}), SelectionConfig(), schema)

    def test_tau_range(self):
        with pytest.raises(ConfigError):
            SelectionConfig(1.0 + 1e-9)
        SelectionConfig(1.0)  # boundary allowed

    def test_monotone_in_tau(self, schema):
        rng = np.random.default_rng(2)
        raw = rng.integers(-1, schema.n_classes, size=300)
        d = 5
        vecs = {c: rng.normal(size=d) for c in schema.novel_indices}
        sup = {c: rng.normal(size=d) for c in schema.novel_indices}
        predicted = PrototypeSet({c: v for c, v in vecs.items() if (raw == c).any()})
        support = PrototypeSet(sup)
        previous = None
        for tau in (0.2, 0.4, 0.6, 0.8):
            out = select_pseudo_labels(raw, predicted, support, SelectionConfig(tau), schema)
            labeled = set(np.flatnonzero(out != -1))
            if previous is not None:
                assert labeled <= previous
            previous = labeled


class TestMerge:
    def test_base_untouched(self, schema):
        base = np.array([0, 1, 2, 0])
        filtered = np.array([5, 5, 5, 5])
        np.testing.assert_array_equal(
            merge_into_background(base, filtered, schema), base
        )

    def test_pure_pass_through(self, schema):
        base = np.full(4, -1)
        filtered = np.array([5, -1, 6, -1])
        np.testing.assert_array_equal(
            merge_into_background(base, filtered, schema), filtered
        )

    def test_matches_elementwise_oracle(self, schema):
        rng = np.random.default_rng(3)
        base = rng.choice([-1, 0, 1, 2], size=1000)
        filtered = rng.choice([-1, 3, 4, 7], size=1000)
        out = merge_into_background(base, filtered, schema)
        for i in range(1000):
            expected = base[i] if base[i] != -1 else filtered[i]
            assert out[i] == expected

    def test_base_index_in_filtered_rejected(self, schema):
        with pytest.raises(ContractError):
            merge_into_background(np.array([-1]), np.array([1]), schema)

    def test_novel_in_base_labels_rejected(self, schema):
        with pytest.raises(ContractError):
            merge_into_background(np.array([5]), np.array([-1]), schema)


class TestPsRefine:
    def test_raw_all_background(self, schema):
        feats = np.ones((4, 3))
        raw = np.full(4, -1)
        base = np.array([0, -1, 2, -1])
        support = PrototypeSet({c: unit(3, 0) for c in schema.novel_indices})
        out = ps_refine(feats, raw, base, support, SelectionConfig(), schema)
        np.testing.assert_array_equal(out, base)

    def test_kept_class_survives_into_background(self, schema):
        d = 4
        feats = np.stack([unit(d, 0), unit(d, 0), unit(d, 1)])
        raw = np.array([4, 4, -1])
        base = np.array([-1, 0, -1])
        support = PrototypeSet({c: unit(d, 0) for c in schema.novel_indices})
        out = ps_refine(feats, raw, base, support, SelectionConfig(0.6), schema)
        # Point 0: background in base, kept novel label. Point 1: base wins.
        np.testing.assert_array_equal(out, [4, 0, -1])

    def test_output_labels_satisfy_threshold(self, schema):
        rng = np.random.default_rng(4)
        n, d = 400, 8
        feats = rng.normal(size=(n, d))
        raw = rng.integers(-1, schema.n_classes, size=n)
        base = np.where(rng.random(n) < 0.5, rng.integers(0, schema.n_base, size=n), -1)
        support = PrototypeSet({c: rng.normal(size=d) for c in schema.novel_indices})
        tau = 0.1
        out = ps_refine(feats, raw, base, support, SelectionConfig(tau), schema)
        predicted = predicted_prototypes(feats, raw, schema)
        for i in np.flatnonzero(out != -1):
            c = int(out[i])
            if c >= schema.n_base:
                assert cosine(predicted[c], support[c]) >= tau
            else:
                assert base[i] == c

"""LIBSVM parsing and the constrained logistic-regression instances."""

import os

import numpy as np
import pytest

from stochsqp import (
    ConstructionError,
    ParseError,
    build_instance,
    load_libsvm_file,
    logistic_minibatch_gradient,
    parse_libsvm,
    serialize_libsvm,
)
from stochsqp.logreg import Dataset


class TestParse:
    def test_two_line_example(self):
        ds = parse_libsvm("+1 1:0.5 3:-2\n-1 2:1")
        assert (ds.n_features, ds.n_samples) == (3, 2)
        assert np.array_equal(ds.features[:, 0], [0.5, 0.0, -2.0])
        assert np.array_equal(ds.features[:, 1], [0.0, 1.0, 0.0])
        assert np.array_equal(ds.labels, [1.0, -1.0])

    def test_empty_stream_gives_empty_dataset(self):
        ds = parse_libsvm("")
        assert ds.n_samples == 0
        with pytest.raises(ConstructionError):
            build_instance(ds, m_lin=0, seed=0)

    def test_zero_one_labels_remapped(self):
        ds = parse_libsvm("0 1:1\n1 1:2")
        assert np.array_equal(ds.labels, [-1.0, 1.0])

    @pytest.mark.parametrize(
        "text,fragment",
        [
            ("abc 1:1", "line 1"),
            ("+1 1:1 0:2", "line 1"),
            ("+1 2:1 1:3", "line 1"),
            ("+1\n-1 1:x", "line 2"),
        ],
    )
    def test_malformed_lines_name_the_line(self, text, fragment):
        with pytest.raises(ParseError, match=fragment):
            parse_libsvm(text)

    def test_feature_override_must_cover_indices(self):
        with pytest.raises(ParseError):
            parse_libsvm("+1 5:1", n_features=3)
        ds = parse_libsvm("+1 2:1", n_features=5)
        assert ds.n_features == 5

    def test_round_trip_preserves_sparse_triples(self):
        rng = np.random.default_rng(0)
        features = np.round(rng.standard_normal((6, 9)), 6)
        features[rng.uniform(size=features.shape) < 0.5] = 0.0
        labels = rng.choice([-1.0, 1.0], size=9)
        ds = Dataset(features=features, labels=labels)
        again = parse_libsvm(serialize_libsvm(ds), n_features=6)
        assert np.array_equal(again.features, ds.features)
        assert np.array_equal(again.labels, ds.labels)

    def test_a9a_shape_if_available(self):
        path = os.environ.get("A9A_PATH", "tests/data/a9a")
        if not os.path.exists(path):
            pytest.skip("a9a not bundled; set A9A_PATH to check its shape")
        ds = load_libsvm_file(path)
        assert (ds.n_features, ds.n_samples) == (123, 32561)


class TestBuildInstance:
    def test_constraint_dimension(self, bundled_dataset):
        inst = build_instance(bundled_dataset, m_lin=10, seed=0)
        assert inst.m == 11
        assert inst.jacobian(inst.x1).shape == (11, 30)

    def test_same_seed_is_bitwise_identical(self, bundled_dataset):
        a = build_instance(bundled_dataset, m_lin=10, seed=123)
        b = build_instance(bundled_dataset, m_lin=10, seed=123)
        assert np.array_equal(a.A, b.A)
        assert np.array_equal(a.b, b.b)
        assert np.array_equal(a.x1, b.x1)

    def test_single_sample_hand_gradient(self):
        # One sample d = e_1 with positive label: the loss is
        # log(1 + exp(-x_1)) and its gradient at zero is -e_1 / 2.
        ds = Dataset(features=np.array([[1.0], [0.0]]), labels=np.array([1.0]))
        inst = build_instance(ds, m_lin=1, seed=0)
        assert np.allclose(inst.gradient(np.zeros(2)), [-0.5, 0.0], atol=1e-15)

    def test_dimension_guard(self, bundled_dataset):
        with pytest.raises(ConstructionError):
            build_instance(bundled_dataset, m_lin=30, seed=0)

    def test_jacobian_rows_on_the_sphere(self, bundled_instance):
        x = np.zeros(bundled_instance.n)
        x[0] = 1.0
        jac = bundled_instance.jacobian(x)
        assert np.array_equal(jac[:-1], bundled_instance.A)
        assert np.array_equal(jac[-1], 2.0 * x)
        svals = np.linalg.svd(jac, compute_uv=False)
        assert svals[-1] >= 1e-8 * svals[0]

    def test_objective_is_convex_on_segments(self, bundled_instance):
        rng = np.random.default_rng(4)
        for _ in range(25):
            a = rng.standard_normal(bundled_instance.n)
            b = rng.standard_normal(bundled_instance.n)
            lam = rng.uniform()
            mid = bundled_instance.objective(lam * a + (1 - lam) * b)
            chord = lam * bundled_instance.objective(a) + (1 - lam) * bundled_instance.objective(b)
            assert mid <= chord + 1e-10


class TestMinibatchGradient:
    def test_all_indices_equals_full_gradient(self, bundled_instance):
        x = bundled_instance.x1
        g = logistic_minibatch_gradient(
            bundled_instance, x, np.arange(bundled_instance.dataset.n_samples)
        )
        assert np.linalg.norm(g - bundled_instance.gradient(x)) <= 1e-12

    def test_saturated_margin_gives_zero_gradient(self):
        ds = Dataset(features=np.array([[1.0], [0.0]]), labels=np.array([1.0]))
        inst = build_instance(ds, m_lin=1, seed=0)
        g = logistic_minibatch_gradient(inst, np.array([1e4, 0.0]), [0])
        assert np.all(np.isfinite(g))
        assert np.array_equal(g, [0.0, 0.0])

    def test_two_sample_hand_formula(self):
        from scipy.special import expit

        features = np.array([[1.0, -2.0], [0.5, 1.0]])
        labels = np.array([1.0, -1.0])
        ds = Dataset(features=features, labels=labels)
        inst = build_instance(ds, m_lin=1, seed=0)
        x = np.array([0.3, -0.2])
        z = labels[0] * (features[:, 0] @ x)
        expected = -labels[0] * expit(-z) * features[:, 0]
        assert np.allclose(logistic_minibatch_gradient(inst, x, [0]), expected, atol=1e-15)

    def test_index_validation(self, bundled_instance):
        with pytest.raises(ValueError):
            logistic_minibatch_gradient(bundled_instance, bundled_instance.x1, [])
        with pytest.raises(ValueError):
            logistic_minibatch_gradient(bundled_instance, bundled_instance.x1, [10_000])


class TestBundledData:
    def test_shape_and_labels(self, bundled_dataset):
        assert (bundled_dataset.n_features, bundled_dataset.n_samples) == (30, 200)
        assert set(np.unique(bundled_dataset.labels)) == {-1.0, 1.0}

    def test_oracle_declares_per_sample_variance(self, bundled_instance):
        oracle = bundled_instance.minibatch_oracle()
        assert oracle.sigma2 == pytest.approx(
            bundled_instance.per_sample_variance(bundled_instance.x1)
        )

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simnet.baselines import (
    LinearModel,
    cosine_matrix,
    cosine_similarity,
    linear_score,
    neg_euclidean,
)


class TestCosine:
    def test_self_similarity_is_one(self):
        rng = np.random.default_rng(42)
        for _ in range(20):
            x = rng.standard_normal(8) * rng.uniform(0.1, 50)
            np.testing.assert_allclose(cosine_similarity(x, x), 1.0, atol=1e-12)

    def test_orthogonal(self):
        assert cosine_similarity(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0

    def test_hand_value(self):
        got = cosine_similarity(np.array([1.0, 1.0]), np.array([1.0, 0.0]))
        np.testing.assert_allclose(got, 1.0 / np.sqrt(2), atol=1e-12)

    def test_symmetry_and_bounds(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            a = rng.standard_normal(5)
            b = rng.standard_normal(5)
            s = cosine_similarity(a, b)
            assert -1.0 <= s <= 1.0
            assert s == cosine_similarity(b, a)

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError, match="zero vector"):
            cosine_similarity(np.zeros(3), np.ones(3))
        with pytest.raises(ValueError, match="zero vector"):
            cosine_similarity(np.ones(3), np.zeros(3))

    def test_scale_invariance(self):
        rng = np.random.default_rng(3)
        a, b = rng.standard_normal(6), rng.standard_normal(6)
        np.testing.assert_allclose(
            cosine_similarity(a, b), cosine_similarity(3.7 * a, 0.01 * b), atol=1e-12
        )

    def test_matrix_matches_scalar(self):
        rng = np.random.default_rng(7)
        q = rng.standard_normal(4)
        g = rng.standard_normal((9, 4))
        batch = cosine_matrix(q, g)
        single = [cosine_similarity(q, row) for row in g]
        np.testing.assert_allclose(batch, single, atol=1e-12)


class TestNegEuclidean:
    def test_identity_is_zero(self):
        x = np.array([1.0, -2.0, 3.0])
        assert neg_euclidean(x, x) == 0.0

    def test_three_four_five(self):
        assert neg_euclidean(np.array([0.0, 0.0]), np.array([3.0, 4.0])) == -5.0

    def test_always_nonpositive_and_symmetric(self):
        rng = np.random.default_rng(42)
        for _ in range(1000):
            a = rng.standard_normal(4)
            b = rng.standard_normal(4)
            d = neg_euclidean(a, b)
            assert d <= 0.0
            assert d == neg_euclidean(b, a)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            neg_euclidean(np.zeros(3), np.zeros(4))


class TestLinearScore:
    def test_zero_weights_give_bias(self):
        m = LinearModel(np.zeros(8), bias=2.5)
        rng = np.random.default_rng(1)
        for _ in range(10):
            assert linear_score(m, rng.standard_normal(4), rng.standard_normal(4)) == 2.5

    def test_hand_dot_product(self):
        # weights pick out x_i[0] and x_j[1] only
        w = np.array([1.0, 0.0, 0.0, 2.0])
        m = LinearModel(w, bias=-1.0)
        got = linear_score(m, np.array([3.0, 9.0]), np.array([5.0, 0.5]))
        assert got == 3.0 + 2 * 0.5 - 1.0

    def test_dim_mismatch(self):
        m = LinearModel(np.zeros(8), bias=0.0)
        with pytest.raises(ValueError, match="dims"):
            linear_score(m, np.zeros(3), np.zeros(4))

    def test_nonfinite_params_rejected(self):
        with pytest.raises(ValueError, match="finite"):
            LinearModel(np.array([np.inf, 0.0]), bias=0.0)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(min_value=0, max_value=2**32 - 1))
    def test_additivity_in_first_slot(self, seed):
        rng = np.random.default_rng(seed)
        k = int(rng.integers(1, 8))
        m = LinearModel(rng.standard_normal(2 * k), bias=float(rng.standard_normal()))
        a, b, c = (rng.standard_normal(k) for _ in range(3))
        lhs = linear_score(m, a + c, b) - linear_score(m, a, b)
        rhs = linear_score(m, c, b) - linear_score(m, np.zeros(k), b)
        np.testing.assert_allclose(lhs, rhs, atol=1e-9)

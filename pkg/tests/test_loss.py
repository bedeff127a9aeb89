import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from odectrl.errors import ContractError, DataError
from odectrl.loss import ClassifierHead, accuracy, batch_loss, hypothesis, hypothesis_prime, predict

finite = st.floats(-30, 30)
normal = finite.filter(lambda v: v == 0 or abs(v) > 1e-100)


class TestHypothesis:
    def test_values(self):
        assert hypothesis(0.0) == 0.5
        assert hypothesis(2.0) == pytest.approx(0.8807970779778824, abs=1e-15)

    @given(finite)
    def test_symmetry(self, z):
        assert hypothesis(z) == pytest.approx(1.0 - hypothesis(-z), abs=1e-15)

    def test_no_overflow(self):
        with np.errstate(all="raise"):
            np.testing.assert_array_equal(hypothesis(np.array([-1e4, 1e4])), [0.0, 1.0])

    def test_derivative(self):
        h = 1e-6
        assert hypothesis_prime(0.4) == pytest.approx((hypothesis(0.4 + h) - hypothesis(0.4 - h)) / (2 * h), abs=1e-9)


class TestBatchLoss:
    def test_zero_head(self):
        assert batch_loss(np.zeros((1, 2)), [0], ClassifierHead(np.zeros(2), 0.0)) == 0.125

    def test_exact_outputs(self):
        head = ClassifierHead(np.zeros(2), 800.0)
        assert batch_loss(np.zeros((3, 2)), [1, 1, 1], head) == 0.0

    def test_additive(self, rng):
        y = rng.standard_normal((1, 3))
        head = ClassifierHead(rng.standard_normal(3), 0.2)
        assert batch_loss(np.vstack([y, y]), [1, 1], head) == 2 * batch_loss(y, [1], head)

    def test_bad_label(self):
        with pytest.raises(DataError):
            batch_loss(np.zeros((1, 2)), [2], ClassifierHead(np.zeros(2), 0.0))

    @given(st.lists(finite, min_size=3, max_size=3), st.floats(-5, 5))
    def test_positive_on_finite_parameters(self, W, mu):
        y = np.array([[0.1, -0.2, 0.3], [1.0, 0.5, -0.5]])
        assert batch_loss(y, [0, 1], ClassifierHead(np.array(W), mu)) > 0.0


class TestPredict:
    def test_tie_goes_to_zero(self):
        assert predict(np.zeros(2), ClassifierHead(np.zeros(2), 0.0)) == 0

    def test_positive_score(self):
        assert predict(np.array([1.0, 2.0]), ClassifierHead(np.array([1.0, 1.0]), 0.0)) == 1

    # powers of two scale without rounding, so the sign of every score is preserved exactly
    @given(st.lists(normal, min_size=2, max_size=2), normal, st.integers(-10, 10))
    def test_positive_rescaling_invariance(self, W, mu, k):
        lam = 2.0 ** k
        Y = np.array([[0.3, -1.2], [2.0, 0.1], [-0.4, -0.4]])
        W = np.array(W)
        np.testing.assert_array_equal(predict(Y, ClassifierHead(W, mu)), predict(Y, ClassifierHead(lam * W, lam * mu)))


class TestAccuracy:
    Y = np.array([[1.0], [-1.0], [2.0], [-3.0]])
    head = ClassifierHead(np.array([1.0]), 0.0)

    def test_all_correct(self):
        assert accuracy(self.Y, [1, 0, 1, 0], self.head) == 1.0

    def test_all_wrong(self):
        assert accuracy(self.Y, [0, 1, 0, 1], self.head) == 0.0

    def test_half(self):
        assert accuracy(self.Y, [1, 0, 0, 1], self.head) == 0.5

    def test_empty(self):
        with pytest.raises(ContractError):
            accuracy(np.empty((0, 1)), [], self.head)

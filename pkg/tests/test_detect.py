import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shrinkcomb.airframe import make_constellation
from shrinkcomb.combine import direct_estimate
from shrinkcomb.detect import (
    detect,
    hard_decide,
    hard_indices,
    sample_mse,
    sample_mse_expanded,
    ser,
)
from shrinkcomb.validate import make_instance

QPSK = make_constellation(4)


def brute_force_sequence(soft, c):
    """Joint minimum-distance decision over every length-n symbol sequence."""
    best, best_d = None, np.inf
    for seq in itertools.product(range(c.order), repeat=len(soft)):
        d = np.sum(np.abs(soft - c.points[list(seq)]) ** 2)
        if d < best_d:
            best, best_d = seq, d
    return c.points[list(best)]


class TestHardDecide:
    def test_nearest_point(self):
        assert hard_decide(np.array([0.9 + 1.1j]), QPSK)[0] == pytest.approx((1 + 1j) / np.sqrt(2))

    def test_on_point(self):
        for c in (QPSK, make_constellation(16)):
            np.testing.assert_array_equal(hard_decide(c.points, c), c.points)

    def test_elementwise_equals_joint(self, rng):
        for _ in range(30):
            soft = rng.standard_normal(3) + 1j * rng.standard_normal(3)
            np.testing.assert_array_equal(hard_decide(soft, QPSK), brute_force_sequence(soft, QPSK))

    @pytest.mark.parametrize("order", [4, 16, 64])
    def test_matches_argmin_search(self, rng, order):
        c = make_constellation(order)
        soft = 1.3 * (rng.standard_normal(5000) + 1j * rng.standard_normal(5000))
        ref = np.argmin(np.abs(soft[:, None] - c.points[None]) ** 2, axis=1)
        np.testing.assert_array_equal(hard_indices(soft, c), ref)

    def test_qpsk_ties_go_to_lowest_index(self):
        ties = np.array([0, 0.5, -0.5, 0.5j, -0.5j, 1e3, 1e3j])
        ref = np.argmin(np.abs(ties[:, None] - QPSK.points[None]) ** 2, axis=1)
        np.testing.assert_array_equal(hard_indices(ties, QPSK), ref)

    @settings(max_examples=100, deadline=None)
    @given(re=st.floats(-5, 5), im=st.floats(-5, 5), order=st.sampled_from([4, 16, 64]))
    def test_idempotent(self, re, im, order):
        c = make_constellation(order)
        h = hard_decide(np.array([re + 1j * im]), c)
        np.testing.assert_array_equal(hard_decide(h, c), h)


class TestSampleMSE:
    def test_zero(self, instance):
        assert sample_mse(instance.Yd, np.zeros((8, 6)), np.zeros((200, 6))) == 0.0

    def test_soft_equals_hard(self):
        D = QPSK.points[np.arange(12).reshape(4, 3) % 4]
        assert sample_mse(np.eye(4), D, D) == 0.0

    def test_dual_formula(self):
        for s in range(10):
            inst = make_instance(s)
            for a in (0.02, 0.4, 1.0):
                W = direct_estimate(inst.prep, inst.Yp, inst.P, a).W
                D_bar = hard_decide(inst.Yd.Y.conj().T @ W, QPSK)
                e1 = sample_mse(inst.Yd, W, D_bar)
                e2 = sample_mse_expanded(inst.prep, inst.Yp, inst.P, inst.Yd, D_bar, a)
                assert abs(e1 - e2) <= 1e-9 * e1

    def test_hard_decisions_minimize(self, instance, rng):
        W = direct_estimate(instance.prep, instance.Yp, instance.P, 0.1).W
        D_bar = hard_decide(instance.Yd.Y.conj().T @ W, QPSK)
        e = sample_mse(instance.Yd, W, D_bar)
        assert e >= 0
        for _ in range(50):
            other = QPSK.points[rng.integers(0, 4, D_bar.shape)]
            assert e <= sample_mse(instance.Yd, W, other)


class TestSER:
    def test_perfect(self):
        D = QPSK.points[np.arange(40).reshape(20, 2) % 4]
        r = ser(D, D)
        assert r.pooled == 0.0 and r.errors == 0

    def test_one_flip(self):
        D = np.full((1000, 1), QPSK.points[0])
        H = D.copy()
        H[17, 0] = QPSK.points[3]
        r = ser(H, D)
        assert r.exact == Fraction(1, 1000)
        assert r.pooled == 0.001
        np.testing.assert_array_equal(r.errors_per_ue, [1])

    def test_random_guess(self, rng):
        truth = QPSK.points[rng.integers(0, 4, (100_000, 1))]
        guess = QPSK.points[rng.integers(0, 4, (100_000, 1))]
        assert abs(ser(guess, truth).pooled - 0.75) <= 0.03

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            ser(np.zeros((3, 2)), np.zeros((3, 1)))

    def test_per_ue(self):
        D = np.full((4, 2), QPSK.points[0])
        H = D.copy()
        H[:2, 1] = QPSK.points[1]
        r = ser(H, D)
        np.testing.assert_array_equal(r.per_ue, [0.0, 0.5])
        assert r.pooled == 0.25


def test_detect_bundle(instance):
    W = direct_estimate(instance.prep, instance.Yp, instance.P, 0.05).W
    res = detect(instance.Yd, W, QPSK, instance.D)
    assert np.all(np.isin(res.hard, QPSK.points))
    assert np.all(res.errors_per_ue <= 200)
    assert res.sample_mse == pytest.approx(sample_mse(instance.Yd, W, res.hard), rel=1e-12)

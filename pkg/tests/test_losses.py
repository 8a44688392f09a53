import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.special import log_expit

from dglgan import losses
from dglgan import numcore as nc
from dglgan.numcore import PROB_EPS

logits = arrays(np.float64, st.tuples(st.integers(1, 8), st.just(1)), elements=st.floats(-30, 30))
LN2 = math.log(2)


def v(t):
    return t.item()


def test_d_loss_examples():
    z = np.zeros((4, 1))
    assert v(losses.d_loss("non_saturating", z, z)) == pytest.approx(1.386294, abs=1e-6)
    assert v(losses.d_loss("hinge", np.ones((3, 1)), -np.ones((3, 1)))) == 0.0
    assert v(losses.d_loss("hinge", z, z)) == 2.0


def test_g_loss_examples():
    z = np.zeros((2, 1))
    assert v(losses.g_loss("non_saturating", z)) == pytest.approx(LN2, abs=1e-15)
    assert v(losses.g_loss("hinge", np.array([[2.0], [-2.0]]))) == 0.0
    assert v(losses.g_loss("saturating", z)) == pytest.approx(-LN2, abs=1e-15)
    with pytest.raises(ValueError):
        losses.g_loss("wgan", z)


@given(logits, logits)
def test_adversarial_losses_match_log_sigmoid_reference(hr, hf):
    # scipy's log_expit is an independent route to log sigma(h)
    ref_d = -np.mean(log_expit(hr)) - np.mean(log_expit(-hf))
    assert v(losses.d_loss("non_saturating", hr, hf)) == pytest.approx(ref_d, rel=1e-12, abs=1e-12)
    assert v(losses.g_loss("non_saturating", hf)) == pytest.approx(-np.mean(log_expit(hf)), rel=1e-12, abs=1e-12)
    assert v(losses.g_loss("saturating", hf)) == pytest.approx(np.mean(log_expit(-hf)), rel=1e-12, abs=1e-12)
    ref_h = np.mean(np.maximum(0, 1 - hr)) + np.mean(np.maximum(0, 1 + hf))
    assert v(losses.d_loss("hinge", hr, hf)) == pytest.approx(ref_h, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("kind", ["non_saturating", "hinge"])
def test_g_loss_monotone_decreasing(kind):
    rs = np.random.default_rng(0)
    h = rs.uniform(-5, 5, size=(6, 1))
    for i in range(6):
        up = h.copy()
        up[i] += 1e-4
        assert v(losses.g_loss(kind, up)) < v(losses.g_loss(kind, h))


def test_dgl_term():
    h = np.random.default_rng(1).normal(size=(5, 1))
    assert v(losses.dgl_term("non_saturating", h, 0.0)) == 0.0
    assert v(losses.dgl_term("non_saturating", np.zeros((3, 1)), 0.1)) == pytest.approx(0.1 * LN2, abs=1e-15)
    assert v(losses.dgl_term("hinge", h, 1.0)) == v(losses.g_loss("hinge", h))
    with pytest.raises(ValueError):
        losses.dgl_term("hinge", h, -0.1)


@given(logits, st.floats(0, 5), st.floats(0, 5))
def test_dgl_term_linear_in_lambda(h, a, b):
    lhs = v(losses.dgl_term("non_saturating", h, a + b))
    rhs = v(losses.dgl_term("non_saturating", h, a)) + v(losses.dgl_term("non_saturating", h, b))
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


def test_dgl_term_gradient_reaches_input():
    x = nc.Tensor(np.array([[0.3], [-0.2]]), requires_grad=True)
    (g,) = nc.grad(losses.dgl_term("non_saturating", x, 0.1), [x])
    assert np.all(g < 0)


def test_kd_inter_examples():
    f = [nc.Tensor(np.arange(6.0).reshape(2, 3))]
    assert v(losses.kd_inter(f, f, [losses.identity_adapter(3)])) == 0.0
    s, t = [np.array([[1.0, 2.0]])], [np.array([[1.0, 4.0]])]
    assert v(losses.kd_inter(s, t, [losses.identity_adapter(2)])) == 1.0
    assert v(losses.kd_inter(s, t, [losses.identity_adapter(2)], dist="l2")) == 2.0
    assert v(losses.kd_inter([], [], [])) == 0.0
    with pytest.raises(ValueError):
        losses.kd_inter(s, [np.ones((1, 3))], [losses.identity_adapter(2)])
    with pytest.raises(ValueError):
        losses.kd_inter(s, t, [])


@given(arrays(np.float64, (3, 2), elements=st.floats(-5, 5)), arrays(np.float64, (3, 2), elements=st.floats(-5, 5)))
def test_kd_inter_nonnegative_zero_iff_equal(a, b):
    val = v(losses.kd_inter([a], [b], [losses.identity_adapter(2)]))
    assert val >= 0
    assert (val == 0) == np.array_equal(a, b)


def _bce_scalar(s, t):
    s = min(max(s, PROB_EPS), 1 - PROB_EPS)
    t = min(max(t, PROB_EPS), 1 - PROB_EPS)
    return -(t * math.log(s) + (1 - t) * math.log(1 - s))


def test_kd_out_examples():
    half = np.full((4, 1), 0.5)
    assert v(losses.kd_out(half, half)) == pytest.approx(LN2, abs=1e-15)
    e = np.full((2, 1), PROB_EPS)
    assert v(losses.kd_out(e, e)) == pytest.approx(_bce_scalar(PROB_EPS, PROB_EPS), rel=1e-12)
    t = np.full((2, 1), 1 - PROB_EPS)
    assert v(losses.kd_out(half[:2], t)) == pytest.approx(_bce_scalar(0.5, 1 - PROB_EPS), rel=1e-12)


@given(st.floats(0, 1), st.floats(0, 1))
def test_kd_out_cross_entropy_at_least_entropy(s, t):
    ce = v(losses.kd_out(np.array([[s]]), np.array([[t]])))
    assert ce == pytest.approx(_bce_scalar(s, t), rel=1e-12)
    assert ce >= _bce_scalar(t, t) - 1e-12

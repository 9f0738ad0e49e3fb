"""Loss oracles: every closed-form value here was computed by hand (or with a
one-line independent evaluation) before the implementation existed, and is
frozen."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from featgan import losses
from featgan.losses import (
    EPS,
    LossWeights,
    adversarial_loss_D,
    adversarial_loss_D_grad,
    adversarial_loss_G,
    adversarial_loss_G_grad,
    bbox_decode,
    bbox_encode,
    combine,
    perceptual_loss,
    perceptual_loss_grad,
    smooth_l1,
    smooth_l1_grad,
)

# ---------------------------------------------------------------- hand values


def test_adversarial_D_tabulated():
    assert adversarial_loss_D(np.array([0.5]), np.array([0.5])) == pytest.approx(
        2 * math.log(2), abs=1e-12)
    # -ln 0.9 - ln 0.9 = 0.21072103131565256
    assert adversarial_loss_D(np.array([0.9]), np.array([0.1])) == pytest.approx(
        0.21072103131565256, abs=1e-12)
    # perfect-discriminator limit: clamped, so tiny but finite
    v = adversarial_loss_D(np.array([1.0 - EPS]), np.array([EPS]))
    assert 0 <= v < 1e-6


def test_adversarial_G_tabulated():
    assert adversarial_loss_G(np.array([0.5])) == pytest.approx(math.log(2), abs=1e-12)
    assert adversarial_loss_G(np.array([0.1])) == pytest.approx(math.log(10), abs=1e-12)
    assert 0 <= adversarial_loss_G(np.array([1.0 - EPS])) < 1e-6


def test_smooth_l1_tabulated():
    assert smooth_l1(0.0) == 0.0
    assert smooth_l1(0.5) == pytest.approx(0.125, abs=0)
    assert smooth_l1(-3.0) == pytest.approx(2.5, abs=0)


def test_smooth_l1_continuity_and_symmetry():
    # both pieces meet at 0.5 when |x| = 1
    assert smooth_l1(1.0) == pytest.approx(0.5, abs=1e-15)
    assert smooth_l1(1.0 - 1e-9) == pytest.approx(0.5, abs=1e-8)
    assert smooth_l1(1.0 + 1e-9) == pytest.approx(0.5, abs=1e-8)
    rng = np.random.default_rng(11)
    xs = rng.uniform(-4, 4, size=64)
    assert np.allclose(smooth_l1(xs), smooth_l1(-xs), atol=0)


def test_bbox_encode_tabulated():
    p = np.array([0.0, 0.0, 10.0, 10.0])  # center (5,5), size (10,10)
    assert np.allclose(bbox_encode(p, p), np.zeros(4), atol=0)
    g = np.array([5.0, 0.0, 15.0, 10.0])  # center (10,5), same size
    assert np.allclose(bbox_encode(p, g), [0.5, 0.0, 0.0, 0.0], atol=1e-12)


def test_bbox_degenerate_proposal_errors():
    with pytest.raises(ValueError):
        bbox_encode(np.array([3.0, 1.0, 3.0, 9.0]), np.array([0.0, 0.0, 5.0, 5.0]))


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_bbox_round_trip(seed):
    rng = np.random.default_rng(seed)
    x1, y1 = rng.uniform(0, 50, 2)
    p = np.array([x1, y1, x1 + rng.uniform(1, 40), y1 + rng.uniform(1, 40)])
    u1, v1 = rng.uniform(0, 50, 2)
    g = np.array([u1, v1, u1 + rng.uniform(1, 40), v1 + rng.uniform(1, 40)])
    back = bbox_decode(p, bbox_encode(p, g))
    assert np.allclose(back, g, atol=1e-9)


def test_perceptual_tabulated():
    # background: no localization term even with garbage offsets
    p = np.zeros(4)
    p[0] = 1.0
    assert perceptual_loss(p, 0) == pytest.approx(0.0, abs=1e-6)
    p = np.array([0.25, 0.15, 0.5, 0.10])
    r = np.array([0.3, -0.2, 0.1, 0.0])
    assert perceptual_loss(p, 2, r, r) == pytest.approx(math.log(2), abs=1e-12)
    p = np.array([EPS / 2, 1.0 - EPS, EPS / 4, EPS / 4])
    off = np.array([0.5, 0.5, 0.5, 0.5])
    assert perceptual_loss(p, 1, off, np.zeros(4)) == pytest.approx(0.5, abs=1e-6)


def test_combine_tabulated():
    assert combine(0.0, 0.0, LossWeights(w1=3.0, w2=0.25)) == 0.0
    assert combine(0.7, 0.5, LossWeights()) == pytest.approx(1.2, abs=1e-15)
    assert combine(0.7, 0.5, LossWeights(w1=2.0, w2=0.0)) == pytest.approx(1.4, abs=1e-15)


def test_weights_validation():
    with pytest.raises(ValueError):
        LossWeights(w1=-0.1).validate()


# ----------------------------------------------------- independent oracles
# Re-derived formulas, written without looking at losses.py internals. They
# intentionally use plain Python floats/math so any vectorization or clamping
# slip in the implementation shows up as a mismatch.


def _oracle_adv_D(dl, dg):
    tot = 0.0
    for a, b in zip(dl, dg):
        a = min(max(float(a), 1e-7), 1 - 1e-7)
        b = min(max(float(b), 1e-7), 1 - 1e-7)
        tot += -math.log(a) - math.log(1 - b)
    return tot / len(dl)


def _oracle_adv_G(dg):
    tot = 0.0
    for b in dg:
        b = min(max(float(b), 1e-7), 1 - 1e-7)
        tot += -math.log(b)
    return tot / len(dg)


def _oracle_smooth_l1(x):
    x = float(x)
    return 0.5 * x * x if abs(x) < 1 else abs(x) - 0.5


def _oracle_perceptual(p, g, r_g, r_star):
    v = -math.log(min(max(float(p[g]), 1e-7), 1 - 1e-7))
    if g >= 1:
        for j in range(4):
            v += _oracle_smooth_l1(float(r_g[j]) - float(r_star[j]))
    return v


def test_oracle_agreement_100_random():
    rng = np.random.default_rng(1234)
    for _ in range(100):
        n = int(rng.integers(1, 9))
        dl = rng.uniform(1e-6, 1 - 1e-6, n)
        dg = rng.uniform(1e-6, 1 - 1e-6, n)
        assert adversarial_loss_D(dl, dg) == pytest.approx(_oracle_adv_D(dl, dg), abs=1e-6)
        assert adversarial_loss_G(dg) == pytest.approx(_oracle_adv_G(dg), abs=1e-6)
        x = rng.uniform(-5, 5)
        assert smooth_l1(x) == pytest.approx(_oracle_smooth_l1(x), abs=1e-6)
        k = 3
        p = rng.dirichlet(np.ones(k + 1))
        g = int(rng.integers(0, k + 1))
        r_g = rng.uniform(-2, 2, 4)
        r_star = rng.uniform(-2, 2, 4)
        assert perceptual_loss(p, g, r_g, r_star) == pytest.approx(
            _oracle_perceptual(p, g, r_g, r_star), abs=1e-6)
        a, b = rng.uniform(0, 3, 2)
        w = LossWeights(w1=float(rng.uniform(0, 2)), w2=float(rng.uniform(0, 2)))
        assert combine(a, b, w) == pytest.approx(w.w1 * a + w.w2 * b, abs=1e-6)


def test_monotonicity_grid():
    grid = np.linspace(0.05, 0.95, 10)
    dg = np.array([0.5])
    vals = [adversarial_loss_D(np.array([d]), dg) for d in grid]
    assert all(a > b for a, b in zip(vals, vals[1:]))  # decreasing in d_large
    dl = np.array([0.5])
    vals = [adversarial_loss_D(dl, np.array([d])) for d in grid]
    assert all(a < b for a, b in zip(vals, vals[1:]))  # increasing in d_gen


def test_nonnegativity_random():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = int(rng.integers(1, 6))
        dl = rng.uniform(1e-4, 1 - 1e-4, n)
        dg = rng.uniform(1e-4, 1 - 1e-4, n)
        assert adversarial_loss_D(dl, dg) >= 0
        assert adversarial_loss_G(dg) >= 0
        assert smooth_l1(rng.uniform(-9, 9)) >= 0


# ------------------------------------------------------- gradient oracles


def _central_diff(f, x, i, h=1e-3):
    xp = x.copy()
    xp[i] += h
    xm = x.copy()
    xm[i] -= h
    return (f(xp) - f(xm)) / (2 * h)


def _rel_err(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1e-8)


def test_adv_D_grad_fd():
    rng = np.random.default_rng(21)
    dl = rng.uniform(0.1, 0.9, 6)
    dg = rng.uniform(0.1, 0.9, 6)
    g_dl, g_dg = adversarial_loss_D_grad(dl, dg)
    for i in range(6):
        fd = _central_diff(lambda v: adversarial_loss_D(v, dg), dl.copy(), i)
        assert _rel_err(g_dl[i], fd) < 1e-4
        fd = _central_diff(lambda v: adversarial_loss_D(dl, v), dg.copy(), i)
        assert _rel_err(g_dg[i], fd) < 1e-4


def test_adv_G_grad_fd():
    rng = np.random.default_rng(22)
    dg = rng.uniform(0.1, 0.9, 6)
    g = adversarial_loss_G_grad(dg)
    for i in range(6):
        fd = _central_diff(adversarial_loss_G, dg.copy(), i)
        assert _rel_err(g[i], fd) < 1e-4


def test_smooth_l1_grad_fd():
    # stay away from the |x|=1 kink where the FD stencil straddles pieces
    for x in (-2.5, -0.7, -0.2, 0.3, 0.8, 1.9):
        fd = (smooth_l1(x + 1e-3) - smooth_l1(x - 1e-3)) / 2e-3
        assert _rel_err(float(smooth_l1_grad(x)), fd) < 1e-4


def test_perceptual_grad_fd():
    rng = np.random.default_rng(23)
    p = rng.dirichlet(np.ones(4))
    r_g = rng.uniform(-1.5, -0.2, 4)  # offsets clear of the smooth-l1 kink
    r_star = rng.uniform(0.2, 1.5, 4)
    g = 2
    gp, gr = perceptual_loss_grad(p, g, r_g, r_star)
    fd = _central_diff(lambda v: perceptual_loss(v, g, r_g, r_star), p.copy(), g)
    assert _rel_err(gp[g], fd) < 1e-4
    for j in range(4):
        fd = _central_diff(lambda v: perceptual_loss(p, g, v, r_star), r_g.copy(), j)
        assert _rel_err(gr[j], fd) < 1e-4


def test_perception_components_background_rows():
    # bg rows contribute no localization numerator but still divide the mean
    probs = np.full((2, 4), 0.25)
    labels = np.array([0, 2])
    reg = np.zeros((2, 12))
    reg[1, 4:8] = 3.0  # class-2 slice is columns 4(g-1):4g
    targets = np.zeros((2, 4))
    l_cls, l_loc = losses.perception_loss_components(probs, labels, reg, targets)
    assert l_cls == pytest.approx(math.log(4), abs=1e-12)
    assert l_loc == pytest.approx(4 * 2.5 / 2, abs=1e-12)

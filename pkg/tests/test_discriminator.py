"""Two-branch discriminator: pinned outputs, shapes, independence, gradients."""

import numpy as np
import pytest
from fdutil import masked_fd_check

from featgan.discriminator import (
    DiscriminatorConfig,
    adversarial_backward,
    adversarial_forward,
    init_adversarial,
    init_perception,
    perception_backward,
    perception_forward,
)


def _cfg(**kw):
    base = dict(in_dim=24, num_classes=3, hidden=(16, 8))
    base.update(kw)
    return DiscriminatorConfig(**base)


def test_zero_weights_give_half_probability():
    # all-zero parameters push logit 0 through the sigmoid: exactly 0.5
    cfg = _cfg()
    params = init_adversarial(cfg, np.random.default_rng(0)).zeros_like()
    x = np.random.default_rng(1).standard_normal((6, cfg.in_dim)).astype(np.float32)
    probs, logits, _ = adversarial_forward(x, params, cfg)
    assert np.array_equal(logits, np.zeros(6, dtype=np.float32))
    assert np.array_equal(probs, np.full(6, 0.5))


def test_zero_weights_give_uniform_class_posterior():
    # zero logits -> uniform softmax over K+1 classes; offsets all zero
    cfg = _cfg(num_classes=3)
    params = init_perception(cfg, np.random.default_rng(2)).zeros_like()
    x = np.random.default_rng(3).standard_normal((5, cfg.in_dim)).astype(np.float32)
    probs, logits, reg, _ = perception_forward(x, params, cfg)
    assert np.array_equal(probs, np.full((5, 4), 0.25))
    assert not logits.any()
    assert not reg.any()
    assert reg.shape == (5, 12)


def test_shape_contract():
    rng = np.random.default_rng(4)
    for n, k in ((1, 1), (3, 2), (7, 5)):
        cfg = _cfg(num_classes=k)
        pa = init_adversarial(cfg, rng)
        pp = init_perception(cfg, rng)
        x = rng.standard_normal((n, cfg.in_dim)).astype(np.float32)
        probs, logits, _ = adversarial_forward(x, pa, cfg)
        assert probs.shape == logits.shape == (n,)
        cprobs, clogits, reg, _ = perception_forward(x, pp, cfg)
        assert cprobs.shape == clogits.shape == (n, k + 1)
        assert reg.shape == (n, 4 * k)


def test_single_feature_map_is_auto_batched():
    # a bare [C,h,w] pooled feature counts as a batch of one
    cfg = _cfg(in_dim=3 * 2 * 2)
    pa = init_adversarial(cfg, np.random.default_rng(5))
    x = np.random.default_rng(6).standard_normal((3, 2, 2)).astype(np.float32)
    probs, logits, _ = adversarial_forward(x, pa, cfg)
    assert probs.shape == (1,)


def test_probabilities_stay_in_open_unit_interval():
    rng = np.random.default_rng(7)
    cfg = _cfg()
    pa = init_adversarial(cfg, rng)
    for trial in range(50):
        x = (10.0 ** rng.uniform(-2, 2)) * rng.standard_normal(
            (4, cfg.in_dim)).astype(np.float32)
        probs, _, _ = adversarial_forward(x, pa, cfg)
        assert np.all(probs > 0.0) and np.all(probs < 1.0)


def test_class_posterior_rows_on_simplex():
    rng = np.random.default_rng(8)
    for trial in range(50):
        k = int(rng.integers(1, 6))
        cfg = _cfg(num_classes=k)
        pp = init_perception(cfg, rng)
        x = (10.0 ** rng.uniform(-2, 2)) * rng.standard_normal(
            (3, cfg.in_dim)).astype(np.float32)
        probs, _, _, _ = perception_forward(x, pp, cfg)
        assert np.all(probs >= 0.0)
        assert np.max(np.abs(probs.sum(axis=1) - 1.0)) <= 1e-6


def test_branches_are_independent():
    # both parameter sets can live in one mapping; each head must only ever
    # read its own entries, so scrambling the other branch changes nothing
    rng = np.random.default_rng(9)
    cfg = _cfg()
    merged = init_adversarial(cfg, rng)
    for name, arr in init_perception(cfg, rng).items():
        merged[name] = arr
    x = rng.standard_normal((4, cfg.in_dim)).astype(np.float32)
    a0, _, _ = adversarial_forward(x, merged, cfg)
    for name in merged.names():
        if name.startswith("per/"):
            merged[name] = rng.standard_normal(merged[name].shape).astype(
                merged[name].dtype)
    a1, _, _ = adversarial_forward(x, merged, cfg)
    assert np.array_equal(a0, a1)
    p0, _, r0, _ = perception_forward(x, merged, cfg)
    for name in merged.names():
        if name.startswith("adv/"):
            merged[name] = rng.standard_normal(merged[name].shape).astype(
                merged[name].dtype)
    p1, _, r1, _ = perception_forward(x, merged, cfg)
    assert np.array_equal(p0, p1)
    assert np.array_equal(r0, r1)


def test_flattened_dim_mismatch_rejected():
    cfg = _cfg(in_dim=24)
    rng = np.random.default_rng(10)
    pa = init_adversarial(cfg, rng)
    pp = init_perception(cfg, rng)
    bad = np.zeros((2, 25), dtype=np.float32)
    with pytest.raises(ValueError, match="flattened dim"):
        adversarial_forward(bad, pa, cfg)
    with pytest.raises(ValueError, match="flattened dim"):
        perception_forward(bad, pp, cfg)


def test_config_validation():
    with pytest.raises(ValueError):
        DiscriminatorConfig(in_dim=0).validate()
    with pytest.raises(ValueError):
        DiscriminatorConfig(in_dim=8, num_classes=0).validate()
    with pytest.raises(ValueError):
        DiscriminatorConfig(in_dim=8, hidden=(16, 8, 4)).validate()


def test_adversarial_gradients_match_finite_differences():
    cfg = _cfg(in_dim=10, hidden=(6, 4))
    rng = np.random.default_rng(11)
    params = init_adversarial(cfg, rng).astype(np.float64)
    x = rng.standard_normal((3, cfg.in_dim))
    w = rng.standard_normal(3)
    # the input rides along as a pseudo-parameter so the same FD harness
    # checks g_input, which the generator update depends on
    params["x"] = x

    def loss_of(p):
        _, logits, (c1, m1, c2, m2, c3) = adversarial_forward(
            p["x"], p, cfg, want_cache=True)
        return float((logits * w).sum()), [m1, m2]

    _, logits, cache = adversarial_forward(params["x"], params, cfg,
                                           want_cache=True)
    g_input, grads = adversarial_backward(w.copy(), cache)
    grads["x"] = g_input

    checked, skipped = masked_fd_check(loss_of, params, grads, grads.names(),
                                       np.random.default_rng(12))
    assert checked >= 25
    assert skipped <= checked


def test_perception_gradients_match_finite_differences():
    cfg = _cfg(in_dim=10, num_classes=2, hidden=(6, 4))
    rng = np.random.default_rng(13)
    params = init_perception(cfg, rng).astype(np.float64)
    x = rng.standard_normal((3, cfg.in_dim))
    wl = rng.standard_normal((3, cfg.num_classes + 1))
    wr = rng.standard_normal((3, 4 * cfg.num_classes))
    params["x"] = x

    def loss_of(p):
        _, logits, reg, (c1, m1, c2, m2, c3, c4) = perception_forward(
            p["x"], p, cfg, want_cache=True)
        return float((logits * wl).sum() + (reg * wr).sum()), [m1, m2]

    _, logits, reg, cache = perception_forward(params["x"], params, cfg,
                                               want_cache=True)
    g_input, grads = perception_backward(wl.copy(), wr.copy(), cache)
    grads["x"] = g_input

    checked, skipped = masked_fd_check(loss_of, params, grads, grads.names(),
                                       np.random.default_rng(14))
    assert checked >= 25
    assert skipped <= checked

import numpy as np
import pytest

from reflare import (
    GradientPyramid,
    Image,
    LINEAR,
    LossWeights,
    background_loss,
    encoded,
    flare_loss,
    l1,
    masked_l1,
    masked_psnr,
    psnr,
    reconstruction_loss,
    ssim,
    total_loss,
)


def img(value, h=16, w=16, domain=LINEAR):
    return Image(np.full((h, w, 3), float(value)), domain)


def rand_img(seed, h=32, w=32, domain=LINEAR):
    return Image(np.random.default_rng(seed).random((h, w, 3)), domain)


def test_l1_and_masked_l1():
    a, b = img(0.2), img(0.5)
    assert abs(l1(a, b) - 0.3) < 1e-12
    mask = np.zeros((16, 16), dtype=bool)
    assert masked_l1(a, b, mask) == 0.0  # empty mask contributes nothing
    mask[:4] = True
    assert abs(masked_l1(a, b, mask) - 0.3) < 1e-12
    with pytest.raises(ValueError):
        masked_l1(a, b, np.zeros((4, 4), dtype=bool))


def test_reconstruction_loss_zero_on_exact_decomposition():
    g = 2.0
    ff = np.random.default_rng(0).random((8, 8, 3)) * 0.5
    fl = np.random.default_rng(1).random((8, 8, 3)) * 0.5
    inp = np.power(ff + fl, 1 / g)
    loss = reconstruction_loss(Image(inp, encoded(g)),
                               Image(np.power(ff, 1 / g), encoded(g)),
                               Image(np.power(fl, 1 / g), encoded(g)), g)
    assert loss < 1e-12


def test_default_weights():
    w = LossWeights()
    assert (w.w1, w.w2, w.w3) == (0.5, 0.1, 20.0)
    with pytest.raises(ValueError):
        LossWeights(w3=-1.0)


def test_background_loss_weighted_sum():
    est, gt = rand_img(2), rand_img(3)
    mask = np.zeros((32, 32), dtype=bool)
    mask[10:20, 5:9] = True
    feats = GradientPyramid()
    fa, fb = feats(est), feats(gt)
    feat = np.mean([np.mean(np.abs(x - y)) for x, y in zip(fa, fb)])
    want = 0.5 * l1(est, gt) + 0.1 * feat + 20.0 * masked_l1(est, gt, mask)
    assert abs(background_loss(est, gt, mask) - want) < 1e-12
    # flare loss shares the exact same form
    assert flare_loss(est, gt, mask) == background_loss(est, gt, mask)


def test_total_loss_zero_for_perfect_prediction():
    est = rand_img(4)
    mask = np.ones((32, 32), dtype=bool)
    rec = 0.0
    assert total_loss(rec, flare_loss(est, est, mask),
                      background_loss(est, est, mask)) == 0.0


def test_gradient_pyramid_shapes():
    planes = GradientPyramid(levels=2)(rand_img(5, h=16, w=16))
    assert len(planes) == 6
    assert planes[0].shape == (16, 16)
    assert planes[1].shape == (16, 15)  # d/dx
    assert planes[2].shape == (15, 16)  # d/dy
    assert planes[3].shape == (8, 8)


def test_psnr_known_value_and_cap():
    a, b = img(0.5), img(0.6)
    assert abs(psnr(a, b) - 20.0) < 1e-9  # MSE 0.01 -> 20 dB
    assert psnr(a, a) == 99.0


def test_masked_psnr_localization():
    a = np.full((16, 16, 3), 0.5)
    b = a.copy()
    b[:4, :4] += 0.2  # damage confined to one corner
    mask = np.zeros((16, 16), dtype=bool)
    mask[:4, :4] = True
    full = psnr(Image(a), Image(b))
    masked = masked_psnr(Image(a), Image(b), mask)
    assert abs(masked - psnr(img(0.5, 4, 4), img(0.7, 4, 4))) < 1e-9
    assert full - masked > 5.0
    assert masked_psnr(Image(a), Image(b), np.zeros((16, 16), bool)) == 99.0


def test_ssim_properties():
    a = rand_img(6)
    assert abs(ssim(a, a) - 1.0) < 1e-12
    noisy = Image(np.clip(a.data + np.random.default_rng(7).normal(
        0, 0.2, a.data.shape), 0, None))
    s = ssim(a, noisy)
    assert 0.0 < s < 0.95
    with pytest.raises(ValueError):
        ssim(img(0.5, 8, 8), img(0.5, 8, 8))  # below the window size


def test_shape_mismatch_raises():
    with pytest.raises(ValueError):
        psnr(img(0.1, 8, 8), img(0.1, 8, 9))

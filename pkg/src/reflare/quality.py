"""Losses and image quality metrics.

The loss family: a reconstruction term enforcing that the predicted flare
and background add back to the input in the linear domain, plus background
and flare terms, each a weighted sum of plain L1, a feature-space L1, and
a flare-mask-restricted L1 (default weights 0.5 / 0.1 / 20.0). The
feature term's extractor is pluggable; the default is a gradient pyramid
so the full loss is computable without pretrained weights.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import ndimage

from . import ops
from .image import Image

PSNR_CAP_DB = 99.0

# Rec.601 luma weights
_LUMA = np.array([0.299, 0.587, 0.114])

FeatureExtractor = Callable[[Image], list[np.ndarray]]


@dataclass(frozen=True)
class LossWeights:
    w1: float = 0.5   # plain L1
    w2: float = 0.1   # feature-space L1
    w3: float = 20.0  # masked L1

    def __post_init__(self):
        if min(self.w1, self.w2, self.w3) < 0:
            raise ValueError("loss weights must be nonnegative")


class GradientPyramid:
    """Default feature extractor: {luma, d/dx, d/dy} planes at ``levels``
    dyadic scales. Deterministic, training-free."""

    def __init__(self, levels: int = 3):
        if levels < 1:
            raise ValueError("levels must be >= 1")
        self.levels = levels

    def __call__(self, img: Image) -> list[np.ndarray]:
        luma = img.data @ _LUMA
        planes = []
        for _ in range(self.levels):
            planes.append(luma)
            planes.append(np.diff(luma, axis=1))
            planes.append(np.diff(luma, axis=0))
            if min(luma.shape) >= 4:
                h, w = luma.shape[0] // 2 * 2, luma.shape[1] // 2 * 2
                luma = luma[:h, :w].reshape(h // 2, 2, w // 2, 2).mean(axis=(1, 3))
        return planes


def _check_shapes(a: Image, b: Image) -> None:
    if not a.same_shape(b):
        raise ValueError("image shape mismatch")


def l1(a: Image, b: Image) -> float:
    """Mean absolute difference over all samples."""
    _check_shapes(a, b)
    return float(np.mean(np.abs(a.data - b.data)))


def masked_l1(a: Image, b: Image, mask: np.ndarray) -> float:
    """Mean absolute difference over mask-1 pixels only; 0 on an empty
    mask (no flare, no flare penalty)."""
    _check_shapes(a, b)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != a.data.shape[:2]:
        raise ValueError("mask shape mismatch")
    if not mask.any():
        return 0.0
    return float(np.mean(np.abs(a.data - b.data)[mask]))


def reconstruction_loss(input_img: Image, flare_free_est: Image,
                        flare_est: Image, gamma: float) -> float:
    """L1 between the decoded input and the decoded estimate sum; the
    addition is defined in the linear domain and clipped to [0, 1] the
    same way the sensor clips the composite before encoding."""
    _check_shapes(input_img, flare_free_est)
    _check_shapes(input_img, flare_est)
    dec = lambda im: ops.to_linear(im, gamma).data
    total = np.clip(dec(flare_free_est) + dec(flare_est), 0.0, 1.0)
    return float(np.mean(np.abs(dec(input_img) - total)))


def background_loss(est: Image, gt: Image, mask: np.ndarray,
                    features: FeatureExtractor | None = None,
                    weights: LossWeights = LossWeights()) -> float:
    """w1 * L1 + w2 * mean feature-plane L1 + w3 * masked L1."""
    if features is None:
        features = GradientPyramid()
    feat_term = 0.0
    if weights.w2 != 0.0:
        fa, fb = features(est), features(gt)
        feat_term = float(np.mean([np.mean(np.abs(x - y))
                                   for x, y in zip(fa, fb)]))
    return (weights.w1 * l1(est, gt)
            + weights.w2 * feat_term
            + weights.w3 * masked_l1(est, gt, mask))


def flare_loss(est_flare: Image, gt_flare: Image, mask: np.ndarray,
               features: FeatureExtractor | None = None,
               weights: LossWeights = LossWeights()) -> float:
    """Identical form to the background loss, applied to the flare planes."""
    return background_loss(est_flare, gt_flare, mask, features, weights)


def total_loss(rec: float, flare: float, bg: float) -> float:
    return rec + flare + bg


def _psnr_from_mse(mse: float, peak: float) -> float:
    if mse == 0.0:
        return PSNR_CAP_DB
    return float(min(10.0 * np.log10(peak * peak / mse), PSNR_CAP_DB))


def psnr(a: Image, b: Image, peak: float = 1.0) -> float:
    """10 log10(peak^2 / MSE), capped at 99 dB for identical images."""
    _check_shapes(a, b)
    return _psnr_from_mse(float(np.mean((a.data - b.data) ** 2)), peak)


def masked_psnr(a: Image, b: Image, mask: np.ndarray, peak: float = 1.0) -> float:
    """PSNR with the MSE restricted to mask-1 pixels."""
    _check_shapes(a, b)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != a.data.shape[:2]:
        raise ValueError("mask shape mismatch")
    if not mask.any():
        return PSNR_CAP_DB
    return _psnr_from_mse(float(np.mean(((a.data - b.data) ** 2)[mask])), peak)


def ssim(a: Image, b: Image) -> float:
    """Mean SSIM on luma: 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
    K2 = 0.03, averaged over valid window positions."""
    _check_shapes(a, b)
    if a.height < 11 or a.width < 11:
        raise ValueError("images smaller than the 11x11 SSIM window")
    x = a.data @ _LUMA
    y = b.data @ _LUMA
    r = 5
    t = np.arange(-r, r + 1, dtype=np.float64)
    kern = np.exp(-0.5 * (t / 1.5) ** 2)
    kern /= kern.sum()

    def win_mean(z):
        out = ndimage.convolve1d(z, kern, axis=0, mode="constant")
        out = ndimage.convolve1d(out, kern, axis=1, mode="constant")
        return out[r:-r, r:-r]  # valid positions only

    mx, my = win_mean(x), win_mean(y)
    mxx, myy, mxy = win_mean(x * x), win_mean(y * y), win_mean(x * y)
    vx = mxx - mx * mx
    vy = myy - my * my
    cxy = mxy - mx * my
    c1, c2 = 0.01 ** 2, 0.03 ** 2
    num = (2 * mx * my + c1) * (2 * cxy + c2)
    den = (mx * mx + my * my + c1) * (vx + vy + c2)
    return float(np.mean(num / den))

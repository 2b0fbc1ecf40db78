"""Deterministic pixel operations on :class:`~reflare.image.Image`.

Every function is pure: output depends only on inputs (plus an explicit
generator for the noise op). Interpolation is bilinear throughout.
Geometric shifts fill with zero (content leaves the frame), blur
replicates edges (must not darken borders).
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .image import (
    LINEAR,
    Domain,
    DomainMismatchError,
    Image,
    OpticalCenter,
    encoded,
)


def gamma_apply(img: Image, gamma: float, result: Domain) -> Image:
    """Raise every sample to ``gamma`` and tag the result ``result``.

    The exponent is the raw power applied; the caller states the intent
    of the transfer (decoding toward linear vs. re-encoding) through the
    result tag. Prefer :func:`to_linear` / :func:`to_encoded`.
    """
    if not np.isfinite(gamma) or gamma <= 0:
        raise ValueError(f"gamma must be a finite positive real, got {gamma}")
    return Image(np.power(img.data, gamma), result)


def to_linear(img: Image, gamma: float | None = None) -> Image:
    """Decode an encoded image with exponent ``gamma`` (I_lin = I^gamma)."""
    if img.domain.is_linear:
        raise DomainMismatchError("image is already linear")
    g = img.domain.gamma if gamma is None else gamma
    if g is None:
        raise ValueError("encoded image has unknown gamma; pass one explicitly")
    return gamma_apply(img, g, LINEAR)


def to_encoded(img: Image, gamma: float) -> Image:
    """Encode a linear image with exponent ``1/gamma``."""
    if not img.domain.is_linear:
        raise DomainMismatchError("image is already encoded")
    return gamma_apply(img, 1.0 / gamma, encoded(gamma))


def _bilinear_sample(arr: np.ndarray, ys: np.ndarray, xs: np.ndarray,
                     border: str) -> np.ndarray:
    """Sample ``arr`` (H, W, C) at float coords; border 'zero' or 'clamp'."""
    h, w = arr.shape[:2]
    if border == "clamp":
        xs = np.clip(xs, 0.0, w - 1.0)
        ys = np.clip(ys, 0.0, h - 1.0)
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    fx = (xs - x0)[..., None]
    fy = (ys - y0)[..., None]

    def gather(yy, xx):
        if border == "zero":
            valid = (yy >= 0) & (yy < h) & (xx >= 0) & (xx < w)
            v = arr[np.clip(yy, 0, h - 1), np.clip(xx, 0, w - 1)]
            return v * valid[..., None]
        return arr[np.clip(yy, 0, h - 1), np.clip(xx, 0, w - 1)]

    top = gather(y0, x0) * (1 - fx) + gather(y0, x0 + 1) * fx
    bot = gather(y0 + 1, x0) * (1 - fx) + gather(y0 + 1, x0 + 1) * fx
    return top * (1 - fy) + bot * fy


def rotate180_about(img: Image, center: OpticalCenter) -> Image:
    """Point-reflect the image about ``center``.

    Output pixel p samples the input at 2*center - p (bilinear, zero
    outside). When the center is the exact raster center the mapping is
    an exact index flip with no interpolation blur.
    """
    center.validate_for(img)
    ys, xs = np.meshgrid(np.arange(img.height, dtype=np.float64),
                         np.arange(img.width, dtype=np.float64), indexing="ij")
    return img.with_data(_bilinear_sample(
        img.data, 2.0 * center.cy - ys, 2.0 * center.cx - xs, border="zero"))


def translate(img: Image, dx: float, dy: float) -> Image:
    """Shift by (dx, dy) pixels, bilinear, zero fill."""
    if dx == 0.0 and dy == 0.0:
        return img
    ys, xs = np.meshgrid(np.arange(img.height, dtype=np.float64),
                         np.arange(img.width, dtype=np.float64), indexing="ij")
    return img.with_data(_bilinear_sample(img.data, ys - dy, xs - dx, border="zero"))


def resize_bilinear(img: Image, new_w: int, new_h: int) -> Image:
    """Resample to new_w x new_h with half-pixel-aligned bilinear mapping."""
    if new_w < 1 or new_h < 1:
        raise ValueError("target size must be positive")
    sx = img.width / new_w
    sy = img.height / new_h
    xs = (np.arange(new_w, dtype=np.float64) + 0.5) * sx - 0.5
    ys = (np.arange(new_h, dtype=np.float64) + 0.5) * sy - 0.5
    ys, xs = np.meshgrid(ys, xs, indexing="ij")
    return img.with_data(_bilinear_sample(img.data, ys, xs, border="clamp"))


def crop(img: Image, x: int, y: int, w: int, h: int) -> Image:
    if x < 0 or y < 0 or w < 1 or h < 1 or x + w > img.width or y + h > img.height:
        raise ValueError(
            f"crop window ({x},{y},{w},{h}) outside {img.width}x{img.height} image")
    return img.with_data(img.data[y:y + h, x:x + w])


def add(a: Image, b: Image) -> Image:
    """Element-wise sum; both operands must be linear (radiance adds)."""
    if not (a.domain.is_linear and b.domain.is_linear):
        raise DomainMismatchError(
            f"add requires linear operands, got {a.domain.kind}/{b.domain.kind}")
    if not a.same_shape(b):
        raise ValueError("add: shape mismatch")
    return a.with_data(a.data + b.data)


def mul_gains(img: Image, gains) -> Image:
    g = np.asarray(gains, dtype=np.float64)
    if g.shape != (3,) or g.min() < 0 or not np.all(np.isfinite(g)):
        raise ValueError("gains must be 3 finite nonnegative reals")
    return img.with_data(img.data * g)


def clamp01(img: Image) -> Image:
    return img.with_data(np.clip(img.data, 0.0, 1.0))


def gaussian_blur(img: Image, sigma: float) -> Image:
    """Separable Gaussian, kernel truncated at +-ceil(3*sigma), renormalized,
    replicate-edge borders. sigma = 0 is the identity."""
    if not np.isfinite(sigma) or sigma < 0:
        raise ValueError(f"sigma must be finite and >= 0, got {sigma}")
    if sigma == 0.0:
        return img
    radius = int(np.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-0.5 * (x / sigma) ** 2)
    kernel /= kernel.sum()
    out = ndimage.convolve1d(img.data, kernel, axis=0, mode="nearest")
    out = ndimage.convolve1d(out, kernel, axis=1, mode="nearest")
    return img.with_data(out)


def add_gaussian_noise(img: Image, sigma: float, rng: np.random.Generator) -> Image:
    """Add i.i.d. per-sample Gaussian noise, clamped to >= 0."""
    if not np.isfinite(sigma) or sigma < 0:
        raise ValueError(f"sigma must be finite and >= 0, got {sigma}")
    if sigma == 0.0:
        return img
    noisy = img.data + rng.normal(0.0, sigma, size=img.data.shape)
    return img.with_data(np.maximum(noisy, 0.0))

"""Semi-synthetic flare training data: turn a bracketed exposure pair into
a (corrupted, flare-free, flare, mask) triplet with randomized augmentation.

The augmentation chain, in order: resize both shots, jitter the low shot
by a small translation, take an identical random crop, linearize with a
sampled gamma, build the flare from the low shot (color gains, blur, 180
degree rotation about the crop center, opacity), build the background from
the normal shot (noise, color offset), add the branches, re-encode. All
draws come from one counter-based stream per item, so a (seed, index)
pair reproduces the triplet byte for byte on any platform or thread count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from . import ops
from .dataset import BracketPair
from .image import Image, encoded, raster_center
from .rng import spawn_rng


@dataclass(frozen=True)
class SynthesisConfig:
    """Sampling ranges for every augmentation knob.

    ``resize_target`` is (height, width); sources are transposed first if
    their orientation disagrees. Scalar ranges are inclusive [low, high]
    uniform supports; collapse a range to a point to pin a value.
    """

    resize_target: tuple[int, int] = (800, 1200)
    crop: int = 512
    translate_max: float = 15.0
    gamma_range: tuple[float, float] = (1.8, 2.2)
    color_gain_range: tuple[float, float] = (0.5, 1.2)
    blur_sigma_range: tuple[float, float] = (0.0, 3.0)
    opacity_range: tuple[float, float] = (0.3, 1.0)
    noise_sigma_range: tuple[float, float] = (0.0, 0.02)
    color_offset_max: float = 0.02
    mask_threshold: float = 0.2

    def __post_init__(self):
        for name in ("gamma_range", "color_gain_range", "blur_sigma_range",
                     "opacity_range", "noise_sigma_range"):
            lo, hi = getattr(self, name)
            if not (np.isfinite(lo) and np.isfinite(hi) and lo <= hi):
                raise ValueError(f"{name} must be an ordered finite range")
        if self.crop > min(self.resize_target):
            raise ValueError("crop must fit inside the resize target")
        if self.translate_max < 0:
            raise ValueError("translate_max must be >= 0")
        if not 0.0 < self.mask_threshold < 1.0:
            raise ValueError("mask_threshold must be in (0, 1)")
        if self.color_offset_max < 0:
            raise ValueError("color_offset_max must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SynthesisConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown synthesis config keys: {sorted(unknown)}")
        d = dict(d)
        for key in ("resize_target", "gamma_range", "color_gain_range",
                    "blur_sigma_range", "opacity_range", "noise_sigma_range"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


@dataclass(frozen=True)
class SampledParams:
    """Every random draw behind one triplet, for provenance sidecars."""

    seed: int
    index: int
    gamma: float
    translate: tuple[float, float]  # (dx, dy) applied to the low shot
    crop_origin: tuple[int, int]  # (x, y)
    gains: tuple[float, float, float]
    blur_sigma: float
    opacity: float
    noise_sigma: float
    offsets: tuple[float, float, float]
    low_is_black: bool = False

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SampledParams":
        d = dict(d)
        for key in ("translate", "crop_origin", "gains", "offsets"):
            d[key] = tuple(d[key])
        return cls(**d)


@dataclass(frozen=True)
class FlareTriplet:
    corrupted: Image
    flare_free: Image
    flare: Image
    mask: np.ndarray = field(repr=False)  # (H, W) bool
    params: SampledParams = None


def sample_params(cfg: SynthesisConfig, rng: np.random.Generator,
                  seed: int = 0, index: int = 0) -> SampledParams:
    """Draw one parameter record. The draw order is fixed; changing it
    breaks byte-level reproducibility of existing seeds."""
    th, tw = cfg.resize_target
    t = rng.uniform(0.0, cfg.translate_max)
    angle = rng.uniform(0.0, 2.0 * np.pi)
    crop_x = int(rng.integers(0, tw - cfg.crop + 1))
    crop_y = int(rng.integers(0, th - cfg.crop + 1))
    gamma = rng.uniform(*cfg.gamma_range)
    gains = tuple(rng.uniform(*cfg.color_gain_range, size=3))
    blur_sigma = rng.uniform(*cfg.blur_sigma_range)
    opacity = rng.uniform(*cfg.opacity_range)
    noise_sigma = rng.uniform(*cfg.noise_sigma_range)
    offsets = tuple(rng.uniform(-cfg.color_offset_max, cfg.color_offset_max, size=3))
    return SampledParams(
        seed=seed, index=index, gamma=float(gamma),
        translate=(float(t * np.cos(angle)), float(t * np.sin(angle))),
        crop_origin=(crop_x, crop_y), gains=tuple(float(g) for g in gains),
        blur_sigma=float(blur_sigma), opacity=float(opacity),
        noise_sigma=float(noise_sigma),
        offsets=tuple(float(o) for o in offsets))


def compute_mask(flare: Image, threshold: float = 0.2) -> np.ndarray:
    """Binary flare mask: max over channels above ``threshold``.

    Computed on the encoded-domain flare, matching how the masked losses
    consume it."""
    if flare.domain.is_linear:
        raise ValueError("mask is defined on the encoded-domain flare")
    return flare.data.max(axis=2) > threshold


def _normalize_orientation(img: Image, target_hw: tuple[int, int]) -> Image:
    th, tw = target_hw
    if (img.width < img.height) != (tw < th):
        return img.with_data(np.swapaxes(img.data, 0, 1))
    return img


def synthesize_triplet(pair: BracketPair, cfg: SynthesisConfig,
                       seed: int, index: int = 0) -> FlareTriplet:
    """Run the full augmentation chain on one bracket pair."""
    rng = spawn_rng(seed, index)
    params = sample_params(cfg, rng, seed=seed, index=index)
    th, tw = cfg.resize_target

    normal = _normalize_orientation(pair.normal, cfg.resize_target)
    low = _normalize_orientation(pair.low, cfg.resize_target)
    if normal.width < tw or normal.height < th:
        raise ValueError(
            f"pair {pair.group_id!r} is {normal.width}x{normal.height}, "
            f"smaller than the resize target {tw}x{th}")

    normal = ops.resize_bilinear(normal, tw, th)
    low = ops.resize_bilinear(low, tw, th)
    low = ops.translate(low, *params.translate)
    cx, cy = params.crop_origin
    normal = ops.crop(normal, cx, cy, cfg.crop, cfg.crop)
    low = ops.crop(low, cx, cy, cfg.crop, cfg.crop)

    normal_lin = ops.to_linear(normal, params.gamma)
    low_lin = ops.to_linear(low, params.gamma)
    low_is_black = bool(low_lin.data.max() == 0.0)

    # flare branch (low shot): color, defocus blur, center symmetry, opacity
    flare = ops.mul_gains(low_lin, params.gains)
    flare = ops.gaussian_blur(flare, params.blur_sigma)
    flare = ops.rotate180_about(flare, raster_center(flare))
    flare = flare.with_data(flare.data * params.opacity)
    # radiance above 1 cannot survive re-encoding to [0,1]; clip it here so
    # the published decomposition identity holds exactly
    flare = ops.clamp01(flare)

    # background branch (normal shot): sensor noise, slight color cast
    background = ops.add_gaussian_noise(normal_lin, params.noise_sigma, rng)
    background = background.with_data(
        np.maximum(background.data + np.asarray(params.offsets), 0.0))
    background = ops.clamp01(background)

    corrupted = ops.clamp01(ops.add(background, flare))

    corrupted_enc = ops.to_encoded(corrupted, params.gamma)
    flare_free_enc = ops.to_encoded(background, params.gamma)
    flare_enc = ops.to_encoded(flare, params.gamma)
    mask = compute_mask(flare_enc, cfg.mask_threshold)

    if low_is_black:
        params = SampledParams(**{**params.to_dict(), "low_is_black": True})
    return FlareTriplet(corrupted=corrupted_enc, flare_free=flare_free_enc,
                        flare=flare_enc, mask=mask, params=params)


def generate(pairs: list[BracketPair], cfg: SynthesisConfig, seed: int,
             count: int, threads: int = 1) -> list[FlareTriplet]:
    """Synthesize ``count`` triplets, cycling through ``pairs``.

    Each item derives its own stream from (seed, index), so the output is
    identical for any thread count."""
    if count < 0:
        raise ValueError("count must be >= 0")
    if not pairs and count > 0:
        raise ValueError("no bracket pairs to synthesize from")

    def work(i: int) -> FlareTriplet:
        return synthesize_triplet(pairs[i % len(pairs)], cfg, seed, index=i)

    if threads <= 1:
        return [work(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(work, range(count)))

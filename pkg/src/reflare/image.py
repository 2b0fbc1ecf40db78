"""Core raster type: an immutable float RGB image with a gamma-domain tag."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

CENTER_MARGIN = 32  # px a center may sit outside the raster


@dataclass(frozen=True)
class Domain:
    """Tag describing whether samples are linear radiance or gamma-encoded.

    ``gamma`` is the decode exponent for encoded images when it is known
    (files loaded from disk carry ``None``: the camera curve is not parsed).
    """

    kind: str  # "linear" | "encoded"
    gamma: float | None = None

    def __post_init__(self):
        if self.kind not in ("linear", "encoded"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if self.kind == "linear" and self.gamma is not None:
            raise ValueError("linear domain carries no gamma")
        if self.gamma is not None and not (np.isfinite(self.gamma)
                                           and self.gamma > 0):
            raise ValueError(f"gamma must be a finite positive real, "
                             f"got {self.gamma}")

    @property
    def is_linear(self) -> bool:
        return self.kind == "linear"


LINEAR = Domain("linear")


def encoded(gamma: float | None = None) -> Domain:
    return Domain("encoded", gamma)


@dataclass(frozen=True)
class Image:
    """Row-major, channel-interleaved float64 RGB raster.

    Invariants enforced at construction: shape (H, W, 3) with H, W >= 1,
    all samples finite and >= 0. Values above 1 are allowed (linear-domain
    highlights before clipping). The array is frozen read-only; all
    operations return new images, so instances are safe to share across
    threads.
    """

    data: np.ndarray = field(repr=False)
    domain: Domain = LINEAR

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"image shape must be (H, W, 3), got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("image contains non-finite samples")
        if arr.min() < 0.0:
            raise ValueError("image contains negative samples")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def with_data(self, data: np.ndarray, domain: Domain | None = None) -> "Image":
        return Image(data, self.domain if domain is None else domain)

    def same_shape(self, other: "Image") -> bool:
        return self.data.shape == other.data.shape


@dataclass(frozen=True)
class OpticalCenter:
    """Sub-pixel image coordinates of the lens optical center.

    Origin is the center of the top-left pixel; x grows rightward, y
    downward.
    """

    cx: float
    cy: float

    def __post_init__(self):
        if not (np.isfinite(self.cx) and np.isfinite(self.cy)):
            raise ValueError("optical center must be finite")

    def validate_for(self, img: Image, margin: int = CENTER_MARGIN) -> None:
        if not (-margin <= self.cx <= img.width - 1 + margin
                and -margin <= self.cy <= img.height - 1 + margin):
            raise ValueError(
                f"center ({self.cx}, {self.cy}) outside image bounds "
                f"{img.width}x{img.height} extended by {margin}px")


def raster_center(img: Image) -> OpticalCenter:
    """Exact geometric center of the pixel grid."""
    return OpticalCenter((img.width - 1) / 2.0, (img.height - 1) / 2.0)


class DomainMismatchError(ValueError):
    """Arithmetic attempted between images in different gamma domains."""

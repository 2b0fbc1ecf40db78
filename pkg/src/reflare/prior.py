"""Center-symmetry prior image and the six-channel training contract.

The prior is the input raised to a steep power (default 10), which keeps
only nearly saturated light-source pixels, then point-reflected about the
optical center. It lands where a ghost reflection would, giving a
restoration network an initial estimate of the flare pattern.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import ops
from .dataset import save_pfm, load_pfm
from .image import Image, OpticalCenter, raster_center
from .synthesis import FlareTriplet

PRIOR_GAMMA = 10.0


def compute_prior(corrupted: Image, center: OpticalCenter,
                  gamma_p: float = PRIOR_GAMMA) -> Image:
    """Saturation extraction (per-channel power ``gamma_p``) followed by a
    180 degree rotation about ``center``. Operates on the encoded input."""
    if gamma_p <= 0 or not np.isfinite(gamma_p):
        raise ValueError("gamma_p must be a finite positive real")
    squeezed = corrupted.with_data(np.power(corrupted.data, gamma_p))
    return ops.rotate180_about(squeezed, center)


@dataclass(frozen=True)
class SixChannelSample:
    """Training I/O pair: input planes [corrupted RGB | prior RGB] and
    target planes [flare-free RGB | flare RGB]."""

    input: np.ndarray  # (H, W, 6)
    target: np.ndarray  # (H, W, 6)

    def __post_init__(self):
        if self.input.shape != self.target.shape or self.input.shape[2] != 6:
            raise ValueError("six-channel stacks must share an (H, W, 6) shape")


def build_sample(triplet: FlareTriplet, center: OpticalCenter | None = None,
                 gamma_p: float = PRIOR_GAMMA) -> SixChannelSample:
    """Assemble the network contract for one triplet. The center defaults
    to the crop raster center, matching how the triplet was synthesized."""
    if center is None:
        center = raster_center(triplet.corrupted)
    prior = compute_prior(triplet.corrupted, center, gamma_p)
    return SixChannelSample(
        input=np.concatenate([triplet.corrupted.data, prior.data], axis=2),
        target=np.concatenate([triplet.flare_free.data, triplet.flare.data], axis=2))


def export_samples(out_dir, samples: list[SixChannelSample]) -> None:
    """Write stacks for an external trainer: per sample, four RGB PFMs
    (two input planes, two target planes) plus a plane-order sidecar."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    planes = ("input_corrupted", "input_prior", "target_flare_free", "target_flare")
    for i, s in enumerate(samples):
        stem = f"sample_{i:05d}"
        halves = (s.input[:, :, :3], s.input[:, :, 3:],
                  s.target[:, :, :3], s.target[:, :, 3:])
        for name, half in zip(planes, halves):
            save_pfm(out / f"{stem}.{name}.pfm", Image(half))
    (out / "samples.json").write_text(json.dumps(
        {"count": len(samples), "planes": list(planes),
         "note": "all planes stored as linear-tagged PFM; values are the "
                 "encoded-domain samples of the training contract"},
        indent=2))


def import_samples(in_dir) -> list[SixChannelSample]:
    out_dir = Path(in_dir)
    meta = json.loads((out_dir / "samples.json").read_text())
    samples = []
    for i in range(meta["count"]):
        stem = f"sample_{i:05d}"
        halves = [load_pfm(out_dir / f"{stem}.{p}.pfm").data for p in meta["planes"]]
        samples.append(SixChannelSample(
            input=np.concatenate(halves[:2], axis=2),
            target=np.concatenate(halves[2:], axis=2)))
    return samples

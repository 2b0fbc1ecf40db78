"""Procedural night scenes: compact bracket pairs for demos and tests.

Each scene is a dark, smoothly varying background with one uniform,
saturated light source. The low-exposure shot keeps only the source
pattern, exactly as a real 5-shot bracket's darkest frame would. Sources
are hard-edged uniform disks so fitted parameters can be checked against
the synthesis record analytically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import BracketPair
from .image import Image, encoded
from .rng import make_rng

LOW_FLOOR = 0.002  # residual sensor signal in the darkest frame


@dataclass(frozen=True)
class NightScene:
    """A generated pair plus the ground truth used to build it."""

    pair: BracketPair
    source_xy: tuple[float, float]
    source_radius: float
    source_rgb: tuple[float, float, float]  # encoded value inside the disk
    low_rgb: tuple[float, float, float]     # the disk in the darkest frame


def make_night_scene(seed: int, size: int = 512,
                     source_offset: tuple[float, float] = (60.0, 200.0),
                     radius_range: tuple[float, float] = (4.0, 8.0),
                     max_background: float = 0.3,
                     low_shift: tuple[float, float] = (0.0, 0.0)) -> NightScene:
    """One scene with the light source placed so that both the source and
    its point reflection about the raster center stay in frame.

    ``low_shift`` displaces the source in the darkest frame only, emulating
    hand-held drift between bracketed shots.
    """
    rng = make_rng(seed)
    h = w = size
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)

    # uniform saturated source, mirror position guaranteed in frame
    rho = rng.uniform(*source_offset)
    phi = rng.uniform(0, 2 * np.pi)
    c = (size - 1) / 2.0
    sx, sy = c + rho * np.cos(phi), c + rho * np.sin(phi)
    mx, my = 2 * c - sx, 2 * c - sy  # where a flare would land

    # smooth background: a faint ramp plus a few wide dim blobs, all kept
    # clear of the flare landing zone so it stays locally flat there
    ang = rng.uniform(0, 2 * np.pi)
    ramp = (np.cos(ang) * xx + np.sin(ang) * yy) / size
    bg = rng.uniform(0.01, 0.04) + rng.uniform(0.0, 0.05) * (ramp - ramp.min())
    bg = bg[:, :, None].repeat(3, axis=2)
    keep_out = min(120.0, 0.25 * size)
    placed = 0
    while placed < 3:
        cx, cy = rng.uniform(0, w), rng.uniform(0, h)
        if (cx - mx) ** 2 + (cy - my) ** 2 < keep_out * keep_out:
            continue
        sig = rng.uniform(30.0, 60.0)
        amp = rng.uniform(0.02, 0.12)
        tint = rng.uniform(0.6, 1.0, size=3)
        bump = amp * np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * sig * sig))
        bg += bump[:, :, None] * tint
        placed += 1
    bg = np.clip(bg, 0.0, max_background)
    radius = rng.uniform(*radius_range)
    disk = (xx - sx) ** 2 + (yy - sy) ** 2 <= radius * radius
    tint = (1.0, float(rng.uniform(0.97, 1.0)), float(rng.uniform(0.94, 1.0)))
    low_level = rng.uniform(0.55, 0.70)
    low_rgb = tuple(float(low_level * t) for t in tint)

    normal = bg.copy()
    normal[disk] = tint
    ux, uy = low_shift
    low_disk = (xx - sx - ux) ** 2 + (yy - sy - uy) ** 2 <= radius * radius
    low = np.full((h, w, 3), LOW_FLOOR)
    low[low_disk] = low_rgb

    pair = BracketPair(normal=Image(normal, encoded()),
                       low=Image(low, encoded()),
                       group_id=f"scene_{seed:06d}")
    return NightScene(pair=pair, source_xy=(float(sx), float(sy)),
                      source_radius=float(radius), source_rgb=tint,
                      low_rgb=low_rgb)


def make_flare_free_image(seed: int, size: int = 512) -> Image:
    """A night image with a saturated source but no flare in it."""
    return make_night_scene(seed, size).pair.normal


def write_demo_tree(out_dir, count: int, seed: int, size: int = 512) -> list[str]:
    """Materialize ``count`` scenes as a 5-shot bracket directory tree that
    ``scan_bracket_groups`` can ingest. Intermediate exposures are derived
    by +-3 EV rescaling; only the darkest and middle shots matter."""
    from pathlib import Path
    from .dataset import save_image

    out = Path(out_dir)
    ids = []
    for i in range(count):
        scene = make_night_scene(seed + i, size)
        gid = scene.pair.group_id
        gdir = out / gid
        gdir.mkdir(parents=True, exist_ok=True)
        normal_lin = np.power(scene.pair.normal.data, 2.2)
        shots = {
            0: scene.pair.low.data,
            1: np.clip(np.power(normal_lin * 2.0 ** -3, 1 / 2.2), 0, 1),
            2: scene.pair.normal.data,
            3: np.clip(np.power(normal_lin * 2.0 ** 3, 1 / 2.2), 0, 1),
            4: np.clip(np.power(normal_lin * 2.0 ** 6, 1 / 2.2), 0, 1),
        }
        for k, data in shots.items():
            save_image(gdir / f"{k}.png", Image(data, encoded()))
        ids.append(gid)
    return ids

"""Paraxial ray-transfer-matrix engine for ghost reflections.

A lens is an ordered list of spherical interfaces. Each interface carries
its curvature, the gap to the next interface, and the refractive index of
the medium that follows it; the medium in front of the first interface is
air. A final sensor gap completes the system. An object gap can be modeled
as a leading flat interface with n = 1 (e.g. a lens protector window).

Sign conventions, fixed by matching the exact Snell-law oracle in the
test suite: positive curvature c = 1/R puts the center of curvature on
the *incident* side of the surface. With that choice the refraction
matrix is [[1, 0], [(n2 - n1) c / n2, n1 / n2]] and the mirror matrix is
[[1, 0], [2c, 1]]. Ghost paths are computed in "unfolded" coordinates:
backward travel reuses the forward translation matrices, crossing an
interface backward uses the inverse refraction matrix, and the second
(backward-facing) reflection uses the inverse mirror matrix, i.e. the
mirror seen from its back side.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import optimize

FOCUS_TOL = 1e-6  # mm/rad: |dh/dtheta| below this counts as focused
_FD_DTHETA = 1e-5  # central-difference step for the defocus probe


@dataclass(frozen=True)
class RayState:
    """Paraxial ray: height (mm) and slope angle (rad)."""

    h: float
    theta: float

    def __post_init__(self):
        if not (np.isfinite(self.h) and np.isfinite(self.theta)):
            raise ValueError("ray state must be finite")

    def as_vector(self) -> np.ndarray:
        return np.array([self.h, self.theta])


@dataclass(frozen=True)
class Surface:
    """One interface: curvature (1/mm), gap to the next interface (mm),
    and refractive index of the following medium."""

    curvature: float
    thickness: float
    index: float

    def __post_init__(self):
        if not np.isfinite(self.curvature):
            raise ValueError("curvature must be finite")
        if self.thickness < 0:
            raise ValueError("thickness must be >= 0")
        if self.index <= 0:
            raise ValueError("refractive index must be > 0")


@dataclass(frozen=True)
class LensPrescription:
    surfaces: tuple[Surface, ...]
    sensor_distance: float

    def __post_init__(self):
        if len(self.surfaces) < 1:
            raise ValueError("prescription needs at least one interface")
        if not np.isfinite(self.sensor_distance):
            raise ValueError("sensor distance must be finite")

    def with_sensor(self, sensor_distance: float) -> "LensPrescription":
        return LensPrescription(self.surfaces, sensor_distance)

    def to_file(self, path) -> None:
        lines = ["# lens prescription: surface <curvature 1/mm> <gap mm> <index>"]
        lines += [f"surface {float(s.curvature)!r} {float(s.thickness)!r} "
                  f"{float(s.index)!r}" for s in self.surfaces]
        lines.append(f"sensor {float(self.sensor_distance)!r}")
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def from_file(cls, path) -> "LensPrescription":
        surfaces, sensor = [], None
        for ln, raw in enumerate(Path(path).read_text().splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if parts[0] == "surface" and len(parts) == 4:
                surfaces.append(Surface(*(float(p) for p in parts[1:])))
            elif parts[0] == "sensor" and len(parts) == 2:
                sensor = float(parts[1])
            else:
                raise ValueError(f"{path}:{ln}: cannot parse {raw!r}")
        if sensor is None:
            raise ValueError(f"{path}: missing sensor distance")
        return cls(tuple(surfaces), sensor)


@dataclass(frozen=True)
class GhostPath:
    """Two-bounce itinerary: light reflects first at interface ``first``
    (the farther one), travels backward, reflects again at ``second``,
    then continues forward to the sensor."""

    first: int
    second: int

    def validate_for(self, lens: LensPrescription) -> None:
        n = len(lens.surfaces)
        if not (0 <= self.second < self.first < n):
            raise ValueError(
                f"ghost path ({self.first}, {self.second}) invalid for "
                f"{n}-interface prescription")


class UnfocusedSystemError(ValueError):
    """Ghost ratio requested on a configuration that is not focused."""

    def __init__(self, direct_defocus: float, ghost_defocus: float):
        self.direct_defocus = direct_defocus
        self.ghost_defocus = ghost_defocus
        super().__init__(
            f"system not focused: |dh0/dtheta| = {abs(direct_defocus):.3e}, "
            f"|dh1/dtheta| = {abs(ghost_defocus):.3e} mm/rad")


# matrix builders -----------------------------------------------------------

def translation_matrix(d: float) -> np.ndarray:
    if not np.isfinite(d):
        raise ValueError("translation distance must be finite")
    return np.array([[1.0, d], [0.0, 1.0]])


def refraction_matrix(c: float, n_in: float, n_out: float) -> np.ndarray:
    if n_in <= 0 or n_out <= 0:
        raise ValueError("refractive indices must be positive")
    return np.array([[1.0, 0.0], [(n_out - n_in) * c / n_out, n_in / n_out]])


def reflection_matrix(c: float) -> np.ndarray:
    # Standard paraxial mirror: bottom-right entry is 1 (a zero there would
    # annihilate the incoming angle, which the Snell oracle rules out).
    if not np.isfinite(c):
        raise ValueError("curvature must be finite")
    return np.array([[1.0, 0.0], [2.0 * c, 1.0]])


def compose(matrices) -> np.ndarray:
    """Right-to-left product: matrices listed in the order light meets them."""
    out = np.eye(2)
    for m in matrices:
        out = np.asarray(m) @ out
    return out


# tracing -------------------------------------------------------------------

def _direct_sequence(lens: LensPrescription) -> list[np.ndarray]:
    seq, n_prev = [], 1.0
    for s in lens.surfaces:
        seq.append(refraction_matrix(s.curvature, n_prev, s.index))
        seq.append(translation_matrix(s.thickness))
        n_prev = s.index
    seq.append(translation_matrix(lens.sensor_distance))
    return seq


def _ghost_sequence(lens: LensPrescription, path: GhostPath) -> list[np.ndarray]:
    path.validate_for(lens)
    surf = lens.surfaces
    j, i = path.first, path.second
    seq, n_prev = [], 1.0
    for m in range(j):
        seq.append(refraction_matrix(surf[m].curvature, n_prev, surf[m].index))
        seq.append(translation_matrix(surf[m].thickness))
        n_prev = surf[m].index
    seq.append(reflection_matrix(surf[j].curvature))
    for m in range(j - 1, i - 1, -1):
        seq.append(translation_matrix(surf[m].thickness))
        if m > i:
            n_in = surf[m - 1].index if m >= 1 else 1.0
            seq.append(np.linalg.inv(
                refraction_matrix(surf[m].curvature, n_in, surf[m].index)))
    seq.append(np.linalg.inv(reflection_matrix(surf[i].curvature)))
    n_prev = surf[i].index
    for m in range(i, len(surf)):
        if m > i:
            seq.append(refraction_matrix(surf[m].curvature, n_prev, surf[m].index))
            n_prev = surf[m].index
        seq.append(translation_matrix(surf[m].thickness))
    seq.append(translation_matrix(lens.sensor_distance))
    return seq


def direct_matrix(lens: LensPrescription) -> np.ndarray:
    return compose(_direct_sequence(lens))


def ghost_matrix(lens: LensPrescription, path: GhostPath) -> np.ndarray:
    return compose(_ghost_sequence(lens, path))


def trace_direct(lens: LensPrescription, ray: RayState) -> RayState:
    h, theta = direct_matrix(lens) @ ray.as_vector()
    return RayState(h, theta)


def trace_ghost(lens: LensPrescription, ray: RayState, path: GhostPath) -> RayState:
    h, theta = ghost_matrix(lens, path) @ ray.as_vector()
    return RayState(h, theta)


def defocus(lens: LensPrescription, path: GhostPath | None = None) -> float:
    """dh/dtheta at the sensor, by central finite difference."""
    trace = ((lambda r: trace_ghost(lens, r, path)) if path is not None
             else (lambda r: trace_direct(lens, r)))
    hp = trace(RayState(0.0, _FD_DTHETA)).h
    hm = trace(RayState(0.0, -_FD_DTHETA)).h
    return (hp - hm) / (2.0 * _FD_DTHETA)


def focus_sensor_distance(lens: LensPrescription,
                          path: GhostPath | None = None) -> float:
    """Sensor distance that focuses the direct (or ghost) image.

    Secant method on the defocus as a function of sensor distance. The
    defocus is exactly linear in the sensor gap, so two probes converge.
    """
    s0, s1 = lens.sensor_distance, lens.sensor_distance + 1.0
    f0 = defocus(lens.with_sensor(s0), path)
    for _ in range(50):
        f1 = defocus(lens.with_sensor(s1), path)
        if f1 == f0:
            break
        s0, s1, f0 = s1, s1 - f1 * (s1 - s0) / (f1 - f0), f1
        if abs(s1 - s0) < 1e-12:
            break
    return s1


@dataclass(frozen=True)
class GhostRatio:
    """Least-squares ghost/direct height ratio and its fit residual."""

    k: float
    residual: float


_RATIO_H_GRID = np.linspace(0.1, 1.0, 21)
_RATIO_THETA_GRID = np.linspace(-0.05, 0.05, 21)


def ghost_ratio(lens: LensPrescription, path: GhostPath,
                focus_tol: float = FOCUS_TOL) -> GhostRatio:
    """Constant ratio k with h_ghost = k * h_direct for a focused system.

    Estimated by least squares over an (h, theta) grid; raises
    :class:`UnfocusedSystemError` when either image is not focused at the
    sensor (the ratio is ill-defined there).
    """
    dd = defocus(lens)
    gd = defocus(lens, path)
    if abs(dd) > focus_tol or abs(gd) > focus_tol:
        raise UnfocusedSystemError(dd, gd)
    md = direct_matrix(lens)
    mg = ghost_matrix(lens, path)
    rays = np.array([[h, t] for h in _RATIO_H_GRID for t in _RATIO_THETA_GRID]).T
    h0 = (md @ rays)[0]
    h1 = (mg @ rays)[0]
    k = float(np.dot(h0, h1) / np.dot(h0, h0))
    residual = float(np.sqrt(np.mean((h1 - k * h0) ** 2)))
    return GhostRatio(k, residual)


def predict_flare_position(light_px: tuple[float, float], center,
                           k: float) -> tuple[float, float]:
    """Flare pixel position: center + k * (light - center)."""
    cx, cy = center.cx, center.cy
    return (cx + k * (light_px[0] - cx), cy + k * (light_px[1] - cy))


# bundled symmetric prescription -------------------------------------------

# Template solved by make_symmetric_prescription(): a flat entrance window
# carrying the object gap, then two elements; the ghost bounces off the
# exit faces of both elements (interfaces 4 and 2).
SYMMETRIC_GHOST_PATH = GhostPath(first=4, second=2)

_SYM_GAPS = (80.0, 3.0, 2.0, 3.0, 0.0)
_SYM_INDICES = (1.0, 1.6, 1.0, 1.55, 1.0)
_SYM_FIXED_C = (0.0, -0.03, None, -0.02, None)  # None = solved
_SYM_X0 = (0.2530632643, -0.1590676082)


def _assemble(x) -> LensPrescription:
    c2, c4 = x
    curvatures = (0.0, -0.03, float(c2), -0.02, float(c4))
    surfaces = tuple(Surface(c, d, n) for c, d, n
                     in zip(curvatures, _SYM_GAPS, _SYM_INDICES))
    return LensPrescription(surfaces, 0.0)


def make_symmetric_prescription(k_target: float = -1.0) -> LensPrescription:
    """Construct a 5-interface prescription with both images focused at the
    same sensor plane and ghost ratio k = ``k_target``.

    Solves two free curvatures by root finding: the ghost defocus at the
    direct-focus sensor distance must vanish, and the focused height ratio
    must equal the target.
    """

    def residuals(x):
        lens = _assemble(x)
        s = focus_sensor_distance(lens)
        lens = lens.with_sensor(s)
        mg = ghost_matrix(lens, SYMMETRIC_GHOST_PATH)
        md = direct_matrix(lens)
        return [mg[0, 1], mg[0, 0] / md[0, 0] - k_target]

    sol = optimize.root(residuals, x0=_SYM_X0, method="hybr")
    if not sol.success and max(abs(r) for r in residuals(sol.x)) > 1e-10:
        raise RuntimeError(f"symmetric prescription solve failed: {sol.message}")
    lens = _assemble(sol.x)
    return lens.with_sensor(focus_sensor_distance(lens))

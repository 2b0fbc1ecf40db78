"""Independent reference implementations used to validate the package.

Everything here is deliberately written the slow, obvious way — exact
nonlinear ray tracing with vector Snell's law, brute-force loops for the
image resamplers — so a bug in the library cannot hide in a shared
implementation.
"""

from __future__ import annotations

import numpy as np

from reflare.optics import LensPrescription


def snell_trace_direct(lens: LensPrescription, h: float, theta: float) -> float:
    """Exact meridional ray trace through the prescription to the sensor.

    Spheres use the package's curvature convention: c > 0 puts the center
    of curvature on the incident side of the vertex (at z_vertex - 1/c).
    """
    p = np.array([0.0, h])
    d = np.array([np.cos(theta), np.sin(theta)])
    n_prev, zv = 1.0, 0.0
    for s in lens.surfaces:
        if s.curvature == 0.0:
            t = (zv - p[0]) / d[0]
            p = p + t * d
            nrm = np.array([-1.0, 0.0])
        else:
            r_signed = -1.0 / s.curvature  # center offset along +z
            ctr = np.array([zv + r_signed, 0.0])
            oc = p - ctr
            b = float(np.dot(oc, d))
            disc = b * b - (float(np.dot(oc, oc)) - r_signed * r_signed)
            sq = np.sqrt(disc)
            # pick the intersection nearest the vertex plane
            t = min((-b - sq, -b + sq), key=lambda tt: abs((p + tt * d)[0] - zv))
            p = p + t * d
            nrm = (p - ctr) / r_signed  # equals -z_hat at the vertex
        eta = n_prev / s.index
        ci = -float(np.dot(d, nrm))
        st2 = eta * eta * (1.0 - ci * ci)
        d = eta * d + (eta * ci - np.sqrt(1.0 - st2)) * nrm
        d = d / np.linalg.norm(d)
        n_prev = s.index
        zv += s.thickness
    z_sensor = sum(s.thickness for s in lens.surfaces) + lens.sensor_distance
    t = (z_sensor - p[0]) / d[0]
    return float(p[1] + t * d[1])


def brute_gaussian_blur(arr: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian with replicate edges, computed pixel by pixel."""
    if sigma <= 0:
        return arr.copy()
    radius = int(np.ceil(3.0 * sigma))
    taps = np.exp(-0.5 * (np.arange(-radius, radius + 1) / sigma) ** 2)
    taps /= taps.sum()
    h, w = arr.shape[:2]

    def along_rows(a):
        out = np.empty_like(a)
        for y in range(a.shape[0]):
            for x in range(a.shape[1]):
                acc = 0.0
                for k in range(-radius, radius + 1):
                    xx = min(max(x + k, 0), a.shape[1] - 1)
                    acc += taps[k + radius] * a[y, xx]
                out[y, x] = acc
        return out

    out = np.empty_like(arr)
    for c in range(arr.shape[2]):
        tmp = along_rows(arr[:, :, c])
        out[:, :, c] = along_rows(tmp.T).T
    return out


def brute_bilinear(arr: np.ndarray, y: float, x: float, border: str) -> np.ndarray:
    """One bilinear sample, scalar arithmetic only."""
    h, w = arr.shape[:2]
    y0, x0 = int(np.floor(y)), int(np.floor(x))
    fy, fx = y - y0, x - x0
    acc = np.zeros(arr.shape[2])
    for dy, wy in ((0, 1 - fy), (1, fy)):
        for dx, wx in ((0, 1 - fx), (1, fx)):
            yy, xx = y0 + dy, x0 + dx
            if 0 <= yy < h and 0 <= xx < w:
                val = arr[yy, xx]
            elif border == "clamp":
                val = arr[min(max(yy, 0), h - 1), min(max(xx, 0), w - 1)]
            else:
                val = 0.0
            acc = acc + wy * wx * val
    return acc

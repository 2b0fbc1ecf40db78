"""Prior-guided, optimization-based flare removal.

A transparent inverse-problem baseline: the forward flare model is
"per-channel gain x Gaussian blur x sub-pixel shift of the point-reflected
saturation pattern". The fitter searches (blur sigma, shift) on a coarse
grid, refines by coordinate descent with golden-section line searches, and
solves the gains in closed form per channel by nonnegative projection of
the template onto the high-pass component of the decoded input, all within
a proposal region located by the center-symmetry prior. The removal only
ever edits pixels inside that region.

Also here: the HDR light-source reconstruction that copies the recovered
flare back onto saturated pixels at a +12 EV exposure offset.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage
from sklearn.base import BaseEstimator

from . import ops
from .image import Image, OpticalCenter, encoded, raster_center
from .prior import PRIOR_GAMMA

DEFAULT_GAMMA = 2.2


@dataclass(frozen=True)
class SearchConfig:
    sat_threshold: float = 0.9    # proposal saturation (recall side)
    dilation: int = 25            # px, proposal disk radius
    gamma: float = DEFAULT_GAMMA  # decode gamma when the input has none
    sigma_max: float = 4.0
    sigma_step: float = 0.5
    shift_max: float = 15.0
    shift_step: float = 3.0
    refine_tol: float = 1e-3
    neg_weight: float = 10.0      # penalty on negative residual radiance
    highpass_sigma: float = 50.0  # background scale for the gain solve

    def sigma_grid(self) -> np.ndarray:
        return np.arange(0.0, self.sigma_max + 1e-9, self.sigma_step)

    def shift_grid(self) -> np.ndarray:
        return np.arange(-self.shift_max, self.shift_max + 1e-9, self.shift_step)


@dataclass(frozen=True)
class FlareFitParams:
    """Fitted forward-model parameters plus fit diagnostics."""

    gains: tuple[float, float, float]
    blur_sigma: float
    offset: tuple[float, float]
    objective: float
    baseline_objective: float
    improved: bool
    history: tuple[float, ...] = field(default=(), repr=False)

    @property
    def is_identity(self) -> bool:
        return all(g == 0.0 for g in self.gains)


IDENTITY_PARAMS = FlareFitParams(gains=(0.0, 0.0, 0.0), blur_sigma=0.0,
                                 offset=(0.0, 0.0), objective=0.0,
                                 baseline_objective=0.0, improved=False)


@dataclass(frozen=True)
class RemovalResult:
    flare_free_est: Image
    flare_est: Image
    params: FlareFitParams
    proposal: np.ndarray = field(repr=False)  # (H, W) bool


# array-level helpers (same semantics as the Image ops) ----------------------

def _shift_arr(arr: np.ndarray, dx: float, dy: float) -> np.ndarray:
    if dx == 0.0 and dy == 0.0:
        return arr
    if dx == int(dx) and dy == int(dy):  # fast path for grid shifts
        out = np.zeros_like(arr)
        ix, iy = int(dx), int(dy)
        h, w = arr.shape[:2]
        ys = slice(max(iy, 0), min(h + iy, h))
        xs = slice(max(ix, 0), min(w + ix, w))
        yd = slice(max(-iy, 0), min(h - iy, h))
        xd = slice(max(-ix, 0), min(w - ix, w))
        out[ys, xs] = arr[yd, xd]
        return out
    from .ops import _bilinear_sample
    h, w = arr.shape[:2]
    ys, xs = np.meshgrid(np.arange(h, dtype=np.float64),
                         np.arange(w, dtype=np.float64), indexing="ij")
    return _bilinear_sample(arr, ys - dy, xs - dx, border="zero")


def _blur_arr(arr: np.ndarray, sigma: float) -> np.ndarray:
    if sigma <= 0.0:
        return arr
    radius = int(np.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-0.5 * (x / sigma) ** 2)
    kernel /= kernel.sum()
    out = ndimage.convolve1d(arr, kernel, axis=0, mode="nearest")
    return ndimage.convolve1d(out, kernel, axis=1, mode="nearest")


def _rotate180_arr(arr: np.ndarray, center: OpticalCenter) -> np.ndarray:
    from .ops import _bilinear_sample
    h, w = arr.shape[:2]
    ys, xs = np.meshgrid(np.arange(h, dtype=np.float64),
                         np.arange(w, dtype=np.float64), indexing="ij")
    return _bilinear_sample(arr, 2.0 * center.cy - ys, 2.0 * center.cx - xs,
                            border="zero")


def _decode_gamma(img: Image, cfg: SearchConfig) -> float:
    return img.domain.gamma if img.domain.gamma is not None else cfg.gamma


def proposal_region(input_img: Image, center: OpticalCenter,
                    sat_threshold: float = 0.9, dilation: int = 25) -> np.ndarray:
    """Where a ghost could live: the point reflection of the saturated
    pixels about the center, dilated by ``dilation`` px."""
    if input_img.domain.is_linear:
        raise ValueError("proposal region is defined on the encoded input")
    sat = (input_img.data.max(axis=2) >= sat_threshold).astype(np.float64)
    rot = _rotate180_arr(sat[:, :, None], center)[:, :, 0] > 1e-9
    if not rot.any():
        return rot
    dist = ndimage.distance_transform_edt(~rot)
    return dist <= dilation


class _Fitter:
    """One fit: caches the decoded input, template base, and proposal
    window so objective evaluations stay cheap."""

    def __init__(self, input_img: Image, center: OpticalCenter, cfg: SearchConfig):
        self.cfg = cfg
        self.gamma = _decode_gamma(input_img, cfg)
        self.proposal = proposal_region(input_img, center,
                                        cfg.sat_threshold, cfg.dilation)
        if not self.proposal.any():
            return
        dec = np.power(input_img.data, self.gamma)
        sat = np.power(input_img.data, PRIOR_GAMMA)
        rot = _rotate180_arr(sat, center)
        # working window: proposal bbox padded by the template's reach
        pad = int(np.ceil(3.0 * cfg.sigma_max + cfg.shift_max)) + 2
        ys, xs = np.where(self.proposal)
        h, w = self.proposal.shape
        self.y0, self.y1 = max(ys.min() - pad, 0), min(ys.max() + pad + 1, h)
        self.x0, self.x1 = max(xs.min() - pad, 0), min(xs.max() + pad + 1, w)
        win = np.s_[self.y0:self.y1, self.x0:self.x1]
        self.dec_win = dec[win]
        self.rot_win = rot[win]
        self.prop_win = self.proposal[win]
        # background estimate by normalized convolution over the pixels
        # outside the proposal, so the flare cannot contaminate it
        keep = (~self.proposal).astype(np.float64)
        num = _blur_arr(dec * keep[:, :, None], cfg.highpass_sigma)
        den = _blur_arr(keep, cfg.highpass_sigma)
        bg_est = num / np.maximum(den, 1e-12)[:, :, None]
        self.high_win = (dec - bg_est)[win]

    @property
    def empty(self) -> bool:
        return not self.proposal.any()

    def template(self, sigma: float, dx: float, dy: float) -> np.ndarray:
        # blur first, then shift: the two commute away from the window
        # border, and this lets one blur serve a whole row of shifts
        cached = getattr(self, "_blur_cache", None)
        if cached is None or cached[0] != sigma:
            cached = (sigma, _blur_arr(self.rot_win, sigma))
            self._blur_cache = cached
        return _shift_arr(cached[1], dx, dy)

    def solve_gains(self, tmpl: np.ndarray) -> np.ndarray:
        """Per-channel nonnegative least squares of the unit template
        against the high-pass input within the proposal region."""
        m = self.prop_win
        num = np.einsum("ij,ijc->c", m.astype(np.float64), tmpl * self.high_win)
        den = np.einsum("ij,ijc->c", m.astype(np.float64), tmpl * tmpl)
        with np.errstate(invalid="ignore", divide="ignore"):
            g = np.where(den > 0, num / den, 0.0)
        return np.maximum(g, 0.0)

    def objective_of(self, resid: np.ndarray) -> float:
        m = self.prop_win
        gx = np.zeros_like(resid)
        gy = np.zeros_like(resid)
        gx[:, :-1] = np.diff(resid, axis=1)
        gy[:-1, :] = np.diff(resid, axis=0)
        grad = float(np.sum((np.abs(gx) + np.abs(gy))[m]))
        neg = float(np.sum(np.maximum(-resid, 0.0)[m]))
        return grad + self.cfg.neg_weight * neg

    def evaluate(self, sigma: float, dx: float, dy: float
                 ) -> tuple[float, np.ndarray]:
        tmpl = self.template(sigma, dx, dy)
        gains = self.solve_gains(tmpl)
        return self.objective_of(self.dec_win - gains * tmpl), gains


def _golden_section(fn, lo: float, hi: float, tol: float) -> tuple[float, float]:
    """Minimize a 1-D function on [lo, hi] by golden-section search."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fn(c), fn(d)
    while abs(b - a) > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fn(d)
    x = c if fc < fd else d
    return x, min(fc, fd)


def fit_flare(input_img: Image, center: OpticalCenter | None = None,
              cfg: SearchConfig = SearchConfig()) -> FlareFitParams:
    """Fit the parametric flare model; see the module docstring.

    Returns identity parameters (all-zero gains) when the proposal region
    is empty or when no parameter setting beats leaving the image alone.
    """
    if center is None:
        center = raster_center(input_img)
    fitter = _Fitter(input_img, center, cfg)
    if fitter.empty:
        return IDENTITY_PARAMS

    baseline = fitter.objective_of(fitter.dec_win)  # zero-gain objective
    best = (np.inf, 0.0, 0.0, 0.0)  # (objective, sigma, dx, dy)
    for sigma in cfg.sigma_grid():
        blurred = None
        for dx in cfg.shift_grid():
            for dy in cfg.shift_grid():
                j, _ = fitter.evaluate(sigma, dx, dy)
                if j < best[0]:
                    best = (j, sigma, dx, dy)
    history = [best[0]]

    # coordinate descent with golden-section refinement, one grid step wide
    j_best, sigma, dx, dy = best
    for _ in range(6):
        j_before = j_best
        for name in ("sigma", "dx", "dy"):
            if name == "sigma":
                lo = max(sigma - cfg.sigma_step, 0.0)
                hi = min(sigma + cfg.sigma_step, cfg.sigma_max)
                fn = lambda v: fitter.evaluate(v, dx, dy)[0]
            elif name == "dx":
                lo = max(dx - cfg.shift_step, -cfg.shift_max)
                hi = min(dx + cfg.shift_step, cfg.shift_max)
                fn = lambda v: fitter.evaluate(sigma, v, dy)[0]
            else:
                lo = max(dy - cfg.shift_step, -cfg.shift_max)
                hi = min(dy + cfg.shift_step, cfg.shift_max)
                fn = lambda v: fitter.evaluate(sigma, dx, v)[0]
            x, fx = _golden_section(fn, lo, hi, cfg.refine_tol)
            if fx < j_best:  # accept only improvements: monotone objective
                j_best = fx
                if name == "sigma":
                    sigma = x
                elif name == "dx":
                    dx = x
                else:
                    dy = x
                history.append(j_best)
        if j_before - j_best < 1e-12:
            break

    j_final, gains = fitter.evaluate(sigma, dx, dy)
    if j_final >= baseline or not np.any(gains > 0):
        return replace(IDENTITY_PARAMS, objective=baseline,
                       baseline_objective=baseline,
                       history=tuple(history))
    return FlareFitParams(gains=tuple(float(g) for g in gains),
                          blur_sigma=float(sigma), offset=(float(dx), float(dy)),
                          objective=float(j_final),
                          baseline_objective=float(baseline),
                          improved=True, history=tuple(history))


def _flare_model_full(input_img: Image, center: OpticalCenter,
                      params: FlareFitParams, proposal: np.ndarray,
                      cfg: SearchConfig) -> np.ndarray:
    """Fitted flare radiance on the full raster, masked to the proposal
    region so pixels outside it are never touched."""
    sat = np.power(input_img.data, PRIOR_GAMMA)
    rot = _rotate180_arr(sat, center)
    tmpl = _shift_arr(_blur_arr(rot, params.blur_sigma), *params.offset)
    return tmpl * np.asarray(params.gains) * proposal[:, :, None]


def remove_flare(input_img: Image, center: OpticalCenter | None = None,
                 cfg: SearchConfig = SearchConfig(),
                 passes: int = 1) -> RemovalResult:
    """Fit and subtract the flare model.

    The flare-free estimate keeps every pixel outside the proposal region
    bit-identical to the input. ``passes`` > 1 re-fits on the residual to
    peel off secondary sources.
    """
    if center is None:
        center = raster_center(input_img)
    gamma = _decode_gamma(input_img, cfg)
    work = input_img
    flare_total = np.zeros_like(input_img.data)
    prop_total = np.zeros(input_img.data.shape[:2], dtype=bool)
    last_params = IDENTITY_PARAMS
    for _ in range(max(passes, 1)):
        params = fit_flare(work, center, cfg)
        last_params = params
        if params.is_identity:
            break
        prop = proposal_region(work, center, cfg.sat_threshold, cfg.dilation)
        flare = _flare_model_full(work, center, params, prop, cfg)
        flare_total += flare
        prop_total |= prop
        dec = np.power(work.data, gamma)
        data = work.data.copy()
        data[prop] = np.power(np.maximum(dec - flare, 0.0), 1.0 / gamma)[prop]
        work = Image(data, work.domain)

    flare_free = Image(work.data, encoded(gamma))
    flare_est = Image(np.power(flare_total, 1.0 / gamma), encoded(gamma))
    return RemovalResult(flare_free_est=flare_free, flare_est=flare_est,
                         params=last_params, proposal=prop_total)


def hdr_merge(input_img: Image, flare_est: Image,
              center: OpticalCenter | None = None, ev_step: float = 12.0,
              sat_threshold: float = 0.99,
              gamma: float | None = None) -> Image:
    """Reconstruct saturated light sources from the recovered flare.

    The flare is rotated back onto the light source, its linear radiance
    scaled by 2**ev_step, and substituted at saturated input pixels. The
    result is linear and unbounded above.
    """
    if not input_img.same_shape(flare_est):
        raise ValueError("input and flare estimate must share dimensions")
    if input_img.domain.is_linear or flare_est.domain.is_linear:
        raise ValueError("hdr_merge expects encoded inputs")
    if center is None:
        center = raster_center(input_img)
    g_in = gamma if gamma is not None else (input_img.domain.gamma or DEFAULT_GAMMA)
    g_fl = gamma if gamma is not None else (flare_est.domain.gamma or g_in)
    dec = np.power(input_img.data, g_in)
    flare_lin = np.power(flare_est.data, g_fl)
    back = _rotate180_arr(flare_lin, center)
    saturated = input_img.data.max(axis=2) >= sat_threshold
    out = dec.copy()
    out[saturated] = back[saturated] * (2.0 ** ev_step)
    return Image(out)


class FlareRemover(BaseEstimator):
    """Estimator wrapper so the baseline composes with sklearn tooling.

    ``fit(image)`` runs the parametric fit and stores the fitted model;
    ``transform(image)`` subtracts that model from a same-geometry image
    (e.g. later frames of a static shot). ``fit_transform`` is the usual
    single-image removal.
    """

    def __init__(self, sat_threshold=0.9, dilation=25, gamma=DEFAULT_GAMMA,
                 sigma_max=4.0, sigma_step=0.5, shift_max=15.0, shift_step=3.0,
                 refine_tol=1e-3, neg_weight=10.0, highpass_sigma=50.0,
                 center=None, passes=1):
        self.sat_threshold = sat_threshold
        self.dilation = dilation
        self.gamma = gamma
        self.sigma_max = sigma_max
        self.sigma_step = sigma_step
        self.shift_max = shift_max
        self.shift_step = shift_step
        self.refine_tol = refine_tol
        self.neg_weight = neg_weight
        self.highpass_sigma = highpass_sigma
        self.center = center
        self.passes = passes

    def _config(self) -> SearchConfig:
        return SearchConfig(
            sat_threshold=self.sat_threshold, dilation=self.dilation,
            gamma=self.gamma, sigma_max=self.sigma_max,
            sigma_step=self.sigma_step, shift_max=self.shift_max,
            shift_step=self.shift_step, refine_tol=self.refine_tol,
            neg_weight=self.neg_weight, highpass_sigma=self.highpass_sigma)

    def fit(self, X: Image, y=None) -> "FlareRemover":
        center = self.center if self.center is not None else raster_center(X)
        self.result_ = remove_flare(X, center, self._config(), self.passes)
        self.fitted_params_ = self.result_.params
        return self

    def transform(self, X: Image) -> Image:
        if not hasattr(self, "result_"):
            raise RuntimeError("FlareRemover.transform called before fit")
        center = self.center if self.center is not None else raster_center(X)
        gamma = _decode_gamma(X, self._config())
        if self.fitted_params_.is_identity:
            return X
        flare = _flare_model_full(X, center, self.fitted_params_,
                                  self.result_.proposal, self._config())
        dec = np.power(X.data, gamma)
        data = X.data.copy()
        prop = self.result_.proposal
        data[prop] = np.power(np.maximum(dec - flare, 0.0), 1.0 / gamma)[prop]
        return Image(data, encoded(gamma))

    def fit_transform(self, X: Image, y=None) -> Image:
        return self.fit(X).result_.flare_free_est

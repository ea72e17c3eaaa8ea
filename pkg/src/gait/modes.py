"""Mode counting: diversity sweeps over kernel scale, and a collision estimator.

Both paths produce a :class:`SweepResult` of log-counts against scale. The
scale is picked where the smoothed second derivative of that curve first
drops below a threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import _accel
from .entropy import check_distribution, support
from .exceptions import ValidationError
from .kernels import KernelSpec, _as_points, build_gram


@dataclass(frozen=True)
class SweepResult:
    scales: np.ndarray
    values: np.ndarray
    smoothed_second_deriv: np.ndarray | None = None
    selected_index: int | None = None

    def __post_init__(self):
        if len(self.scales) != len(self.values):
            raise ValidationError("scales and values differ in length")
        if np.any(np.diff(self.scales) <= 0):
            raise ValidationError("scales must be strictly increasing")

    @property
    def selected_scale(self):
        return None if self.selected_index is None else float(self.scales[self.selected_index])

    @property
    def estimate(self):
        """exp(value) at the selected scale: an effective count."""
        return None if self.selected_index is None else math.exp(self.values[self.selected_index])


def scale_grid(lo=0.1, hi=25.0, count=100, points=None):
    """Evenly spaced scales; with ``points``, multiplied by the data diameter."""
    grid = np.linspace(lo, hi, count)
    if points is not None:
        pts = _as_points(points)
        grid = grid * float(np.max(pts.max(0) - pts.min(0)))
    return grid


def diversity_sweep(points, weights=None, scales=None, family="rbf_sq"):
    """H_1 of the (weighted) sample at each kernel bandwidth in ``scales``."""
    pts = _as_points(points)
    n = pts.shape[0]
    w = np.full(n, 1.0 / n) if weights is None else check_distribution(weights, n, "weights")
    scales = scale_grid() if scales is None else np.asarray(scales, dtype=float)
    if len(scales) < 3:
        raise ValidationError("a sweep needs at least 3 scales")
    s = support(w)
    if family == "rbf_sq":
        profiles = _accel.rbf_profile_sweep(pts, w, scales)
    else:
        profiles = np.stack([build_gram(pts, KernelSpec(family, sigma)).K @ w for sigma in scales])
    values = -(np.log(profiles[:, s]) @ w[s])
    return SweepResult(scales, values)


def savgol_smooth(y, window=11, degree=3):
    """Local least-squares polynomial smoothing.

    Near the edges the window shrinks symmetrically around each point (the
    polynomial degree drops with it). A window containing a non-finite value
    yields NaN.
    """
    if window % 2 == 0 or window <= degree:
        raise ValidationError("window must be odd and larger than the degree")
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    half = window // 2
    out = np.empty(n)
    coeffs = {}
    for i in range(n):
        h = min(half, i, n - 1 - i)
        seg = y[i - h : i + h + 1]
        if not np.all(np.isfinite(seg)):
            out[i] = np.nan
            continue
        if h not in coeffs:
            deg = min(degree, 2 * h)
            x = np.arange(-h, h + 1, dtype=float)
            V = np.vander(x, deg + 1, increasing=True)
            # row 0 of the pseudo-inverse evaluates the fitted polynomial at 0
            coeffs[h] = np.linalg.pinv(V)[0]
        out[i] = coeffs[h] @ seg
    return out


def second_derivative(values, scales):
    """Second difference of ``values`` against (uniform) ``scales``; ends copy their neighbour."""
    values = np.asarray(values, dtype=float)
    h = np.diff(scales).mean()
    with np.errstate(invalid="ignore"):
        inner = (values[2:] - 2.0 * values[1:-1] + values[:-2]) / (h * h)
    return np.concatenate([inner[:1], inner, inner[-1:]])


def curvature_select(sweep: SweepResult, window=11, degree=3, threshold=0.01) -> SweepResult:
    """Pick the first scale where the smoothed |second derivative| falls below ``threshold``."""
    if window % 2 == 0 or window <= degree:
        raise ValidationError("window must be odd and larger than the degree")
    if len(sweep.scales) < window:
        raise ValidationError(f"need at least {window} scales, got {len(sweep.scales)}")
    d2 = savgol_smooth(second_derivative(sweep.values, sweep.scales), window, degree)
    with np.errstate(invalid="ignore"):
        hits = np.flatnonzero(np.abs(d2) < threshold)
    selected = int(hits[0]) if hits.size else None
    return replace(sweep, smoothed_second_deriv=d2, selected_index=selected)


def _check_eps(eps):
    eps = np.atleast_1d(np.asarray(eps, dtype=float))
    if np.any(~(eps > 0)):
        raise ValidationError("collision threshold must be positive")
    return eps


def _estimates(m, counts):
    # counts are unordered pairs; m(m-1)/c expects ordered ones
    with np.errstate(divide="ignore"):
        return np.where(counts > 0, m * (m - 1) / (2.0 * np.maximum(counts, 1)), np.inf)


def birthday_estimate(points, eps, norm_order=2.0):
    """Support-size estimate m(m-1)/c from ordered collision pairs at distance < eps.

    Returns ``inf`` when nothing collides.
    """
    pts = _as_points(points)
    if pts.shape[0] < 2:
        raise ValidationError("need at least two samples")
    eps = _check_eps(eps)
    if eps.size != 1:
        raise ValidationError("birthday_estimate takes a single threshold; use birthday_sweep")
    counts = _accel.collision_counts(pts, eps, norm_order)
    return float(_estimates(pts.shape[0], counts)[0])


def birthday_sweep(points, epsilons=None, norm_order=2.0):
    """log of the collision estimate at each threshold (``inf`` where nothing collides)."""
    pts = _as_points(points)
    if pts.shape[0] < 2:
        raise ValidationError("need at least two samples")
    eps = _check_eps(scale_grid() if epsilons is None else epsilons)
    counts = _accel.collision_counts(pts, eps, norm_order)
    return SweepResult(eps, np.log(_estimates(pts.shape[0], counts)))

"""Similarity kernels, Gram matrices and separable grid convolution."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _accel
from .exceptions import DegenerateGradientWarning, ValidationError

FAMILIES = {"rbf_sq": _accel.RBF_SQ, "exp_metric": _accel.EXP_METRIC, "polynomial": _accel.POLYNOMIAL}

_EXPLICIT_TOL = 1e-12


@dataclass(frozen=True)
class KernelSpec:
    """A similarity function on R^d with unit self-similarity.

    * ``rbf_sq``:      exp(-||x - y||_2^2 / (2 sigma^2))
    * ``exp_metric``:  exp(-||x - y||_p / sigma), with ``norm_order`` p >= 1
    * ``polynomial``:  1 / (1 + (||x - y||_2 / sigma)^s), with ``exponent`` s

    ``sigma`` defaults to 1, which gives the plain polynomial kernel.
    """

    family: str = "rbf_sq"
    sigma: float = 1.0
    exponent: float = 1.5
    norm_order: float = 2.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValidationError(f"unknown kernel family {self.family!r}; expected one of {sorted(FAMILIES)}")
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValidationError(f"bandwidth must be positive, got {self.sigma}")
        if not (np.isfinite(self.exponent) and self.exponent > 0):
            raise ValidationError(f"exponent must be positive, got {self.exponent}")
        if not self.norm_order >= 1:
            raise ValidationError(f"norm order must be >= 1, got {self.norm_order}")

    @property
    def code(self):
        return FAMILIES[self.family]

    @property
    def smooth(self):
        return self.family == "rbf_sq"

    def __call__(self, x, y):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = np.atleast_2d(np.asarray(y, dtype=float))
        return float(_pairwise(x, y, self)[0, 0])


@dataclass(frozen=True, eq=False)
class SimilaritySpace:
    """Gram matrix over a finite support: symmetric, unit diagonal, entries in [0, 1]."""

    K: np.ndarray
    provenance: str = "explicit"
    points: np.ndarray | None = field(default=None, repr=False)
    spec: KernelSpec | None = None

    def __post_init__(self):
        self.K.setflags(write=False)

    @property
    def n(self):
        return self.K.shape[0]

    @classmethod
    def explicit(cls, K):
        """Validate a user-supplied Gram matrix."""
        K = np.array(K, dtype=float)
        if K.ndim != 2 or K.shape[0] != K.shape[1] or K.shape[0] < 1:
            raise ValidationError(f"Gram matrix must be square and non-empty, got shape {K.shape}")
        if not np.all(np.isfinite(K)):
            raise ValidationError("Gram matrix has non-finite entries")
        if np.max(np.abs(K - K.T)) > _EXPLICIT_TOL:
            raise ValidationError("Gram matrix is not symmetric")
        if np.max(np.abs(np.diag(K) - 1.0)) > _EXPLICIT_TOL:
            raise ValidationError("Gram matrix diagonal must be 1")
        if K.min() < -_EXPLICIT_TOL or K.max() > 1.0 + _EXPLICIT_TOL:
            raise ValidationError("Gram entries must lie in [0, 1]")
        K = np.clip((K + K.T) / 2.0, 0.0, 1.0)
        np.fill_diagonal(K, 1.0)
        return cls(K, "explicit")

    def __array__(self, dtype=None, copy=None):
        return self.K if dtype is None else self.K.astype(dtype)


@dataclass(frozen=True, eq=False)
class BlockGram:
    """The Gram matrix of supp(P) u supp(Q), kept as three blocks (K_yx = K_xy.T)."""

    K_xx: np.ndarray
    K_xy: np.ndarray
    K_yy: np.ndarray

    def __post_init__(self):
        n, m = self.K_xy.shape
        if self.K_xx.shape != (n, n) or self.K_yy.shape != (m, m):
            raise ValidationError(
                f"inconsistent block shapes {self.K_xx.shape}, {self.K_xy.shape}, {self.K_yy.shape}"
            )

    @property
    def K_yx(self):
        return self.K_xy.T

    def swapped(self):
        return BlockGram(self.K_yy, self.K_xy.T, self.K_xx)

    @classmethod
    def shared(cls, K):
        """Blocks for two distributions on the same support."""
        K = as_gram(K)
        return cls(K, K, K)


def as_gram(K):
    """Return the raw matrix of a SimilaritySpace or array-like."""
    if isinstance(K, SimilaritySpace):
        return K.K
    return np.asarray(K, dtype=float)


def _as_points(points, name="points"):
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
        raise ValidationError(f"{name} must be an n x d array with n, d >= 1, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValidationError(f"{name} contain non-finite coordinates")
    return pts


def _pairwise(a, b, spec):
    K = _accel.pairwise_kernel(a, b, spec.code, spec.sigma, spec.norm_order, spec.exponent)
    return np.clip(K, 0.0, 1.0, out=K)


def build_gram(points, spec=KernelSpec()):
    """Gram matrix of ``spec`` over the rows of ``points``.

    Duplicate points give identical rows; the result is symmetrised and its
    diagonal set to exactly one.
    """
    pts = _as_points(points)
    K = _pairwise(pts, pts, spec)
    K = (K + K.T) / 2.0
    np.fill_diagonal(K, 1.0)
    return SimilaritySpace(K, "from_points", pts, spec)


def build_block_gram(x, y, spec=KernelSpec()):
    x = _as_points(x, "x")
    y = _as_points(y, "y")
    if x.shape[1] != y.shape[1]:
        raise ValidationError(f"dimension mismatch: x is {x.shape[1]}-d, y is {y.shape[1]}-d")
    return BlockGram(build_gram(x, spec).K, _pairwise(x, y, spec), build_gram(y, spec).K)


def kernel_grad_x(x, y, spec=KernelSpec()):
    """Analytic gradient of kappa(x, y) with respect to x.

    For the nonsmooth families at x == y the zero subgradient is returned and a
    :class:`DegenerateGradientWarning` is emitted.
    """
    x = np.asarray(x, dtype=float).reshape(1, -1)
    y = np.asarray(y, dtype=float).reshape(1, -1)
    if x.shape != y.shape:
        raise ValidationError("x and y must have the same dimension")
    g, degenerate = _accel.grad_contract(
        x, y, np.ones((1, 1)), spec.code, spec.sigma, spec.norm_order, spec.exponent
    )
    if degenerate:
        warnings.warn(
            f"{spec.family} kernel differentiated at coincident points", DegenerateGradientWarning, stacklevel=2
        )
    return g[0]


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------


def pixel_coordinates(d):
    """Pixel centres of a d x d grid, normalised to the unit square (row, col)."""
    axis = np.linspace(0.0, 1.0, d) if d > 1 else np.zeros(1)
    r, c = np.meshgrid(axis, axis, indexing="ij")
    return np.column_stack([r.ravel(), c.ravel()])


def gaussian_factor(d, sigma):
    """1-D rbf_sq Gram over normalised pixel coordinates; K_grid = G kron G."""
    axis = np.linspace(0.0, 1.0, d) if d > 1 else np.zeros(1)
    diff = axis[:, None] - axis[None, :]
    return np.exp(-(diff * diff) / (2.0 * sigma * sigma))


def _check_grid(image, sigma):
    img = np.asarray(image, dtype=float)
    if img.ndim != 2 or img.shape[0] != img.shape[1]:
        raise ValidationError(f"grid must be square, got shape {img.shape}")
    if not (np.isfinite(sigma) and sigma > 0):
        raise ValidationError(f"bandwidth must be positive, got {sigma}")
    return img


def conv_apply(image, sigma, factor=None):
    """Apply the pixel-grid rbf_sq Gram to ``image`` in O(d^3).

    Two 1-D passes: columns are mixed by ``G @ P``, then rows by ``(.) @ G``.
    Pass a precomputed ``factor`` to skip rebuilding ``G``.
    """
    img = _check_grid(image, sigma)
    G = gaussian_factor(img.shape[0], sigma) if factor is None else factor
    return (G @ img) @ G


def dense_apply(image, sigma, chunk=4096):
    """Reference O(d^4) path: the full (d^2 x d^2) Gram applied to the flattened grid.

    Gram rows are materialised in blocks of at most ``chunk`` rows. The entry
    for pixels (i, j), (k, l) is G[i, k] * G[j, l] with G the 1-D factor, so a
    block of rows is a Kronecker product and no exponentials are re-evaluated.
    """
    img = _check_grid(image, sigma)
    d = img.shape[0]
    G = gaussian_factor(d, sigma)
    flat = img.ravel()
    rows = max(1, chunk // d)
    out = np.empty(d * d)
    for lo in range(0, d, rows):
        hi = min(d, lo + rows)
        out[lo * d : hi * d] = np.kron(G[lo:hi], G) @ flat
    return out.reshape(d, d)


def normalize_grid(image):
    """Scale a non-negative intensity grid to total mass one (a GridMeasure)."""
    img = _check_grid(image, 1.0)
    if img.min() < 0:
        raise ValidationError("grid intensities must be non-negative")
    total = img.sum()
    if total <= 0:
        raise ValidationError("grid has zero total mass")
    return img / total

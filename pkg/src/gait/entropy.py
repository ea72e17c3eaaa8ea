"""Similarity-sensitive entropy of distributions on a finite similarity space."""

import math

import numpy as np
from scipy.special import logsumexp

from .exceptions import BoundaryError, ValidationError
from .kernels import as_gram

SUPPORT_TOL = 1e-15
SIMPLEX_TOL = 1e-12


def check_distribution(p, n=None, name="p"):
    p = np.asarray(p, dtype=float)
    if p.ndim != 1:
        raise ValidationError(f"{name} must be a vector, got shape {p.shape}")
    if n is not None and p.shape[0] != n:
        raise ValidationError(f"dimension mismatch: {name} has {p.shape[0]} entries, space has {n}")
    if not np.all(np.isfinite(p)) or p.min() < 0:
        raise ValidationError(f"{name} must be finite and non-negative")
    if abs(p.sum() - 1.0) > SIMPLEX_TOL:
        raise ValidationError(f"{name} must sum to 1 (got {p.sum():.17g})")
    return p


def _check_interior(p, name="p"):
    if p.min() <= 0:
        raise BoundaryError(f"{name} must lie in the interior of the simplex")


def support(p):
    return np.asarray(p) > SUPPORT_TOL


def _parse_order(alpha):
    if isinstance(alpha, str):
        if alpha.lower() in ("inf", "infinity", "∞"):
            return math.inf
        try:
            alpha = float(alpha)
        except ValueError:
            raise ValidationError(f"entropy order must be a number or 'inf', got {alpha!r}") from None
    alpha = float(alpha)
    if not alpha >= 0:
        raise ValidationError(f"entropy order must be >= 0, got {alpha}")
    return alpha


def similarity_profile(K, p):
    """Kp: expected similarity of each point to a P-distributed draw."""
    K = as_gram(K)
    p = check_distribution(p, K.shape[0])
    return K @ p


def power_mean(w, x, beta):
    """Weighted power mean of order ``beta`` of ``x`` under weights ``w``.

    Orders 0 and +/-inf are the geometric mean and max/min over supp(w).
    """
    w = check_distribution(w, name="w")
    x = np.asarray(x, dtype=float)
    if x.shape != w.shape:
        raise ValidationError("weights and values must have the same length")
    s = support(w)
    ws, xs = w[s], x[s]
    if xs.min() <= 0:
        raise ValidationError("power mean needs positive values on the support of w")
    if beta == math.inf:
        return float(xs.max())
    if beta == -math.inf:
        return float(xs.min())
    logs = np.log(xs)
    if beta == 0:
        return float(np.exp(ws @ logs))
    return float(np.exp(logsumexp(beta * logs, b=ws) / beta))


def _entropy_from_profile(p, Kp, alpha):
    s = support(p)
    ps, lk = p[s], np.log(Kp[s])
    if alpha == 1.0:
        return float(-(ps @ lk))
    if alpha == math.inf:
        return float(-lk.max())
    # log M_{p, 1 - alpha}(1 / Kp), evaluated in log space
    beta = 1.0 - alpha
    return float(logsumexp(-beta * lk, b=ps) / beta)


def gait_entropy(K, p, alpha=1.0):
    """GAIT entropy of order ``alpha`` (a float >= 0 or ``inf``).

    Reduces to Renyi entropy when K is the identity; order 1 uses the closed
    form -<p, log Kp>. Sums run over supp(p) only.
    """
    K = as_gram(K)
    p = check_distribution(p, K.shape[0])
    return _entropy_from_profile(p, K @ p, _parse_order(alpha))


def diversity(K, p, alpha=1.0):
    """Effective number of points, exp(H)."""
    return math.exp(gait_entropy(K, p, alpha))


def entropy_grad(K, p):
    """Gradient of H_1 in p: -log(Kp) - K (p / Kp). Needs p in the simplex interior."""
    K = as_gram(K)
    p = check_distribution(p, K.shape[0])
    _check_interior(p)
    Kp = K @ p
    return -np.log(Kp) - K.T @ (p / Kp)


def neg_entropy_hessian(K, p):
    r"""Hessian of -H_1 at an interior p.

    .. math::

        K\,\mathrm{diag}(1/Kp) + \mathrm{diag}(1/Kp)\,K - K\,\mathrm{diag}(p/(Kp)^2)\,K

    The middle term carries a trailing K; without it the matrix does not match
    second differences of H_1.
    """
    K = as_gram(K)
    p = check_distribution(p, K.shape[0])
    _check_interior(p)
    inv = 1.0 / (K @ p)
    Hm = K * inv[None, :] + inv[:, None] * K - (K * (p * inv * inv)[None, :]) @ K
    return (Hm + Hm.T) / 2.0

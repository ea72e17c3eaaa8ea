"""Hot pairwise kernels, with a numba path and a pure-numpy fallback.

The numba path is used when numba imports cleanly and ``GAIT_DISABLE_NUMBA``
is unset (or ``0``). Both implementations are always importable so they can be
cross-checked and benchmarked against each other.

Kernel families are passed as integer codes so the jitted loops stay
monomorphic: 0 = rbf_sq, 1 = exp_metric, 2 = polynomial.
"""

import os

import numpy as np
from scipy.spatial.distance import pdist

RBF_SQ, EXP_METRIC, POLYNOMIAL = 0, 1, 2

_CHUNK_ELEMS = 1 << 22

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in CI
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("GAIT_DISABLE_NUMBA", "0") in ("", "0")


def set_threads(n):
    """Set the numba worker count; a no-op on the numpy path."""
    if HAVE_NUMBA:
        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))


# ---------------------------------------------------------------------------
# numpy implementations
# ---------------------------------------------------------------------------


def _norms_np(diff, norm_order):
    if norm_order == 2.0:
        return np.sqrt(np.einsum("...k,...k->...", diff, diff))
    if norm_order == 1.0:
        return np.abs(diff).sum(-1)
    return (np.abs(diff) ** norm_order).sum(-1) ** (1.0 / norm_order)


def _kernel_from_diff_np(diff, family, sigma, norm_order, exponent):
    if family == RBF_SQ:
        sq = np.einsum("...k,...k->...", diff, diff)
        return np.exp(-sq / (2.0 * sigma * sigma))
    if family == EXP_METRIC:
        return np.exp(-_norms_np(diff, norm_order) / sigma)
    r = _norms_np(diff, 2.0) / sigma
    return 1.0 / (1.0 + r**exponent)


def _row_chunk(m, d):
    return max(1, _CHUNK_ELEMS // max(1, m * d))


def pairwise_kernel_np(a, b, family, sigma, norm_order, exponent):
    n, d = a.shape
    m = b.shape[0]
    out = np.empty((n, m))
    step = _row_chunk(m, d)
    for lo in range(0, n, step):
        diff = a[lo : lo + step, None, :] - b[None, :, :]
        out[lo : lo + step] = _kernel_from_diff_np(diff, family, sigma, norm_order, exponent)
    return out


def _grad1_from_diff_np(diff, family, sigma, norm_order, exponent):
    """Gradient of k(a, b) in a, for every pair; also returns a zero-distance mask."""
    if family == RBF_SQ:
        sq = np.einsum("...k,...k->...", diff, diff)
        k = np.exp(-sq / (2.0 * sigma * sigma))
        return -(k / (sigma * sigma))[..., None] * diff, np.zeros(sq.shape, dtype=bool)
    if family == EXP_METRIC:
        r = _norms_np(diff, norm_order)
        zero = r == 0.0
        safe = np.where(zero, 1.0, r)
        k = np.exp(-r / sigma)
        if norm_order == 1.0:
            dr = np.sign(diff)
        else:
            dr = np.sign(diff) * np.abs(diff) ** (norm_order - 1.0)
            dr = dr / (safe ** (norm_order - 1.0))[..., None]
        g = -(k / sigma)[..., None] * dr
        g[zero] = 0.0
        return g, zero
    r = _norms_np(diff, 2.0)
    zero = r == 0.0
    safe = np.where(zero, 1.0, r)
    rs = safe / sigma
    k = 1.0 / (1.0 + rs**exponent)
    coef = -exponent * rs ** (exponent - 1.0) * k * k / (sigma * safe)
    coef = np.where(zero, 0.0, coef)
    return coef[..., None] * diff, zero


def grad_contract_np(a, b, w, family, sigma, norm_order, exponent, same):
    """Return G with G[s] = sum_j w[s, j] * grad_a k(a[s], b[j]) and a degenerate count.

    With ``same`` set, ``a`` and ``b`` are the same atom set and the diagonal
    (self-similarity, identically 1) is skipped.
    """
    n, d = a.shape
    m = b.shape[0]
    out = np.empty((n, d))
    degenerate = 0
    step = _row_chunk(m, d)
    for lo in range(0, n, step):
        hi = min(n, lo + step)
        diff = a[lo:hi, None, :] - b[None, :, :]
        g, zero = _grad1_from_diff_np(diff, family, sigma, norm_order, exponent)
        wc = w[lo:hi]
        if same:
            rows = np.arange(lo, hi)
            zero[rows - lo, rows] = False
            g[rows - lo, rows] = 0.0
        if family != RBF_SQ:
            degenerate += int(np.count_nonzero(zero & (wc != 0.0)))
        out[lo:hi] = np.einsum("sj,sjk->sk", wc, g)
    return out, degenerate


def collision_counts_np(points, thresholds, norm_order):
    """Unordered pairs at distance strictly below each (ascending) threshold."""
    if points.shape[0] < 2:
        return np.zeros(len(thresholds), dtype=np.int64)
    dist = pdist(points, metric="minkowski", p=norm_order)
    dist.sort()
    return np.searchsorted(dist, thresholds, side="left").astype(np.int64)


def rbf_profile_sweep_np(points, weights, sigmas):
    """Rows of K_sigma @ weights for each rbf_sq bandwidth in ``sigmas``."""
    n, d = points.shape
    out = np.empty((len(sigmas), n))
    step = _row_chunk(n, d)
    for lo in range(0, n, step):
        diff = points[lo : lo + step, None, :] - points[None, :, :]
        sq = np.einsum("...k,...k->...", diff, diff)
        for s, sigma in enumerate(sigmas):
            out[s, lo : lo + step] = np.exp(-sq / (2.0 * sigma * sigma)) @ weights
    return out


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if HAVE_NUMBA:
    # the system TBB is often too old for numba; prefer layers that always work
    if not os.environ.get("NUMBA_THREADING_LAYER"):
        numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
    _jit = numba.njit(cache=True, nogil=True, fastmath=False)
    # rows are split across threads; every float sum stays inside one row, so
    # results do not depend on the thread count
    _pjit = numba.njit(cache=True, nogil=True, fastmath=False, parallel=True)

    @_jit
    def _norm_nb(a, b, norm_order):
        acc = 0.0
        if norm_order == 2.0:
            for k in range(a.shape[0]):
                t = a[k] - b[k]
                acc += t * t
            return np.sqrt(acc)
        if norm_order == 1.0:
            for k in range(a.shape[0]):
                acc += abs(a[k] - b[k])
            return acc
        for k in range(a.shape[0]):
            acc += abs(a[k] - b[k]) ** norm_order
        return acc ** (1.0 / norm_order)

    @_jit
    def _kval_nb(a, b, family, sigma, norm_order, exponent):
        if family == 0:
            acc = 0.0
            for k in range(a.shape[0]):
                t = a[k] - b[k]
                acc += t * t
            return np.exp(-acc / (2.0 * sigma * sigma))
        if family == 1:
            return np.exp(-_norm_nb(a, b, norm_order) / sigma)
        r = _norm_nb(a, b, 2.0) / sigma
        return 1.0 / (1.0 + r**exponent)

    @_pjit
    def pairwise_kernel_nb(a, b, family, sigma, norm_order, exponent):
        n = a.shape[0]
        m = b.shape[0]
        out = np.empty((n, m))
        for i in numba.prange(n):
            for j in range(m):
                out[i, j] = _kval_nb(a[i], b[j], family, sigma, norm_order, exponent)
        return out

    @_pjit
    def grad_contract_nb(a, b, w, family, sigma, norm_order, exponent, same):
        n, d = a.shape
        m = b.shape[0]
        out = np.zeros((n, d))
        degenerate = 0
        for s in numba.prange(n):
            for j in range(m):
                if same and s == j:
                    continue
                ws = w[s, j]
                if family == 0:
                    acc = 0.0
                    for k in range(d):
                        t = a[s, k] - b[j, k]
                        acc += t * t
                    c = -ws * np.exp(-acc / (2.0 * sigma * sigma)) / (sigma * sigma)
                    for k in range(d):
                        out[s, k] += c * (a[s, k] - b[j, k])
                elif family == 1:
                    r = _norm_nb(a[s], b[j], norm_order)
                    if r == 0.0:
                        if ws != 0.0:
                            degenerate += 1
                        continue
                    c = -ws * np.exp(-r / sigma) / sigma
                    for k in range(d):
                        t = a[s, k] - b[j, k]
                        if norm_order == 1.0:
                            dr = np.sign(t)
                        else:
                            dr = np.sign(t) * abs(t) ** (norm_order - 1.0) / r ** (norm_order - 1.0)
                        out[s, k] += c * dr
                else:
                    r = _norm_nb(a[s], b[j], 2.0)
                    if r == 0.0:
                        if ws != 0.0:
                            degenerate += 1
                        continue
                    rs = r / sigma
                    kv = 1.0 / (1.0 + rs**exponent)
                    c = -ws * exponent * rs ** (exponent - 1.0) * kv * kv / (sigma * r)
                    for k in range(d):
                        out[s, k] += c * (a[s, k] - b[j, k])
        return out, degenerate

    @_jit
    def collision_counts_nb(points, thresholds, norm_order):
        n = points.shape[0]
        t = thresholds.shape[0]
        hist = np.zeros(t + 1, dtype=np.int64)
        for i in range(n):
            for j in range(i + 1, n):
                dist = _norm_nb(points[i], points[j], norm_order)
                # binary search for the first threshold strictly greater than dist
                lo, hi = 0, t
                while lo < hi:
                    mid = (lo + hi) >> 1
                    if thresholds[mid] <= dist:
                        lo = mid + 1
                    else:
                        hi = mid
                hist[lo] += 1
        return np.cumsum(hist)[:t]

    @_pjit
    def rbf_profile_sweep_nb(points, weights, sigmas):
        n, d = points.shape
        ns = sigmas.shape[0]
        out = np.zeros((ns, n))
        inv = np.empty(ns)
        for s in range(ns):
            inv[s] = 1.0 / (2.0 * sigmas[s] * sigmas[s])
        for i in numba.prange(n):
            for j in range(n):
                acc = 0.0
                for k in range(d):
                    t = points[i, k] - points[j, k]
                    acc += t * t
                wj = weights[j]
                for s in range(ns):
                    out[s, i] += np.exp(-acc * inv[s]) * wj
        return out


def _f64(x):
    return np.ascontiguousarray(x, dtype=np.float64)


def pairwise_kernel(a, b, family, sigma, norm_order=2.0, exponent=1.5):
    a, b = _f64(a), _f64(b)
    if USE_NUMBA:
        return pairwise_kernel_nb(a, b, family, float(sigma), float(norm_order), float(exponent))
    return pairwise_kernel_np(a, b, family, float(sigma), float(norm_order), float(exponent))


def grad_contract(a, b, w, family, sigma, norm_order=2.0, exponent=1.5, same=False):
    a, b, w = _f64(a), _f64(b), _f64(w)
    if USE_NUMBA:
        return grad_contract_nb(a, b, w, family, float(sigma), float(norm_order), float(exponent), bool(same))
    return grad_contract_np(a, b, w, family, float(sigma), float(norm_order), float(exponent), bool(same))


def collision_counts(points, thresholds, norm_order=2.0):
    points, thresholds = _f64(points), _f64(thresholds)
    if USE_NUMBA:
        return collision_counts_nb(points, thresholds, float(norm_order))
    return collision_counts_np(points, thresholds, float(norm_order))


def rbf_profile_sweep(points, weights, sigmas):
    points, weights, sigmas = _f64(points), _f64(weights), _f64(sigmas)
    if USE_NUMBA:
        return rbf_profile_sweep_nb(points, weights, sigmas)
    return rbf_profile_sweep_np(points, weights, sigmas)

"""Randomised checks of concavity of H_1 and non-negativity of the divergence.

Every trial draws from its own generator seeded by ``(seed, trial)``, so a
recorded counterexample can be regenerated from two integers, and can also be
replayed directly from the K, p, q it stores.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.linalg import null_space

from .divergence import gait_divergence_empirical
from .entropy import _entropy_from_profile, entropy_grad, neg_entropy_hessian
from .exceptions import InfiniteDivergence, ValidationError
from .kernels import BlockGram, KernelSpec, build_block_gram, build_gram

DIVERGENCE_FLOOR = -1e-9
EIGEN_FLOOR = -1e-8
SEGMENT_CEIL = 1e-10

# first bin catches anything below DIVERGENCE_FLOOR
HIST_EDGES = np.concatenate([[-np.inf, DIVERGENCE_FLOOR], np.linspace(0.0, 2.0, 41)[1:], [np.inf]])


@dataclass(frozen=True)
class SearchConfig:
    trials: int = 1000
    seed: int = 0
    n_min: int = 2
    n_max: int = 11
    d_max: int = 5
    norm_order_max: float = 4.0
    out: str | None = None
    # "equal" forces q = p, "ones" forces K = J in every divergence trial
    inject: str | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise ValidationError("trials must be >= 1")
        if not 2 <= self.n_min <= self.n_max:
            raise ValidationError("need 2 <= n_min <= n_max")
        if self.inject not in (None, "equal", "ones"):
            raise ValidationError(f"unknown injection {self.inject!r}")


@dataclass
class CounterexampleRecord:
    check: str
    seed: int
    trial: int
    n: int
    K: list
    p: list
    q: list | None
    value: float
    theta: float | None = None

    def to_json(self):
        return json.dumps(asdict(self))

    @classmethod
    def from_json(cls, line):
        return cls(**json.loads(line))

    def replay(self):
        """Re-run the check on the stored arrays."""
        K, p = np.array(self.K), np.array(self.p)
        if self.check == "divergence":
            return divergence_value(K, p, np.array(self.q))
        if self.check == "hessian":
            return tangent_min_eigenvalue(neg_entropy_hessian(K, p))
        if self.check == "segment":
            return concavity_segment_check(K, p, np.array(self.q), [self.theta])
        raise ValidationError(f"unknown check {self.check!r}")


@dataclass
class SearchSummary:
    check: str
    trials: int
    min_value: float
    max_value: float
    histogram: np.ndarray | None = None
    counterexamples: list = field(default_factory=list)

    @property
    def passed(self):
        return not self.counterexamples


def _trial_rng(seed, trial):
    return np.random.default_rng([seed, trial])


def dirichlet(rng, alpha):
    """Dirichlet draw by normalising independent unit-rate gamma variates."""
    while True:
        g = rng.standard_gamma(alpha)
        total = g.sum()
        if total > 0:
            return g / total


def tangent_basis(n):
    """Orthonormal basis (n x (n-1)) of {v : sum(v) = 0}."""
    return null_space(np.ones((1, n)))


def tangent_min_eigenvalue(H):
    B = tangent_basis(H.shape[0])
    M = B.T @ H @ B
    return float(np.linalg.eigvalsh((M + M.T) / 2.0).min())


def divergence_value(K, p, q):
    try:
        return gait_divergence_empirical(BlockGram.shared(K), p, q).value
    except InfiniteDivergence:
        return math.inf


def draw_divergence_instance(rng, n_min=2, n_max=11):
    """(K, p, q) per the random-search table: K = min(1, I + L L^T / n), L_ij = U^gamma_ij."""
    n = int(rng.integers(n_min, n_max + 1))
    gamma = rng.integers(0, 10, size=(n, n))
    L = rng.uniform(0.0, 1.0, size=(n, n)) ** gamma
    K = np.minimum(1.0, np.eye(n) + L @ L.T / n)
    np.fill_diagonal(K, 1.0)
    p = dirichlet(rng, rng.uniform(0.0, 10.0, n))
    q = dirichlet(rng, rng.uniform(0.0, 10.0, n))
    return K, p, q


def draw_metric_instance(rng, config, norm_order_max=None):
    """Random points under exp(-||x - y||_r) with r ~ U(1, norm_order_max), and an interior p."""
    n = int(rng.integers(config.n_min, config.n_max + 1))
    d = int(rng.integers(1, config.d_max + 1))
    r = rng.uniform(1.0, config.norm_order_max if norm_order_max is None else norm_order_max)
    x = rng.uniform(-1.0, 1.0, size=(n, d)) * rng.uniform(0.1, 3.0)
    K = build_gram(x, KernelSpec("exp_metric", 1.0, norm_order=r)).K
    while True:
        p = dirichlet(rng, rng.uniform(0.1, 10.0, n))
        if p.min() > 0:
            return K, p


def _write_records(path, records):
    if path is None:
        return
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")


def random_search_divergence(config=SearchConfig()):
    values = np.empty(config.trials)
    records = []
    for t in range(config.trials):
        rng = _trial_rng(config.seed, t)
        K, p, q = draw_divergence_instance(rng, config.n_min, config.n_max)
        if config.inject == "equal":
            q = p
        elif config.inject == "ones":
            K = np.ones_like(K)
        v = divergence_value(K, p, q)
        values[t] = v
        if v < DIVERGENCE_FLOOR:
            records.append(CounterexampleRecord("divergence", config.seed, t, len(p), K.tolist(), p.tolist(), q.tolist(), v))
    _write_records(config.out, records)
    hist, _ = np.histogram(values[np.isfinite(values)], bins=HIST_EDGES)
    return SearchSummary("divergence", config.trials, float(values.min()), float(values.max()), hist, records)


def hessian_spectrum_search(config=SearchConfig()):
    mins = np.empty(config.trials)
    records = []
    for t in range(config.trials):
        rng = _trial_rng(config.seed, t)
        K, p = draw_metric_instance(rng, config)
        lam = tangent_min_eigenvalue(neg_entropy_hessian(K, p))
        mins[t] = lam
        if lam < EIGEN_FLOOR:
            records.append(CounterexampleRecord("hessian", config.seed, t, len(p), K.tolist(), p.tolist(), None, lam))
    _write_records(config.out, records)
    return SearchSummary("hessian", config.trials, float(mins.min()), float(mins.max()), None, records)


def concavity_segment_check(K, p, q, thetas):
    """Largest excess of H_1 on the segment q -> p over its tangent line at q.

    Positive values violate concavity.
    """
    K = np.asarray(K, dtype=float)
    g = entropy_grad(K, q)
    hq = _entropy_from_profile(q, K @ q, 1.0)
    slope = float(g @ (p - q))
    worst = -math.inf
    for theta in np.atleast_1d(np.asarray(thetas, dtype=float)):
        r = (1.0 - theta) * q + theta * p
        gap = _entropy_from_profile(r, K @ r, 1.0) - (hq + theta * slope)
        worst = max(worst, gap)
    return float(worst)


def segment_search(config=SearchConfig()):
    """Concavity checks at random (p, q, theta) on positive-definite exp-metric spaces (norm order <= 2)."""
    gaps = np.empty(config.trials)
    records = []
    for t in range(config.trials):
        rng = _trial_rng(config.seed, t)
        K, p = draw_metric_instance(rng, config, norm_order_max=min(2.0, config.norm_order_max))
        q = p
        while np.array_equal(q, p) or q.min() <= 0:
            q = dirichlet(rng, rng.uniform(0.1, 10.0, len(p)))
        theta = float(rng.uniform())
        gap = concavity_segment_check(K, p, q, [theta])
        gaps[t] = gap
        if gap > SEGMENT_CEIL:
            records.append(CounterexampleRecord("segment", config.seed, t, len(p), K.tolist(), p.tolist(), q.tolist(), gap, theta))
    _write_records(config.out, records)
    return SearchSummary("segment", config.trials, float(gaps.min()), float(gaps.max()), None, records)


def parallel_lines_analytic(phi):
    return phi * phi + 1.0 - math.exp(-phi * phi)


def parallel_lines_check(phis=(0.0, 0.25, 0.5, 1.0, 2.0), n_atoms=2000):
    """Discretised D(P_phi || P_0) for uniform measures on {phi} x [0, 1] vs the closed form.

    Uses kappa = exp(-||.||^2), i.e. rbf_sq with 2 sigma^2 = 1, and N midpoint atoms per segment.
    """
    if n_atoms < 100:
        raise ValidationError("need at least 100 atoms per segment")
    t = (np.arange(n_atoms) + 0.5) / n_atoms
    w = np.full(n_atoms, 1.0 / n_atoms)
    spec = KernelSpec("rbf_sq", math.sqrt(0.5))
    y = np.column_stack([np.zeros(n_atoms), t])
    rows = []
    for phi in phis:
        x = np.column_stack([np.full(n_atoms, float(phi)), t])
        numeric = gait_divergence_empirical(build_block_gram(x, y, spec), w, w).value
        analytic = parallel_lines_analytic(float(phi))
        rows.append({"phi": float(phi), "numeric": numeric, "analytic": analytic, "abs_error": abs(numeric - analytic)})
    return rows

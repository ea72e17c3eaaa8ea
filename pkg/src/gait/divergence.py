"""Closed-form GAIT divergence between distributions and empirical measures."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import _accel
from .entropy import check_distribution, support
from .exceptions import DegenerateGradientWarning, InfiniteDivergence, ValidationError
from .kernels import BlockGram, KernelSpec, _as_points, as_gram, build_block_gram


@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    """Weighted atoms sum_i w_i delta_{x_i} in R^d."""

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = _as_points(self.atoms, "atoms")
        weights = check_distribution(self.weights, atoms.shape[0], "weights")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def uniform(cls, atoms):
        atoms = _as_points(atoms, "atoms")
        m = atoms.shape[0]
        return cls(atoms, np.full(m, 1.0 / m))

    @property
    def size(self):
        return self.atoms.shape[0]

    @property
    def dim(self):
        return self.atoms.shape[1]


@dataclass(frozen=True)
class DivergenceReport:
    """value = 1 + term_log - term_ratio, up to rounding.

    The value is accumulated as term_log + <q, 1 - ratio>, which uses sum(q) = 1
    to avoid cancelling 1 against term_ratio and is exactly 0 when P = Q.
    """

    value: float
    term_log: float
    term_ratio: float


def _report(Kxx_p, Kxy_q, Kyx_p, Kyy_q, p, q):
    sp, sq = support(p), support(q)
    b = Kxy_q[sp]
    if np.any(b <= 0):
        raise InfiniteDivergence("P has mass where the similarity profile of Q vanishes")
    term_log = float(p[sp] @ (np.log(Kxx_p[sp]) - np.log(b)))
    ratio = Kyx_p[sq] / Kyy_q[sq]
    term_ratio = float(q[sq] @ ratio)
    return DivergenceReport(term_log + float(q[sq] @ (1.0 - ratio)), term_log, term_ratio)


def gait_divergence_shared(K, p, q):
    """D^K(p || q) for two distributions on the same similarity space.

    Raises :class:`InfiniteDivergence` when Kq vanishes on supp(p), which
    reproduces KL's +inf when K is the identity.
    """
    K = as_gram(K)
    n = K.shape[0]
    p = check_distribution(p, n, "p")
    q = check_distribution(q, n, "q")
    Kp, Kq = K @ p, K @ q
    return _report(Kp, Kq, Kp, Kq, p, q).value


def _check_blocks(blocks, p, q):
    n, m = blocks.K_xy.shape
    return check_distribution(p, n, "p"), check_distribution(q, m, "q")


def gait_divergence_empirical(blocks: BlockGram, p, q) -> DivergenceReport:
    """D(P||Q) for P = sum p_i delta_{x_i}, Q = sum q_j delta_{y_j} from their block Gram."""
    p, q = _check_blocks(blocks, p, q)
    return _report(blocks.K_xx @ p, blocks.K_xy @ q, blocks.K_yx @ p, blocks.K_yy @ q, p, q)


def _profiles(blocks, p, q):
    a = blocks.K_xx @ p
    b = blocks.K_xy @ q
    c = blocks.K_yx @ p
    e = blocks.K_yy @ q
    if np.any(b <= 0) or np.any(a <= 0) or np.any(e <= 0):
        raise InfiniteDivergence("a block similarity profile vanishes; gradient undefined")
    return a, b, c, e


def divergence_grad_weights(blocks: BlockGram, p, q):
    """Unconstrained partial derivatives (dD/dp, dD/dq) of the empirical divergence."""
    p, q = _check_blocks(blocks, p, q)
    a, b, c, e = _profiles(blocks, p, q)
    gp = np.log(a) - np.log(b) + blocks.K_xx.T @ (p / a) - blocks.K_xy @ (q / e)
    gq = -(blocks.K_yx @ (p / b)) - c / e + blocks.K_yy.T @ (q * c / (e * e))
    return gp, gq


def divergence_grad_atoms(x, y, p, q, spec=KernelSpec(), blocks=None):
    """Gradients of D(P||Q) with respect to the atom coordinates of P and Q.

    Pass ``blocks`` if the block Gram for (x, y) is already built.
    """
    x = _as_points(x, "x")
    y = _as_points(y, "y")
    if blocks is None:
        blocks = build_block_gram(x, y, spec)
    p, q = _check_blocks(blocks, p, q)
    a, b, c, e = _profiles(blocks, p, q)
    u = p / a
    v = q * c / (e * e)
    w_xx = np.outer(u, p) + np.outer(p, u)
    w_xy =np.outer(p / b, q) + np.outer(p, q / e)
    w_yy = np.outer(v, q) + np.outer(q, v)
    w_yx = np.outer(q, p / b) + np.outer(q / e, p)
    args = (spec.code, spec.sigma, spec.norm_order, spec.exponent)
    g1, d1 = _accel.grad_contract(x, x, w_xx, *args, same=True)
    g2, d2 = _accel.grad_contract(x, y, w_xy, *args)
    g3, d3 = _accel.grad_contract(y, y, w_yy, *args, same=True)
    g4, d4 = _accel.grad_contract(y, x, w_yx, *args)
    if d1 + d2 + d3 + d4:
        warnings.warn(
            f"{spec.family} kernel differentiated at {d1 + d2 + d3 + d4} coincident atom pairs",
            DegenerateGradientWarning,
            stacklevel=2,
        )
    return g1 - g2, g3 - g4


def forward_backward(blocks: BlockGram, p, q):
    """(D(P||Q), D(Q||P)), the reverse reusing the same blocks with roles swapped."""
    forward = gait_divergence_empirical(blocks, p, q).value
    backward = gait_divergence_empirical(blocks.swapped(), q, p).value
    return forward, backward


def measure_divergence(P: EmpiricalMeasure, Q: EmpiricalMeasure, spec=KernelSpec()) -> DivergenceReport:
    if P.dim != Q.dim:
        raise ValidationError(f"dimension mismatch: {P.dim} vs {Q.dim}")
    return gait_divergence_empirical(build_block_gram(P.atoms, Q.atoms, spec), P.weights, Q.weights)

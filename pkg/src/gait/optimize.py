"""Adaptive-moment gradient engine and the GAIT solvers built on it.

All simplex-valued unknowns are optimised through temperature-scaled softmax
logits, so iterates stay in the interior where the entropy gradient exists.
"""

from __future__ import annotations

import functools
import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import softmax

from .divergence import EmpiricalMeasure, divergence_grad_atoms, divergence_grad_weights, gait_divergence_empirical
from .entropy import _entropy_from_profile
from .exceptions import NumericalFailure, ValidationError
from .kernels import KernelSpec, as_gram, build_block_gram, conv_apply, gaussian_factor, normalize_grid

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class OptimizerConfig:
    step_size: float = 0.1
    decay1: float = 0.9
    decay2: float = 0.999
    epsilon: float = 1e-8
    max_correction: bool = False
    steps: int = 1000
    batch_size: int | None = None
    seed: int = 0
    temperature: float = 1.0
    # early stop once the tangent gradient norm falls below this; None disables
    tol: float | None = None

    def __post_init__(self):
        if not self.step_size > 0:
            raise ValidationError("step_size must be positive")
        if not (0 <= self.decay1 < 1 and 0 <= self.decay2 < 1):
            raise ValidationError("decay rates must lie in [0, 1)")
        if not self.epsilon > 0 or not self.temperature > 0:
            raise ValidationError("epsilon and temperature must be positive")
        if self.steps < 1:
            raise ValidationError("steps must be positive")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValidationError("batch_size must be positive")


@dataclass
class AdamState:
    param: np.ndarray
    m: np.ndarray = None
    v: np.ndarray = None
    v_max: np.ndarray = None
    t: int = 0

    def __post_init__(self):
        self.param = np.array(self.param, dtype=float)
        if self.m is None:
            self.m = np.zeros_like(self.param)
        if self.v is None:
            self.v = np.zeros_like(self.param)
        if self.v_max is None:
            self.v_max = np.zeros_like(self.param)


def adaptive_step(state: AdamState, grad, config: OptimizerConfig) -> AdamState:
    """One Adam update (AMSGrad when ``config.max_correction``). Returns a new state."""
    grad = np.asarray(grad, dtype=float)
    t = state.t + 1
    if not np.all(np.isfinite(grad)):
        raise NumericalFailure(t, "gradient")
    b1, b2 = config.decay1, config.decay2
    m = b1 * state.m + (1.0 - b1) * grad
    v = b2 * state.v + (1.0 - b2) * grad * grad
    v_max = np.maximum(state.v_max, v) if config.max_correction else state.v_max
    m_hat = m / (1.0 - b1**t)
    v_hat = (v_max if config.max_correction else v) / (1.0 - b2**t)
    param = state.param - config.step_size * m_hat / (np.sqrt(v_hat) + config.epsilon)
    return AdamState(param, m, v, v_max, t)


@dataclass
class SimplexParam:
    logits: np.ndarray
    temperature: float = 1.0

    def probs(self):
        return softmax(self.logits / self.temperature)

    def pullback(self, grad_p, p=None):
        """Chain a gradient in p back to the logits."""
        p = self.probs() if p is None else p
        return p * (grad_p - p @ grad_p) / self.temperature


def tangent_norm(grad, p=None):
    """Norm of ``grad`` projected on the simplex tangent space.

    With ``p`` given, returns the norm of the logit-space gradient
    p * (grad - <p, grad>), the stationarity measure of the softmax
    parameterisation. It vanishes once the gradient is constant on the
    support, without a hard cutoff for coordinates that are still decaying.
    """
    grad = np.asarray(grad, dtype=float)
    if p is None:
        return float(np.linalg.norm(grad - grad.mean()))
    p = np.asarray(p, dtype=float)
    return float(np.linalg.norm(p * (grad - p @ grad)))


def _check_finite(value, step):
    if not np.isfinite(value):
        raise NumericalFailure(step)
    return value


# ---------------------------------------------------------------------------
# maximum entropy
# ---------------------------------------------------------------------------


def _quiet(fn):
    """Run a solver with numpy float warnings off; non-finite values raise NumericalFailure instead."""

    @functools.wraps(fn)
    def wrapped(*args, **kwargs):
        with np.errstate(all="ignore"):
            return fn(*args, **kwargs)

    return wrapped


@_quiet
def maxent_solve(space, config=OptimizerConfig(), init_logits=None):
    """Ascend H_1 from a random softmax initialisation.

    Logits start as N(0, 4) draws. Returns the final distribution and the
    per-step entropy trace (value before each update).
    """
    K = as_gram(space)
    n = K.shape[0]
    if n <= 2000:
        try:
            np.linalg.cholesky(K)
        except np.linalg.LinAlgError:
            log.warning("Gram matrix is not positive definite; the maximiser may not be unique")
    rng = np.random.default_rng(config.seed)
    logits = rng.normal(0.0, 2.0, n) if init_logits is None else np.array(init_logits, dtype=float)
    param = SimplexParam(logits, config.temperature)
    state = AdamState(param.logits)
    trace = []
    for step in range(config.steps):
        param.logits = state.param
        p = param.probs()
        Kp = K @ p
        h = _check_finite(_entropy_from_profile(p, Kp, 1.0), step + 1)
        trace.append(h)
        # entropy_grad re-validates p; inline it on the hot path
        g = -np.log(Kp) - K.T @ (p / Kp)
        if config.tol is not None and tangent_norm(g, p) < config.tol:
            break
        state = adaptive_step(state, param.pullback(-g, p), config)
    param.logits = state.param
    return param.probs(), np.array(trace)


# ---------------------------------------------------------------------------
# barycenters on pixel grids
# ---------------------------------------------------------------------------


@_quiet
def barycenter_solve(images, sigma, config=OptimizerConfig(step_size=0.01, steps=500, batch_size=32)):
    """Grid minimising the mean D(P_i || Q) over ``images``.

    Every Kp product goes through the separable convolution. Q starts uniform;
    with ``batch_size`` smaller than the number of images each step uses a
    random minibatch. Returns the barycenter grid and the objective trace.
    """
    if len(images) == 0:
        raise ValidationError("no images given")
    grids = [normalize_grid(img) for img in images]
    shape = grids[0].shape
    if any(g.shape != shape for g in grids):
        raise ValidationError("all images must have the same size")
    d = shape[0]
    G = gaussian_factor(d, sigma)
    P = np.stack(grids)
    KP = np.stack([conv_apply(g, sigma, G) for g in grids])
    # <p, log Kp> restricted to supp(p); constant in Q
    self_terms = np.array([np.sum(np.where(g > 0, g * np.log(np.where(g > 0, kp, 1.0)), 0.0)) for g, kp in zip(P, KP)])
    rng = np.random.default_rng(config.seed)
    param = SimplexParam(np.zeros(d * d), config.temperature)
    state = AdamState(param.logits)
    batch = config.batch_size
    trace = []
    for step in range(config.steps):
        if batch is not None and batch < len(grids):
            idx = rng.choice(len(grids), size=batch, replace=False)
        else:
            idx = np.arange(len(grids))
        param.logits = state.param
        q = param.probs().reshape(d, d)
        Kq = conv_apply(q, sigma, G)
        obj = 0.0
        grad = np.zeros((d, d))
        for i in idx:
            p, kp = P[i], KP[i]
            ratio = kp / Kq
            mask = p > 0
            obj += 1.0 + self_terms[i] - np.sum(p[mask] * np.log(Kq[mask])) - np.sum(q * ratio)
            grad += -conv_apply(p / Kq, sigma, G) - ratio + conv_apply(q * ratio / Kq, sigma, G)
        obj /= len(idx)
        grad /= len(idx)
        trace.append(_check_finite(obj, step + 1))
        state = adaptive_step(state, param.pullback(grad.ravel(), q.ravel()), config)
    param.logits = state.param
    return param.probs().reshape(d, d), np.array(trace)


# ---------------------------------------------------------------------------
# measure approximation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SparsityPenalty:
    """lam * sum_i q_i**rho added to the loss; entries below ``prune_threshold`` dropped at the end."""

    weight: float = 0.01
    exponent: float = 0.75
    prune_threshold: float = 0.01

    def __post_init__(self):
        if self.weight < 0 or not (0 < self.exponent <= 1) or self.prune_threshold < 0:
            raise ValidationError("invalid sparsity penalty parameters")

    def __call__(self, q):
        return self.weight * float(np.sum(q**self.exponent))

    def grad(self, q):
        return self.weight * self.exponent * q ** (self.exponent - 1.0)

    def prune(self, q):
        q = np.where(q < self.prune_threshold, 0.0, q)
        total = q.sum()
        if total <= 0:
            raise ValidationError("pruning removed every atom; lower prune_threshold")
        return q / total


Sampler = Callable[[np.random.Generator, int], np.ndarray]


def minibatch_sample(source, k, seed=0):
    """k i.i.d. draws with uniform weights 1/k, from weighted atoms or a sampler.

    ``source`` is an :class:`EmpiricalMeasure` or a callable ``(rng, k) -> k x d``;
    ``seed`` is an int or a ``numpy.random.Generator``.
    """
    if k < 1:
        raise ValidationError("sample size must be at least 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if isinstance(source, EmpiricalMeasure):
        idx = rng.choice(source.size, size=k, replace=True, p=source.weights)
        atoms = source.atoms[idx]
    else:
        atoms = np.asarray(source(rng, k), dtype=float)
        if atoms.ndim == 1:
            atoms = atoms[:, None]
    return EmpiricalMeasure(atoms, np.full(k, 1.0 / k))


_MODES = ("locations", "weights", "both")


@_quiet
def approximate_measure(
    target,
    init: EmpiricalMeasure,
    spec=KernelSpec(),
    what="locations",
    penalty: SparsityPenalty | None = None,
    config=OptimizerConfig(),
):
    """Minimise D(P || Q) (+ sparsity penalty) over Q's locations and/or weights.

    ``target`` is an :class:`EmpiricalMeasure` or a sampler; a sampler needs
    ``config.batch_size``. Returns the fitted measure and the objective trace.
    """
    if what not in _MODES:
        raise ValidationError(f"what must be one of {_MODES}, got {what!r}")
    if penalty is not None and what == "locations":
        raise ValidationError("a sparsity penalty needs the weights to be optimised")
    is_measure = isinstance(target, EmpiricalMeasure)
    if not is_measure and config.batch_size is None:
        raise ValidationError("sampling a continuous target requires batch_size")
    if is_measure and target.dim != init.dim:
        raise ValidationError("target and initial measure live in different dimensions")
    rng = np.random.default_rng(config.seed)
    loc_state = AdamState(init.atoms) if what != "weights" else None
    w_param = SimplexParam(np.log(init.weights), config.temperature) if what != "locations" else None
    w_state = AdamState(w_param.logits) if w_param is not None else None
    # with fixed atoms and a fixed target the Gram blocks never change
    fixed_blocks = build_block_gram(target.atoms, init.atoms, spec) if what == "weights" and config.batch_size is None else None
    trace = []
    for step in range(config.steps):
        if config.batch_size is not None:
            P = minibatch_sample(target, config.batch_size, rng)
        else:
            P = target
        y = loc_state.param if loc_state is not None else init.atoms
        if w_param is not None:
            w_param.logits = w_state.param
            q = w_param.probs()
        else:
            q = init.weights
        blocks = fixed_blocks if fixed_blocks is not None else build_block_gram(P.atoms, y, spec)
        obj = gait_divergence_empirical(blocks, P.weights, q).value
        if penalty is not None:
            obj += penalty(q)
        trace.append(_check_finite(obj, step + 1))
        if loc_state is not None:
            _, gy = divergence_grad_atoms(P.atoms, y, P.weights, q, spec, blocks)
            loc_state = adaptive_step(loc_state, gy, config)
        if w_state is not None:
            _, gq = divergence_grad_weights(blocks, P.weights, q)
            if penalty is not None:
                gq = gq + penalty.grad(q)
            w_state = adaptive_step(w_state, w_param.pullback(gq, q), config)
    atoms = loc_state.param if loc_state is not None else init.atoms
    if w_param is not None:
        w_param.logits = w_state.param
        weights = w_param.probs()
    else:
        weights = init.weights
    if penalty is not None:
        weights = penalty.prune(weights)
    return EmpiricalMeasure(atoms, weights), np.array(trace)

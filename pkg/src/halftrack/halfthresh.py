"""Half thresholding: the closed-form L1/2 shrinkage map and the K-sparse
support-selection iteration built on it.

For a scalar ``x`` and weight ``lambda_mu >= 0`` the operator returns the
global minimizer of

    (u - x)**2 + lambda_mu * |u|**0.5

It is zero for ``|x| <= (54**(1/3) / 4) * lambda_mu**(2/3)`` and otherwise

    (2/3) * x * (1 + cos(2*pi/3 - (2/3) * phi)),
    cos(phi) = (lambda_mu / 8) * (|x| / 3)**(-3/2).

The gradient step uses ``w + mu * R^T (r - R w)`` without a factor 2, so the
iteration is a proximal-gradient scheme on ``0.5 * ||R w - r||**2`` with
penalty weight ``lambda / 2``. Because ``lambda`` is reset every iteration
from the (K+1)-th largest magnitude, that factor cancels out of the
selected support.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .core import TrackerConfig, spectral_norm_sq
from .errors import DimensionMismatch, InfeasibleConfig, KOutOfRange, NegativeParameter

log = logging.getLogger(__name__)

THRESHOLD_CONST = 54.0 ** (1.0 / 3.0) / 4.0
LAMBDA_CONST = math.sqrt(96.0) / 9.0

# Relative slack at the cut. The lambda rule makes the threshold equal the
# (K+1)-th magnitude analytically, but the float pipeline lands up to a few
# ulps either side; at the cut both 0 and (2/3)x minimize the scalar problem.
_CUT_SLACK = 8.0 * np.finfo(float).eps

TAIL_LENGTH = 5


def threshold(lambda_mu: float) -> float:
    """Magnitude at or below which the operator returns exactly zero."""
    if lambda_mu < 0:
        raise NegativeParameter(f"lambda*mu must be >= 0, got {lambda_mu}")
    return THRESHOLD_CONST * lambda_mu ** (2.0 / 3.0)


@dataclass(frozen=True)
class ThresholdParams:
    lam: float
    mu: float

    def __post_init__(self):
        if self.lam < 0:
            raise NegativeParameter(f"lambda must be >= 0, got {self.lam}")
        if self.mu <= 0:
            raise NegativeParameter(f"mu must be > 0, got {self.mu}")

    @property
    def lambda_mu(self) -> float:
        return self.lam * self.mu

    @property
    def threshold(self) -> float:
        return threshold(self.lambda_mu)


def half_threshold_scalar(x: float, lambda_mu: float) -> float:
    t = threshold(lambda_mu)
    ax = abs(x)
    if ax <= t * (1.0 + _CUT_SLACK):
        return 0.0
    # (lambda_mu / 8) * (ax / 3)**-1.5, arranged so subnormal inputs cannot overflow
    cos_phi = (lambda_mu ** (2.0 / 3.0) / (ax / 3.0)) ** 1.5 / 8.0
    phi = math.acos(min(cos_phi, 1.0))
    return (2.0 / 3.0) * x * (1.0 + math.cos(2.0 * math.pi / 3.0 - (2.0 / 3.0) * phi))


def half_threshold_vector(x, lambda_mu: float) -> np.ndarray:
    """Componentwise :func:`half_threshold_scalar`; sub-threshold entries become exact zeros."""
    t = threshold(lambda_mu)
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    keep = np.abs(x) > t * (1.0 + _CUT_SLACK)
    if np.any(keep):
        xk = x[keep]
        cos_phi = (lambda_mu ** (2.0 / 3.0) / (np.abs(xk) / 3.0)) ** 1.5 / 8.0
        phi = np.arccos(np.minimum(cos_phi, 1.0))
        out[keep] = (2.0 / 3.0) * xk * (1.0 + np.cos(2.0 * np.pi / 3.0 - (2.0 / 3.0) * phi))
    return out


def gradient_step(w, R, r_index, mu: float) -> np.ndarray:
    """``w + mu * R^T (r_index - R w)``."""
    w = np.asarray(w, dtype=float)
    R = np.asarray(R, dtype=float)
    r_index = np.asarray(r_index, dtype=float)
    if R.ndim != 2 or w.shape != (R.shape[1],) or r_index.shape != (R.shape[0],):
        raise DimensionMismatch(f"R {R.shape}, w {w.shape}, index returns {r_index.shape}")
    return w + mu * (R.T @ (r_index - R @ w))


def magnitude_order(b) -> np.ndarray:
    """Indices sorted by decreasing ``|b|``; ties go to the lower index first."""
    return np.argsort(-np.abs(np.asarray(b, dtype=float)), kind="stable")


def adaptive_lambda(b, k: int, mu: float, lambda_prev: float = math.inf, rule: str = "recompute") -> float:
    """Regularization weight that leaves the K largest entries of ``b`` above threshold.

    ``recompute`` returns ``sqrt(96) / (9 mu) * |b|_(k+1) ** 1.5``;
    ``monotone-min`` returns the minimum of that value and ``lambda_prev``.
    """
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    if not 1 <= k < n:
        raise KOutOfRange(f"k must satisfy 1 <= k < N={n}, got {k}")
    if mu <= 0:
        raise NegativeParameter(f"mu must be > 0, got {mu}")
    mag = float(np.abs(b[magnitude_order(b)[k]]))
    lam = LAMBDA_CONST / mu * mag ** 1.5
    if rule == "recompute":
        return lam
    if rule == "monotone-min":
        return min(lambda_prev, lam)
    raise ValueError(f"unknown rule {rule!r}")


def keep_largest(w: np.ndarray, k: int) -> np.ndarray:
    """Zero all but the ``k`` largest-magnitude entries of ``w``."""
    if np.count_nonzero(w) <= k:
        return w
    out = np.zeros_like(w)
    top = magnitude_order(w)[:k]
    out[top] = w[top]
    return out


def threshold_k(b: np.ndarray, k: int, lambda_mu: float) -> np.ndarray:
    """Half threshold ``b`` and reconcile the result with exactly ``k`` survivors.

    Extra survivors (ties, or a damped lambda) are trimmed by magnitude.
    When ties at the cut zero out entries ranked within the top ``k``, those
    entries take the nonzero branch at the cut, ``(2/3) * b_i``, which
    minimizes the scalar problem equally well.
    """
    w = keep_largest(half_threshold_vector(b, lambda_mu), k)
    if np.count_nonzero(w) < k:
        top = magnitude_order(b)[:k]
        fill = top[(w[top] == 0) & (b[top] != 0)]
        w[fill] = (2.0 / 3.0) * b[fill]
    return w


@dataclass
class IterationTrace:
    iterations: int = 0
    lambda_history: list[float] = field(default_factory=list)
    support_history_tail: list[tuple[int, ...]] = field(default_factory=list)
    converged: bool = False
    stop_reason: str = "max-iters"
    mu: float = 0.0


def initial_weights(n: int, cfg: TrackerConfig) -> np.ndarray:
    if cfg.init == "uniform":
        return np.full(n, 1.0 / n)
    w = np.random.default_rng(cfg.seed).random(n)
    return w / w.sum()


def select_support(R, r_index, cfg: TrackerConfig, w0=None):
    """Run the thresholding iteration on the training block and return
    ``(weights, trace)``.

    Parameters
    ----------
    R : (T, N) array
        Training returns.
    r_index : (T,) array
        Training index returns.
    cfg : TrackerConfig
        Target cardinality, rule, initial point and stopping controls.
    w0 : (N,) array, optional
        Explicit starting point; overrides ``cfg.init``.

    Returns
    -------
    weights : (N,) ndarray
        Raw iterate with at most ``cfg.k`` nonzeros. No budget or bound
        constraint is imposed here.
    trace : IterationTrace
    """
    R = np.asarray(R, dtype=float)
    r_index = np.asarray(r_index, dtype=float)
    if R.ndim != 2 or r_index.shape != (R.shape[0],):
        raise DimensionMismatch(f"R {R.shape} and index returns {r_index.shape} do not conform")
    n = R.shape[1]
    k = cfg.k
    if not cfg.bounds.feasible_for(k):
        raise InfeasibleConfig(f"K={k} infeasible for bounds {cfg.bounds}")
    if not 1 <= k < n:
        raise KOutOfRange(f"k must satisfy 1 <= k < N={n}, got {k}")

    mu = (1.0 - cfg.epsilon) / spectral_norm_sq(R)
    w = initial_weights(n, cfg) if w0 is None else np.array(w0, dtype=float)
    if w.shape != (n,):
        raise DimensionMismatch(f"w0 has shape {w.shape}, expected ({n},)")

    RtR = R.T @ R if n <= 4 * R.shape[0] else None
    Rtr = R.T @ r_index
    trace = IterationTrace(mu=mu)
    lam = math.inf
    support: tuple[int, ...] | None = None
    stable = 0
    for it in range(1, cfg.max_iters + 1):
        grad = Rtr - (RtR @ w if RtR is not None else R.T @ (R @ w))
        b = w + mu * grad
        lam = adaptive_lambda(b, k, mu, lam, cfg.rule)
        trace.lambda_history.append(lam)
        w_new = threshold_k(b, k, lam * mu)

        new_support = tuple(np.flatnonzero(w_new).tolist())
        stable = stable + 1 if new_support == support else 0
        support = new_support
        trace.support_history_tail.append(support)
        del trace.support_history_tail[:-TAIL_LENGTH]

        scale = np.linalg.norm(w_new)
        change = np.linalg.norm(w_new - w) / scale if scale > 0 else 0.0
        w = w_new
        trace.iterations = it
        if not support:
            trace.stop_reason = "stalled"
            log.warning("thresholding iterate collapsed to zero at iteration %d", it)
            break
        if stable >= cfg.support_stable_iters and change < cfg.rel_tol:
            trace.converged = True
            trace.stop_reason = "support-stable"
            break
    else:
        log.info("support selection hit max_iters=%d (support stable for %d)", cfg.max_iters, stable)
    return w, trace

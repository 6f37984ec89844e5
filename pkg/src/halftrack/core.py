"""Portfolio weights, constraint containers and the tracking-error kernels."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, InfeasibleConfig, ZeroMatrix

RULES = ("recompute", "monotone-min")
INITS = ("uniform", "seeded-random")

# feasibility slack for K * eta <= 1 <= K * delta
_BUDGET_TOL = 1e-12


@dataclass(frozen=True)
class Bounds:
    """Per-asset weight bounds ``eta <= w_i <= delta`` for held assets."""

    eta: float = 0.01
    delta: float = 0.5

    def __post_init__(self):
        if not (0.0 <= self.eta <= self.delta <= 1.0):
            raise InfeasibleConfig(f"need 0 <= eta <= delta <= 1, got eta={self.eta}, delta={self.delta}")

    def feasible_for(self, k: int) -> bool:
        return k * self.eta <= 1.0 + _BUDGET_TOL and k * self.delta >= 1.0 - _BUDGET_TOL


@dataclass(frozen=True)
class TrackerConfig:
    """Settings shared by the tracking strategies.

    ``rule`` picks the regularization update of the thresholding stage and
    ``init`` its starting point (``seed`` only matters for ``seeded-random``).
    ``refine`` re-runs support selection once, warm-started from the fitted
    weights.
    """

    k: int
    bounds: Bounds = field(default_factory=Bounds)
    epsilon: float = 0.01
    max_iters: int = 10_000
    support_stable_iters: int = 20
    rel_tol: float = 1e-8
    rule: str = "recompute"
    init: str = "uniform"
    seed: int = 42
    refine: bool = False

    def __post_init__(self):
        if self.k < 1:
            raise InfeasibleConfig(f"K must be >= 1, got {self.k}")
        if not self.bounds.feasible_for(self.k):
            raise InfeasibleConfig(
                f"K={self.k} with bounds [{self.bounds.eta}, {self.bounds.delta}] cannot hold a fully "
                "invested portfolio (need K*eta <= 1 <= K*delta)"
            )
        if not 0.0 < self.epsilon < 1.0:
            raise InfeasibleConfig(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.max_iters < 1 or self.support_stable_iters < 1 or self.rel_tol <= 0:
            raise InfeasibleConfig("iteration controls and tolerances must be positive")
        if self.rule not in RULES:
            raise InfeasibleConfig(f"unknown rule {self.rule!r}; expected one of {RULES}")
        if self.init not in INITS:
            raise InfeasibleConfig(f"unknown init {self.init!r}; expected one of {INITS}")


@dataclass(frozen=True, eq=False)
class PortfolioWeights:
    """Weight vector with its support ``{i : w_i != 0}`` (exact zeros only)."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1:
            raise DimensionMismatch(f"weights must be a vector, got shape {w.shape}")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_support(cls, n: int, support, values) -> "PortfolioWeights":
        w = np.zeros(n)
        w[np.asarray(support, dtype=int)] = values
        return cls(w)

    @property
    def support(self) -> list[int]:
        return np.flatnonzero(self.weights != 0).tolist()

    @property
    def n_assets(self) -> int:
        return self.weights.shape[0]

    def satisfies(self, bounds: Bounds, tol: float = 1e-10) -> bool:
        """True when the budget and the bounds on held assets hold within ``tol``."""
        w = self.weights
        held = w[w != 0]
        return (
            abs(w.sum() - 1.0) <= tol
            and bool(np.all(held >= bounds.eta - tol))
            and bool(np.all(held <= bounds.delta + tol))
        )


def _as_weights(w) -> np.ndarray:
    return w.weights if isinstance(w, PortfolioWeights) else np.asarray(w, dtype=float)


def tracking_error(R, r_index, w, normalized: bool = True) -> float:
    """Squared tracking error ``||R w - r_index||^2``, divided by ``T`` when normalized."""
    R = np.asarray(R, dtype=float)
    r_index = np.asarray(r_index, dtype=float)
    w = _as_weights(w)
    if R.ndim != 2 or r_index.shape != (R.shape[0],) or w.shape != (R.shape[1],):
        raise DimensionMismatch(
            f"R {R.shape}, index returns {r_index.shape} and weights {w.shape} do not conform"
        )
    resid = R @ w - r_index
    sse = float(resid @ resid)
    return sse / R.shape[0] if normalized else sse


def spectral_norm_sq(R, max_iters: int = 10_000, rel_tol: float = 1e-10) -> float:
    """Largest eigenvalue of ``R^T R`` (squared spectral norm) by power iteration.

    The start vector is all ones, so the result is reproducible. Iteration
    runs on whichever Gram matrix (``R^T R`` or ``R R^T``) is smaller; both
    share the top eigenvalue.
    """
    R = np.asarray(R, dtype=float)
    if R.ndim != 2:
        raise DimensionMismatch(f"expected a matrix, got shape {R.shape}")
    if not np.any(R):
        raise ZeroMatrix("spectral norm of a zero matrix is not a valid step-size scale")
    gram = R.T @ R if R.shape[1] <= R.shape[0] else R @ R.T
    v = np.ones(gram.shape[0])
    v /= np.linalg.norm(v)
    u = gram @ v
    if not np.any(u):
        # all-ones lies in the null space; fall back to the heaviest coordinate
        v = np.zeros(gram.shape[0])
        v[int(np.argmax(np.diag(gram)))] = 1.0
        u = gram @ v
    lam = float(v @ u)
    for _ in range(max_iters):
        v = u / np.linalg.norm(u)
        u = gram @ v
        new = float(v @ u)
        if abs(new - lam) <= rel_tol * abs(new):
            return new
        lam = new
    return lam

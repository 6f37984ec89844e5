"""Least-squares weights on a fixed support under a budget and box bounds.

    min ||A w - y||^2   s.t.   sum(w) = 1,   eta <= w_i <= delta

solved by a primal active-set method started from the uniform portfolio,
which is feasible whenever ``K * eta <= 1 <= K * delta``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .core import Bounds
from .errors import DimensionMismatch, InfeasibleBounds

log = logging.getLogger(__name__)

JITTER = 1e-12
KKT_TOL = 1e-10
# a variable within this distance of a bound counts as sitting on it
BOUND_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class QpProblem:
    design: np.ndarray
    target: np.ndarray
    bounds: Bounds = field(default_factory=Bounds)
    budget: float = 1.0

    def __post_init__(self):
        A = np.asarray(self.design, dtype=float)
        if A.ndim == 1:
            A = A[:, None]
        y = np.asarray(self.target, dtype=float)
        if A.ndim != 2 or y.shape != (A.shape[0],):
            raise DimensionMismatch(f"design {A.shape} and target {y.shape} do not conform")
        if A.shape[1] < 1:
            raise DimensionMismatch("design needs at least one column")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(y))):
            raise DimensionMismatch("design and target must be finite")
        object.__setattr__(self, "design", A)
        object.__setattr__(self, "target", y)

    @property
    def k(self) -> int:
        return self.design.shape[1]


@dataclass(frozen=True, eq=False)
class QpSolution:
    weights: np.ndarray
    objective: float
    kkt_residual: float
    active_lower: tuple[int, ...]
    active_upper: tuple[int, ...]
    iterations: int
    converged: bool = True
    degenerate: bool = False


def _check_feasible(k: int, bounds: Bounds, budget: float) -> None:
    if k * bounds.eta > budget + 1e-12 or k * bounds.delta < budget - 1e-12:
        raise InfeasibleBounds(
            f"{k} assets in [{bounds.eta}, {bounds.delta}] cannot sum to {budget}"
        )


def _stationarity_gap(g: np.ndarray, at_lo: np.ndarray, at_hi: np.ndarray) -> float:
    """min over nu of max_i of the unblocked part of |g_i + nu|.

    A lower-bound variable blocks ``g_i + nu >= 0``, an upper-bound one blocks
    ``g_i + nu <= 0``. The envelope is ``max(0, nu + a, -nu - b)`` with
    ``a = max g`` over variables that may still decrease and ``b = min g``
    over those that may still increase, minimized at ``(a - b) / 2``.
    """
    free = ~(at_lo | at_hi)
    up = g[free | at_hi]
    down = g[free | at_lo]
    if up.size == 0 or down.size == 0:
        return 0.0
    return max(0.0, (float(up.max()) - float(down.min())) / 2.0)


def _kkt(G, c, w, bounds: Bounds, budget: float, tol: float = 1e-10) -> float:
    g = 2.0 * (G @ w - c)
    at_lo = w <= bounds.eta + tol
    at_hi = w >= bounds.delta - tol
    both = at_lo & at_hi  # eta == delta pins the variable
    viol = max(
        abs(float(w.sum()) - budget),
        float(np.max(np.maximum(bounds.eta - w, 0.0))),
        float(np.max(np.maximum(w - bounds.delta, 0.0))),
    )
    gap = _stationarity_gap(g[~both], at_lo[~both], at_hi[~both])
    return max(viol, gap)


def kkt_residual(p: QpProblem, w) -> float:
    """Optimality certificate: worst of budget error, bound violation and
    projected stationarity gap (gradient units)."""
    w = np.asarray(w, dtype=float)
    if w.shape != (p.k,):
        raise DimensionMismatch(f"w has shape {w.shape}, expected ({p.k},)")
    A, y = p.design, p.target
    return _kkt(A.T @ A, A.T @ y, w, p.bounds, p.budget)


def solve_gram(G, c, yy: float, bounds: Bounds, budget: float = 1.0, max_iters=None) -> QpSolution:
    """Active-set solve in Gram form: ``f(w) = w'Gw - 2c'w + yy``.

    Reused by the exhaustive enumerator, which slices one Gram matrix for
    every subset.
    """
    G = np.asarray(G, dtype=float)
    c = np.asarray(c, dtype=float)
    k = c.shape[0]
    _check_feasible(k, bounds, budget)
    eta, delta = bounds.eta, bounds.delta
    max_iters = 50 * k if max_iters is None else max_iters

    eig = np.linalg.eigvalsh(G)
    degenerate = bool(eig[0] <= JITTER * max(1.0, eig[-1]))
    if degenerate:
        G = G + JITTER * np.eye(k)
        log.debug("rank-deficient support of size %d; Gram jitter applied", k)
    H = 2.0 * G

    w = np.full(k, budget / k)
    # working set: 0 free, -1 held at eta, +1 held at delta
    state = np.zeros(k, dtype=int)
    if delta - eta <= BOUND_TOL:
        state[:] = -1
    scale = max(1.0, float(np.abs(H).max()))
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        g = 2.0 * (G @ w - c)
        free = np.flatnonzero(state == 0)
        nf = free.size
        p = np.zeros(k)
        if nf > 0:
            kkt = np.zeros((nf + 1, nf + 1))
            kkt[:nf, :nf] = H[np.ix_(free, free)]
            kkt[:nf, nf] = 1.0
            kkt[nf, :nf] = 1.0
            rhs = np.concatenate([-g[free], [0.0]])
            try:
                sol = np.linalg.solve(kkt, rhs)
            except np.linalg.LinAlgError:
                sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
            p[free] = sol[:nf]

        if np.max(np.abs(p)) <= 1e-13 * max(1.0, float(np.max(np.abs(w)))):
            # subspace optimum reached; price out the bound constraints
            if nf > 0:
                nu = -float(np.mean(g[free]))
            else:
                lo_vals = -g[state == -1]
                hi_vals = -g[state == 1]
                if lo_vals.size and hi_vals.size:
                    nu = 0.5 * (lo_vals.max() + hi_vals.min())
                elif lo_vals.size:
                    nu = float(lo_vals.max())
                else:
                    nu = float(hi_vals.min())
            mult = np.where(state == -1, g + nu, np.where(state == 1, -(g + nu), np.inf))
            if delta - eta <= BOUND_TOL:
                mult[:] = np.inf
            j = int(np.argmin(mult))
            if mult[j] >= -KKT_TOL * scale:
                converged = True
                break
            state[j] = 0
            continue

        # ratio test against the box
        alpha = 1.0
        block = -1
        block_side = 0
        for i in free:
            if p[i] < 0:
                step = (eta - w[i]) / p[i]
                side = -1
            elif p[i] > 0:
                step = (delta - w[i]) / p[i]
                side = 1
            else:
                continue
            if step < alpha:
                alpha, block, block_side = max(step, 0.0), i, side
        w = w + alpha * p
        if block >= 0:
            w[block] = eta if block_side == -1 else delta
            state[block] = block_side
        # pin anything pushed onto a bound by rounding
        np.clip(w, eta, delta, out=w)
    else:
        log.warning("active-set QP hit %d iterations without certifying optimality", max_iters)

    # restore the budget exactly on the free variables after clipping
    free = np.flatnonzero(state == 0)
    if free.size:
        w[free] += (budget - w.sum()) / free.size

    obj = float(w @ G @ w - 2.0 * c @ w + yy)
    resid = _kkt(G, c, w, bounds, budget)
    return QpSolution(
        weights=w,
        objective=max(obj, 0.0),
        kkt_residual=resid,
        active_lower=tuple(np.flatnonzero(w <= eta + BOUND_TOL).tolist()),
        active_upper=tuple(np.flatnonzero(w >= delta - BOUND_TOL).tolist()),
        iterations=it,
        converged=converged,
        degenerate=degenerate,
    )


def solve_qp(p: QpProblem, max_iters=None) -> QpSolution:
    """Global minimizer of the bounded, fully invested least-squares fit.

    The reported objective is recomputed from the residual ``A w - y`` so it
    carries no cancellation from the Gram form.
    """
    A, y = p.design, p.target
    sol = solve_gram(A.T @ A, A.T @ y, float(y @ y), p.bounds, p.budget, max_iters=max_iters)
    resid = A @ sol.weights - y
    obj = float(resid @ resid)
    return QpSolution(
        weights=sol.weights,
        objective=obj,
        kkt_residual=sol.kkt_residual,
        active_lower=sol.active_lower,
        active_upper=sol.active_upper,
        iterations=sol.iterations,
        converged=sol.converged,
        degenerate=sol.degenerate,
    )

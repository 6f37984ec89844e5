"""L1 baseline: LARS with the Lasso modification, stopped at K active assets,
and a coordinate-descent Lasso solver used to cross-check the path.

Both work on ``||R w - y||^2 + lam * ||w||_1`` (no 1/2, no 1/T), so along
the path ``lam = 2 * max_j |R_j^T (y - R w)|``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, KOutOfRange, NegativeParameter

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class LarsState:
    """Path breakpoint: the active set right after an entry or drop event."""

    active_set: tuple[int, ...]
    signs: tuple[int, ...]
    lambda_current: float
    coefficients: np.ndarray
    step_count: int
    event: str  # "enter", "drop" or "end"


def _check(R, y):
    R = np.asarray(R, dtype=float)
    y = np.asarray(y, dtype=float)
    if R.ndim != 2 or y.shape != (R.shape[0],):
        raise DimensionMismatch(f"R {R.shape} and y {y.shape} do not conform")
    return R, y


def lars_path(R, y, max_active: int | None = None, max_steps: int | None = None) -> list[LarsState]:
    """Trace the Lasso path by least angle regression.

    Stops at the first breakpoint whose active set has ``max_active``
    members, when ``lam`` reaches zero, or when no further variable can
    enter (rank exhausted).
    """
    R, y = _check(R, y)
    T, N = R.shape
    limit = N + 1 if max_active is None else max_active
    max_steps = 8 * N if max_steps is None else max_steps
    beta = np.zeros(N)
    c = R.T @ y
    C = float(np.max(np.abs(c)))
    path: list[LarsState] = []
    if C <= 0:
        return path
    first = int(np.argmax(np.abs(c)))
    active = [first]
    signs = {first: int(np.sign(c[first]))}
    tiny = 1e-12 * C

    def record(event, step):
        path.append(
            LarsState(
                active_set=tuple(active),
                signs=tuple(signs[j] for j in active),
                lambda_current=2.0 * C,
                coefficients=beta.copy(),
                step_count=step,
                event=event,
            )
        )

    record("enter", 0)
    just_dropped = -1
    for step in range(1, max_steps + 1):
        if len(active) >= limit:
            break
        A = np.array(active)
        s = np.array([signs[j] for j in active], dtype=float)
        XA = R[:, A]
        d = np.linalg.lstsq(XA.T @ XA, s, rcond=None)[0]
        a = R.T @ (XA @ d)

        gamma = C
        event, who = "end", -1
        # with T active columns the design is saturated; only the final leg remains
        inactive = np.setdiff1d(np.arange(N), A) if len(active) < T else []
        for j in inactive:
            # a just-dropped variable sits on the +-C boundary; only a genuine
            # later re-entry counts, not the zero-length one
            floor = 1e-9 * C if j == just_dropped else tiny
            for num, den in ((C - c[j], 1.0 - a[j]), (C + c[j], 1.0 + a[j])):
                if den > 1e-12:
                    g = num / den
                    if floor < g < gamma:
                        gamma, event, who = g, "enter", int(j)
        for pos, j in enumerate(active):
            if d[pos] != 0.0 and beta[j] != 0.0:
                g = -beta[j] / d[pos]
                if tiny < g < gamma:
                    gamma, event, who = g, "drop", int(j)

        beta[A] += gamma * d
        just_dropped = -1
        if event == "drop":
            beta[who] = 0.0
            active.remove(who)
            del signs[who]
            just_dropped = who
        c = R.T @ (y - R @ beta)
        if event == "enter":
            signs[who] = int(np.sign(c[who]))
            active.append(who)
        C = float(np.mean(np.abs(c[active]))) if event != "end" else 0.0
        record(event, step)
        if event == "end" or C <= tiny:
            break
        if event == "enter" and len(active) >= limit:
            break
    return path


def lars_support(R, y, k: int) -> np.ndarray:
    """Sorted active set at the first breakpoint where it reaches ``k`` members.

    If the path ends first, the last active set is returned (shorter than
    ``k``) and a warning is logged.
    """
    R, y = _check(R, y)
    n = R.shape[1]
    if not 1 <= k < n:
        raise KOutOfRange(f"k must satisfy 1 <= k < N={n}, got {k}")
    path = lars_path(R, y, max_active=k)
    for state in path:
        if len(state.active_set) >= k:
            return np.array(sorted(state.active_set))
    got = sorted(path[-1].active_set) if path else []
    log.warning("LARS path exhausted with %d of %d requested assets", len(got), k)
    return np.array(got, dtype=int)


def _soft(x: float, t: float) -> float:
    if x > t:
        return x - t
    if x < -t:
        return x + t
    return 0.0


def lasso_duality_gap(R, y, w, lam: float) -> float:
    R, y = _check(R, y)
    resid = y - R @ w
    primal = float(resid @ resid + lam * np.abs(w).sum())
    corr = float(np.max(np.abs(R.T @ resid)))
    theta = resid * (min(1.0, lam / (2.0 * corr)) if corr > 0 else 1.0)
    dual = float(y @ y - (y - theta) @ (y - theta))
    return max(primal - dual, 0.0)


def cd_lasso(R, y, lam: float, w0=None, tol: float = 1e-10, max_sweeps: int = 100_000) -> np.ndarray:
    """Cyclic coordinate descent for ``||R w - y||^2 + lam * ||w||_1``.

    Stops once a sweep moves no coordinate by more than ``tol`` and the
    duality gap is below ``tol`` relative to ``||y||^2``.
    """
    R, y = _check(R, y)
    if lam < 0:
        raise NegativeParameter(f"lambda must be >= 0, got {lam}")
    N = R.shape[1]
    G = R.T @ R
    cy = R.T @ y
    diag = np.diag(G).copy()
    w = np.zeros(N) if w0 is None else np.array(w0, dtype=float)
    Gw = G @ w
    half = lam / 2.0
    yy = max(float(y @ y), np.finfo(float).tiny)
    for _ in range(max_sweeps):
        biggest = 0.0
        for j in range(N):
            if diag[j] == 0.0:
                continue
            old = w[j]
            rho = cy[j] - Gw[j] + diag[j] * old
            new = _soft(rho, half) / diag[j]
            if new != old:
                Gw += G[:, j] * (new - old)
                w[j] = new
                biggest = max(biggest, abs(new - old))
        if biggest < tol and lasso_duality_gap(R, y, w, lam) < tol * yy:
            return w
    log.warning("cd_lasso reached %d sweeps without meeting tol=%g", max_sweeps, tol)
    return w

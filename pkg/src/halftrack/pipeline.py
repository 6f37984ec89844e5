"""End-to-end tracking strategies: pick a support on the training block, fit
bounded fully-invested weights on it, score in and out of sample."""
from __future__ import annotations

import itertools
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .core import Bounds, PortfolioWeights, TrackerConfig, tracking_error
from .dataio import ReturnsData
from .errors import BadSplit, KOutOfRange, TooLarge
from .halfthresh import IterationTrace, select_support
from .larspath import lars_support
from .qpsolve import QpProblem, solve_gram, solve_qp

log = logging.getLogger(__name__)

MODELS = ("l12", "l1", "exhaustive")
MAX_SUBSETS = 1_000_000


@dataclass(eq=False)
class TrackResult:
    model: str
    support: list[int]
    weights: PortfolioWeights
    tei: float
    teo: float
    cons: float
    iterations: int
    runtime_ms: float
    trace: IterationTrace | None = None
    flags: list[str] = field(default_factory=list)

    @property
    def k(self) -> int:
        return len(self.support)

    def to_dict(self, timing: bool = True) -> dict:
        out = {
            "model": self.model,
            "support": list(self.support),
            "weights": {str(i): float(self.weights.weights[i]) for i in self.support},
            "n_stocks": self.weights.n_assets,
            "tei": self.tei,
            "teo": self.teo,
            "cons": self.cons,
            "iterations": self.iterations,
            "flags": list(self.flags),
        }
        if timing:
            out["runtime_ms"] = self.runtime_ms
        if self.trace is not None:
            out["trace"] = {
                "iterations": self.trace.iterations,
                "converged": self.trace.converged,
                "stop_reason": self.trace.stop_reason,
                "mu": self.trace.mu,
                "final_lambda": self.trace.lambda_history[-1] if self.trace.lambda_history else None,
                "support_history_tail": [list(s) for s in self.trace.support_history_tail],
            }
        return out


def _require_split(data: ReturnsData) -> None:
    if data.train_rows < 1 or data.test_rows < 1:
        raise BadSplit("data must be split into non-empty train and test blocks first")


def _finish(model, data: ReturnsData, support, weights_on_support, iterations, t0, trace=None, flags=()):
    n = data.n_stocks
    pw = PortfolioWeights.from_support(n, support, weights_on_support)
    R_tr, r_tr = data.train
    R_te, r_te = data.test
    tei = tracking_error(R_tr, r_tr, pw)
    teo = tracking_error(R_te, r_te, pw)
    return TrackResult(
        model=model,
        support=pw.support,
        weights=pw,
        tei=tei,
        teo=teo,
        cons=abs(tei - teo),
        iterations=iterations,
        runtime_ms=(time.perf_counter() - t0) * 1e3,
        trace=trace,
        flags=list(flags),
    )


def _fit_support(R, r, support, bounds: Bounds):
    sol = solve_qp(QpProblem(R[:, support], r, bounds))
    flags = []
    if not sol.converged:
        flags.append("qp-max-iterations")
    if sol.degenerate:
        flags.append("degenerate-support")
    return sol.weights, flags


def track_l12(data: ReturnsData, cfg: TrackerConfig) -> TrackResult:
    """Hybrid half thresholding: thresholded support, then the bounded least-squares fit."""
    _require_split(data)
    t0 = time.perf_counter()
    R, r = data.train
    raw, trace = select_support(R, r, cfg)
    support = np.flatnonzero(raw)
    flags = []
    if support.size < cfg.k:
        flags.append(f"shortfall:{support.size}")
    if not trace.converged:
        flags.append(f"stage1:{trace.stop_reason}")
    bounds = cfg.bounds if cfg.bounds.feasible_for(support.size) else Bounds(0.0, 1.0)
    if bounds is not cfg.bounds:
        flags.append("bounds-relaxed")
    weights, qflags = _fit_support(R, r, support, bounds)
    iterations = trace.iterations
    if cfg.refine:
        w0 = np.zeros(data.n_stocks)
        w0[support] = weights
        raw, trace = select_support(R, r, cfg, w0=w0)
        new_support = np.flatnonzero(raw)
        if new_support.size == support.size:
            support = new_support
            weights, qflags = _fit_support(R, r, support, bounds)
        iterations += trace.iterations
    return _finish("l12", data, support, weights, iterations, t0, trace, flags + qflags)


def track_l1(data: ReturnsData, cfg: TrackerConfig) -> TrackResult:
    """Hybrid LARS: Lasso-path support at K assets, then the same bounded fit."""
    _require_split(data)
    t0 = time.perf_counter()
    R, r = data.train
    support = lars_support(R, r, cfg.k)
    flags = []
    bounds = cfg.bounds
    if support.size < cfg.k:
        flags.append(f"shortfall:{support.size}")
        if not bounds.feasible_for(support.size):
            bounds = Bounds(0.0, 1.0)
            flags.append("bounds-relaxed")
    weights, qflags = _fit_support(R, r, support, bounds)
    return _finish("l1", data, support, weights, int(support.size), t0, None, flags + qflags)


def _best_subset(G, c, yy, bounds, combos):
    best_obj, best = math.inf, None
    for combo in combos:
        idx = np.array(combo)
        sol = solve_gram(G[np.ix_(idx, idx)], c[idx], yy, bounds)
        if sol.objective < best_obj:
            best_obj, best = sol.objective, (combo, sol.weights)
    return best_obj, best


def _chunk_worker(args):
    G, c, yy, bounds, n, k, start, stop = args
    combos = itertools.islice(itertools.combinations(range(n), k), start, stop)
    return start, _best_subset(G, c, yy, bounds, combos)


def track_exhaustive(data: ReturnsData, k: int, bounds: Bounds | None = None, jobs: int = 1) -> TrackResult:
    """Best K-subset by in-sample objective, enumerating every support.

    Ties keep the lexicographically smallest support. With ``jobs > 1`` the
    combinations are split into contiguous chunks and reduced in chunk
    order, so the answer does not depend on scheduling.
    """
    _require_split(data)
    bounds = bounds or Bounds()
    n = data.n_stocks
    if not 1 <= k <= n:
        raise KOutOfRange(f"k must satisfy 1 <= k <= N={n}, got {k}")
    total = math.comb(n, k)
    if total > MAX_SUBSETS:
        raise TooLarge(f"C({n}, {k}) = {total} subsets exceeds the limit of {MAX_SUBSETS}")
    if not bounds.feasible_for(k):
        raise KOutOfRange(f"K={k} infeasible for bounds [{bounds.eta}, {bounds.delta}]")
    t0 = time.perf_counter()
    R, r = data.train
    G, c, yy = R.T @ R, R.T @ r, float(r @ r)

    if jobs <= 1 or total < 1000:
        _, best = _best_subset(G, c, yy, bounds, itertools.combinations(range(n), k))
    else:
        size = -(-total // (4 * jobs))
        tasks = [(G, c, yy, bounds, n, k, s, min(s + size, total)) for s in range(0, total, size)]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = sorted(pool.map(_chunk_worker, tasks), key=lambda t: t[0])
        best_obj, best = math.inf, None
        for _, (obj, cand) in results:
            if obj < best_obj:
                best_obj, best = obj, cand
    combo, weights = best
    support = np.array(combo)
    # rescore the winner from the design so TEI carries no Gram-form rounding
    sol = solve_qp(QpProblem(R[:, support], r, bounds))
    return _finish("exhaustive", data, support, sol.weights, total, t0)


def track(model: str, data: ReturnsData, cfg: TrackerConfig, jobs: int = 1) -> TrackResult:
    if model == "l12":
        return track_l12(data, cfg)
    if model == "l1":
        return track_l1(data, cfg)
    if model == "exhaustive":
        return track_exhaustive(data, cfg.k, cfg.bounds, jobs=jobs)
    raise ValueError(f"unknown model {model!r}; expected one of {MODELS}")


def with_seed(cfg: TrackerConfig, seed: int, init: str | None = None) -> TrackerConfig:
    return replace(cfg, seed=seed, init=init or cfg.init)

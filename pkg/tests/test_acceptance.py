"""Acceptance suite: one test per criterion, each at its stated tolerance and
time budget. ``conftest.py`` prints a pass/fail line per criterion at the end
of the run.

Criterion 7 (and the real-data half of 9) needs the OR-Library Hang Seng
file. Point ``HALFTRACK_DATA_DIR`` at a directory holding ``indtrack1.txt``
(``HALFTRACK_LAYOUT`` overrides the token layout); without it those checks
skip rather than pass.
"""
import csv
import math
import os
import statistics
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from halftrack.bench import ExperimentSpec, format_csv, published_tables_path, run_experiment, supo
from halftrack.core import Bounds, TrackerConfig, tracking_error
from halftrack.dataio import DEFAULT_LAYOUT, ReturnsData, load_orlib, split, to_returns
from halftrack.halfthresh import adaptive_lambda, half_threshold_scalar, half_threshold_vector, threshold
from halftrack.larspath import cd_lasso, lars_path
from halftrack.pipeline import track_exhaustive, track_l1, track_l12
from halftrack.qpsolve import QpProblem, solve_qp

import synth

DATA_DIR = os.environ.get("HALFTRACK_DATA_DIR")
LAYOUT = os.environ.get("HALFTRACK_LAYOUT", DEFAULT_LAYOUT)
HANG_SENG = Path(DATA_DIR) / "indtrack1.txt" if DATA_DIR else None
needs_hang_seng = pytest.mark.skipif(
    HANG_SENG is None or not HANG_SENG.is_file(),
    reason="indtrack1.txt not available (set HALFTRACK_DATA_DIR)",
)


def table1_l12():
    """Shipped TEI/TEO of the half-thresholding model on the Hang Seng index, by K."""
    out = {}
    with open(published_tables_path(), newline="") as fh:
        for row in csv.DictReader(fh):
            if row["dataset"] == "indtrack1" and row["model"] == "l12" and row["table"] == "1":
                out[int(row["k"])] = (float(row["tei"]), float(row["teo"]))
    return out


def prox_oracle(x, lm):
    ax = abs(x)
    g = lambda u: (u - ax) ** 2 + lm * math.sqrt(max(u, 0.0))
    grid = np.linspace(0.0, ax, 4001)
    i = int(np.argmin((grid - ax) ** 2 + lm * np.sqrt(grid)))
    h = grid[1] - grid[0]
    best = minimize_scalar(g, bounds=(max(grid[i] - h, 0.0), min(grid[i] + h, ax)),
                           method="bounded", options={"xatol": 1e-13}).x
    if g(0.0) < g(best):
        best = 0.0
    return math.copysign(best, x)


def test_c1_operator_correctness(record_property):
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst_resid = worst_gap = 0.0
    for _ in range(1000):
        lm = 10 ** rng.uniform(-4, math.log10(2.0))
        t = threshold(lm)
        x = rng.choice([-1.0, 1.0]) * rng.uniform(1.5, 6.0) * t
        u = half_threshold_scalar(x, lm)
        resid = abs(2 * (u - x) + (lm / 2) * math.copysign(1.0, u) * abs(u) ** -0.5)
        worst_resid = max(worst_resid, resid)
        worst_gap = max(worst_gap, abs(u - prox_oracle(x, lm)))
        below = rng.uniform(-1.0, 1.0) * t
        assert half_threshold_scalar(below, lm) == 0.0
    elapsed = time.perf_counter() - t0
    record_property("detail", f"max residual {worst_resid:.1e}, max oracle gap {worst_gap:.1e}, {elapsed:.2f}s")
    assert worst_resid < 1e-6
    assert worst_gap < 1e-6
    assert elapsed < 5.0


def test_c2_exact_k_thresholding(record_property):
    rng = np.random.default_rng(102)
    t0 = time.perf_counter()
    checked = 0
    for _ in range(500):
        b = rng.normal(size=50) * rng.uniform(0.01, 10.0)
        assert len(np.unique(np.abs(b))) == 50
        mu = 10 ** rng.uniform(-3, 1)
        order = np.argsort(-np.abs(b))
        for k in (1, 5, 25, 49):
            lam = adaptive_lambda(b, k, mu, rule="recompute")
            kept = np.flatnonzero(half_threshold_vector(b, lam * mu))
            assert set(kept.tolist()) == set(order[:k].tolist())
            checked += 1
    elapsed = time.perf_counter() - t0
    record_property("detail", f"{checked} (vector, K) cases, {elapsed:.2f}s")
    assert elapsed < 5.0


def test_c3_qp_optimality(record_property):
    rng = np.random.default_rng(103)
    b = Bounds(0.01, 0.5)
    t0 = time.perf_counter()
    worst_kkt, worst_margin = 0.0, math.inf
    for _ in range(200):
        k = int(rng.integers(2, 11))
        R = synth.factor_returns(rng, 60, k)
        y = R @ rng.dirichlet(np.ones(k)) + rng.normal(0, 0.003, 60)
        sol = solve_qp(QpProblem(R, y, b))
        worst_kkt = max(worst_kkt, sol.kkt_residual)
        W = synth.feasible_points(rng, k, b.eta, b.delta, 100)
        f = np.sum((W @ R.T - y) ** 2, axis=1)
        worst_margin = min(worst_margin, float(np.min(f - sol.objective)))
    elapsed = time.perf_counter() - t0
    record_property("detail", f"max KKT {worst_kkt:.1e}, min margin {worst_margin:.1e}, {elapsed:.2f}s")
    assert worst_kkt < 1e-8
    assert worst_margin >= -1e-8
    assert elapsed < 10.0


def test_c4_lars_vs_oracle(record_property):
    rng = np.random.default_rng(104)
    t0 = time.perf_counter()
    worst_coef = worst_eq = 0.0
    breakpoints = 0
    for _ in range(50):
        R, y = rng.normal(size=(20, 10)), rng.normal(size=20)
        for s in lars_path(R, y):
            c = R.T @ (y - R @ s.coefficients)
            act = list(s.active_set)
            worst_eq = max(worst_eq, float(np.max(np.abs(c[act] - s.lambda_current / 2 * np.array(s.signs)))))
            if s.lambda_current > 0:
                w = cd_lasso(R, y, s.lambda_current, tol=1e-12)
                worst_coef = max(worst_coef, float(np.max(np.abs(w - s.coefficients))))
                breakpoints += 1
    elapsed = time.perf_counter() - t0
    record_property("detail", f"{breakpoints} breakpoints, max coef diff {worst_coef:.1e}, "
                              f"max equicorrelation gap {worst_eq:.1e}, {elapsed:.2f}s")
    assert worst_coef < 1e-6
    assert worst_eq < 1e-8
    assert elapsed < 10.0


def test_c5_planted_recovery(record_property):
    sigma = 1e-4
    t0 = time.perf_counter()
    hits, worst_tei = 0, 0.0
    for seed in range(50):
        data, support, _ = synth.planted(1000 + seed, T=290, N=30, K=5, sigma=sigma)
        res = track_l12(data, TrackerConfig(k=5))
        if res.support == support.tolist():
            hits += 1
            worst_tei = max(worst_tei, res.tei)
    elapsed = time.perf_counter() - t0
    record_property("detail", f"recovered {hits}/50, max TEI on recovery {worst_tei / sigma**2:.2f} sigma^2, "
                              f"{elapsed:.2f}s")
    assert hits >= 40
    assert worst_tei <= 10 * sigma**2
    assert elapsed < 60.0


def test_c6_oracle_dominance(record_property):
    t0 = time.perf_counter()
    ratios = []
    for seed in range(20):
        data = synth.random_instance(2000 + seed, T=290, N=12)
        cfg = TrackerConfig(k=3)
        ex = track_exhaustive(data, 3, cfg.bounds)
        l12, l1 = track_l12(data, cfg), track_l1(data, cfg)
        # exhaustive is a global optimum up to the QP's own rounding
        assert ex.tei <= l12.tei * (1 + 1e-9)
        assert ex.tei <= l1.tei * (1 + 1e-9)
        ratios.append(l12.tei / ex.tei)
    elapsed = time.perf_counter() - t0
    med = statistics.median(ratios)
    record_property("detail", f"median TEI(l12)/TEI(exhaustive) {med:.3f}, max {max(ratios):.3f}, {elapsed:.2f}s")
    assert med <= 3.0
    assert elapsed < 120.0


@needs_hang_seng
def test_c7_published_table_ballpark(record_property):
    t0 = time.perf_counter()
    panel = load_orlib(HANG_SENG, LAYOUT)
    assert panel.n_stocks == 31
    data = split(to_returns(panel), 145)
    assert (data.train_rows, data.test_rows) == (145, 145)
    table = table1_l12()
    assert sorted(table) == list(range(5, 11))
    worst = 0.0
    teo5 = None
    for k in range(5, 11):
        res = track_l12(data, TrackerConfig(k=k))
        tei_ref, teo_ref = table[k]
        for got, ref in ((res.tei, tei_ref), (res.teo, teo_ref)):
            assert ref / 3 <= got <= 3 * ref, f"K={k}: {got:.3e} outside [1/3, 3] x {ref:.3e}"
            worst = max(worst, max(got / ref, ref / got))
        if k == 5:
            teo5 = res.teo
    s = supo(7.22e-5, teo5)
    elapsed = time.perf_counter() - t0
    record_property("detail", f"worst ratio to table {worst:.2f}x, K=5 SupO {s:.1f}%, {elapsed:.2f}s")
    assert s > 0
    assert elapsed < 60.0


@pytest.mark.slow
def test_c8_scale_smoke(record_property):
    rng = np.random.default_rng(108)
    R = synth.factor_returns(rng, 290, 2151)
    y = R @ rng.dirichlet(np.ones(2151)) + rng.normal(0, 0.001, 290)
    data = ReturnsData(R, y, 145, 145)
    cfg = TrackerConfig(k=50)
    t0 = time.perf_counter()
    res = track_l12(data, cfg)
    elapsed = time.perf_counter() - t0
    w = res.weights.weights
    record_property("detail", f"|Supp|={len(res.support)}, {res.iterations} iterations "
                              f"({res.trace.stop_reason}), {elapsed:.1f}s")
    assert len(res.support) == 50
    assert res.support == np.flatnonzero(w).tolist()
    assert res.weights.satisfies(cfg.bounds, tol=1e-10)
    assert res.tei == pytest.approx(tracking_error(R[:145], y[:145], w), rel=1e-12)
    assert res.cons == abs(res.tei - res.teo)
    assert elapsed < 600.0


def _sweep_csv(path, layout):
    spec = ExperimentSpec([(str(path), layout)], list(range(5, 11)), ["l12"],
                          reference_table=str(published_tables_path()), split_count=145)
    return format_csv(run_experiment(spec)).encode()


def test_c9_determinism_synthetic(tmp_path, record_property):
    path = synth.write_orlib(tmp_path / "indtrack1.txt", synth.price_panel(9, N=31, T_p=291))
    a, b = _sweep_csv(path, DEFAULT_LAYOUT), _sweep_csv(path, DEFAULT_LAYOUT)
    record_property("detail", f"synthetic Hang Seng-shaped file, {len(a)} bytes")
    assert a == b


@needs_hang_seng
def test_c9_determinism_hang_seng(record_property):
    a, b = _sweep_csv(HANG_SENG, LAYOUT), _sweep_csv(HANG_SENG, LAYOUT)
    record_property("detail", f"indtrack1, {len(a)} bytes")
    assert a == b

import itertools

import numpy as np
import pytest

from halftrack.core import Bounds, TrackerConfig, tracking_error
from halftrack.dataio import ReturnsData
from halftrack.errors import BadSplit, TooLarge
from halftrack.pipeline import track, track_exhaustive, track_l1, track_l12, with_seed
from halftrack.qpsolve import QpProblem, solve_qp

import synth


def check_invariants(res, data, cfg):
    w = res.weights.weights
    assert res.support == sorted(np.flatnonzero(w).tolist())
    assert len(res.support) == cfg.k
    assert res.weights.satisfies(cfg.bounds, tol=1e-10)
    R_tr, r_tr = data.train
    R_te, r_te = data.test
    assert res.tei == pytest.approx(tracking_error(R_tr, r_tr, w), rel=1e-12)
    assert res.teo == pytest.approx(tracking_error(R_te, r_te, w), rel=1e-12)
    assert res.cons == abs(res.tei - res.teo)


@pytest.mark.parametrize("model", ["l12", "l1"])
def test_planted_support_recovered(model):
    data, support, _ = synth.planted(3, factor=False)
    cfg = TrackerConfig(k=5)
    res = track(model, data, cfg)
    check_invariants(res, data, cfg)
    assert res.support == support.tolist()
    assert res.tei < 1e-7


def test_same_block_gives_zero_cons():
    data = synth.random_instance(1, T=100)
    R, r = data.stock_returns[:50], data.index_returns[:50]
    doubled = ReturnsData(np.vstack([R, R]), np.concatenate([r, r]), 50, 50)
    res = track_l12(doubled, TrackerConfig(k=4))
    assert res.tei == res.teo
    assert res.cons == 0.0


def test_exhaustive_finds_planted_pair():
    rng = np.random.default_rng(0)
    R = rng.normal(size=(40, 4))
    y = 0.5 * R[:, 1] + 0.5 * R[:, 3]
    data = ReturnsData(R, y, 20, 20)
    res = track_exhaustive(data, 2)
    assert res.support == [1, 3]
    assert res.tei < 1e-28
    assert res.iterations == 6


def test_exhaustive_matches_explicit_enumeration():
    data = synth.random_instance(2, N=8)
    R, r = data.train
    b = Bounds()
    best = min(
        (solve_qp(QpProblem(R[:, list(c)], r, b)).objective, c)
        for c in itertools.combinations(range(8), 3)
    )
    res = track_exhaustive(data, 3, b)
    assert tuple(res.support) == best[1]


@pytest.mark.parametrize("seed", range(4))
def test_exhaustive_dominates_heuristics(seed):
    data = synth.random_instance(seed, N=12)
    cfg = TrackerConfig(k=3)
    ex = track_exhaustive(data, 3, cfg.bounds)
    for res in (track_l12(data, cfg), track_l1(data, cfg)):
        check_invariants(res, data, cfg)
        assert ex.tei <= res.tei * (1 + 1e-9)


def test_exhaustive_parallel_matches_serial():
    data = synth.random_instance(5, N=14)
    a = track_exhaustive(data, 4)
    b = track_exhaustive(data, 4, jobs=2)
    assert a.support == b.support
    np.testing.assert_array_equal(a.weights.weights, b.weights.weights)


def test_exhaustive_size_guard():
    rng = np.random.default_rng(0)
    data = ReturnsData(rng.normal(size=(20, 40)), rng.normal(size=20), 10, 10)
    with pytest.raises(TooLarge):
        track_exhaustive(data, 10)


def test_unsplit_data_rejected():
    data = synth.random_instance(0)
    unsplit = ReturnsData(data.stock_returns, data.index_returns, data.n_periods)
    for fn in (track_l12, track_l1):
        with pytest.raises(BadSplit):
            fn(unsplit, TrackerConfig(k=3))


def test_l1_with_k_n_minus_one():
    data = synth.random_instance(6, N=8)
    cfg = TrackerConfig(k=7)
    res = track_l1(data, cfg)
    check_invariants(res, data, cfg)


@pytest.mark.parametrize("model", ["l12", "l1", "exhaustive"])
def test_determinism(model):
    data = synth.random_instance(7, N=12)
    cfg = TrackerConfig(k=4)
    a, b = track(model, data, cfg), track(model, data, cfg)
    assert a.support == b.support
    np.testing.assert_array_equal(a.weights.weights, b.weights.weights)
    assert (a.tei, a.teo, a.iterations) == (b.tei, b.teo, b.iterations)


def test_refine_keeps_invariants_and_records_iterations():
    data = synth.random_instance(8, N=20)
    cfg = TrackerConfig(k=5, refine=True)
    base = track_l12(data, TrackerConfig(k=5))
    res = track_l12(data, cfg)
    check_invariants(res, data, cfg)
    assert res.iterations > base.iterations


def test_seeded_variants_and_result_record():
    data = synth.random_instance(9, N=20)
    cfg = with_seed(TrackerConfig(k=5), 7, "seeded-random")
    assert (cfg.seed, cfg.init) == (7, "seeded-random")
    res = track_l12(data, cfg)
    d = res.to_dict(timing=False)
    assert "runtime_ms" not in d
    assert d["support"] == res.support
    assert sum(d["weights"].values()) == pytest.approx(1.0, abs=1e-12)
    assert d["trace"]["iterations"] == res.trace.iterations


def test_unknown_model():
    with pytest.raises(ValueError):
        track("l2", synth.random_instance(0), TrackerConfig(k=3))

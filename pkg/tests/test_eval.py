"""Metric implementations against brute-force loop oracles, the persistence
baseline, and the comparison report."""

import json

import numpy as np
import pytest

from fdst.evaluate import MetricReport, evaluate, mpiw, mspe, persistence_forecast, picp
from fdst.fno import HistoryWindow


def _loop_mspe(truth, fc):
    acc = 0.0
    cnt = 0
    for i in range(truth.shape[0]):
        for j in range(truth.shape[1]):
            for k in range(truth.shape[2]):
                acc += (truth[i, j, k] - fc[i, j, k]) ** 2
                cnt += 1
    return acc / cnt


def _loop_picp(truth, lo, hi):
    acc = 0.0
    cnt = 0
    for i in range(truth.shape[0]):
        for j in range(truth.shape[1]):
            for k in range(truth.shape[2]):
                acc += 1.0 if lo[i, j, k] <= truth[i, j, k] <= hi[i, j, k] else 0.0
                cnt += 1
    return acc / cnt


def _loop_mpiw(lo, hi):
    acc = 0.0
    cnt = 0
    for i in range(lo.shape[0]):
        for j in range(lo.shape[1]):
            for k in range(lo.shape[2]):
                acc += hi[i, j, k] - lo[i, j, k]
                cnt += 1
    return acc / cnt


def test_metrics_bit_identical_to_loop_oracles():
    rng = np.random.default_rng(0)
    for _ in range(50):
        shape = (rng.integers(1, 5), rng.integers(1, 4), rng.integers(1, 9))
        truth = rng.standard_normal(shape)
        fc = rng.standard_normal(shape)
        lo = fc - np.abs(rng.standard_normal(shape))
        hi = fc + np.abs(rng.standard_normal(shape))
        assert mspe(truth, fc) == _loop_mspe(truth, fc)
        assert picp(truth, lo, hi) == _loop_picp(truth, lo, hi)
        assert mpiw(lo, hi) == _loop_mpiw(lo, hi)


def test_mspe_trivial():
    t = np.random.default_rng(1).standard_normal((3, 4))
    assert mspe(t, t) == 0.0
    assert np.isclose(mspe(np.zeros((2, 3)), np.full((2, 3), 2.0)), 4.0)
    with pytest.raises(ValueError, match="shape"):
        mspe(np.zeros(3), np.zeros(4))


def test_picp_trivial():
    t = np.random.default_rng(2).standard_normal((4, 4))
    assert picp(t, np.full_like(t, -1e6), np.full_like(t, 1e6)) == 1.0
    assert picp(t, t + 1.0, t + 2.0) == 0.0
    # constructed half coverage
    t = np.array([0.0, 0.0, 10.0, 10.0])
    assert picp(t, np.full(4, -1.0), np.full(4, 1.0)) == 0.5
    with pytest.raises(ValueError, match="inversion"):
        picp(t, np.full(4, 1.0), np.full(4, -1.0))


def test_mpiw_trivial():
    lo = np.zeros((2, 3))
    assert mpiw(lo, lo + 0.7) == pytest.approx(0.7)
    assert mpiw(lo, lo) == 0.0


def test_metrics_permutation_invariant():
    rng = np.random.default_rng(3)
    t = rng.standard_normal((5, 8))
    f = rng.standard_normal((5, 8))
    perm = rng.permutation(5)
    assert np.isclose(mspe(t, f), mspe(t[perm], f[perm]))


def test_persistence_returns_last_frame():
    frames = np.random.default_rng(4).standard_normal((3, 8))
    w = HistoryWindow(frames=frames, target=frames[0])
    out = persistence_forecast(w)
    assert out is w.frames[-1] or np.array_equal(out, frames[2])


def test_persistence_constant_series_zero_error():
    frames = np.ones((3, 8))
    w = HistoryWindow(frames=frames, target=np.ones(8))
    assert mspe(w.target[None], persistence_forecast(w)[None]) == 0.0


def _toy_windows(n_inst=2, n_win=3, n=6, seed=5):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_inst):
        inst = []
        for _ in range(n_win):
            frames = rng.standard_normal((2, n))
            inst.append(HistoryWindow(frames=frames, target=rng.standard_normal(n)))
        out.append(inst)
    return out


def test_evaluate_report_structure():
    wpi = _toy_windows()

    def fc_with_intervals(w):
        m = w.frames[-1]
        return m, m - 1.0, m + 1.0

    def fc_plain(w):
        return persistence_forecast(w), None, None

    report = evaluate({"model": fc_with_intervals, "persistence": fc_plain}, wpi)
    assert report.n_instances == 2
    assert report.n_windows == 6
    assert report.n_grid == 6
    d = json.loads(report.to_json())
    assert d["models"]["persistence"]["picp"] is None
    assert d["models"]["persistence"]["mpiw"] is None
    assert 0.0 <= d["models"]["model"]["picp"] <= 1.0
    assert d["models"]["model"]["mpiw"] == pytest.approx(2.0)
    table = report.to_table()
    assert "persistence" in table and "-" in table


def test_evaluate_batched_equals_per_instance():
    wpi = _toy_windows(n_inst=3, n_win=2, seed=6)

    def fc(w):
        return w.frames[-1], None, None

    full = evaluate({"m": fc}, wpi)
    # weighted mean over equal-size instances must agree with the pooled value
    parts = [evaluate({"m": fc}, [inst]).models["m"].mspe for inst in wpi]
    assert np.isclose(full.models["m"].mspe, np.mean(parts))


def test_evaluate_empty_windows_rejected():
    with pytest.raises(ValueError, match="no evaluation windows"):
        evaluate({"m": lambda w: (w.frames[-1], None, None)}, [])

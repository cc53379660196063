"""Forecast verification: squared-error and interval metrics, the
persistence baseline, and the multi-model comparison report."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import io as fio
from .fno import HistoryWindow

__all__ = [
    "mspe",
    "picp",
    "mpiw",
    "persistence_forecast",
    "ModelMetrics",
    "MetricReport",
    "evaluate",
]


def _seq_mean(values: np.ndarray) -> float:
    """Row-major sequential mean.  A plain left-to-right accumulation keeps
    the result bit-identical to a naive loop, which vectorized pairwise
    summation would not."""
    acc = 0.0
    for v in values.ravel():
        acc += float(v)
    return acc / values.size


def mspe(truth: np.ndarray, forecasts: np.ndarray) -> float:
    """Mean squared prediction error over every (window, grid point) pair."""
    truth = np.asarray(truth, dtype=np.float64)
    forecasts = np.asarray(forecasts, dtype=np.float64)
    if truth.shape != forecasts.shape:
        raise ValueError("shape mismatch")
    return _seq_mean((truth - forecasts) ** 2)


def picp(truth: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> float:
    """Fraction of truth values inside the closed intervals [lower, upper]."""
    truth = np.asarray(truth, dtype=np.float64)
    lower = np.asarray(lower, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    if truth.shape != lower.shape or truth.shape != upper.shape:
        raise ValueError("shape mismatch")
    if np.any(lower > upper):
        raise ValueError("interval inversion: lower exceeds upper")
    inside = (truth >= lower) & (truth <= upper)
    return _seq_mean(inside.astype(np.float64))


def mpiw(lower: np.ndarray, upper: np.ndarray) -> float:
    """Mean prediction interval width."""
    lower = np.asarray(lower, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    if lower.shape != upper.shape:
        raise ValueError("shape mismatch")
    if np.any(lower > upper):
        raise ValueError("interval inversion: lower exceeds upper")
    return _seq_mean(upper - lower)


def persistence_forecast(w: HistoryWindow) -> np.ndarray:
    """The latest conditioning frame, unchanged."""
    if w.frames.shape[0] < 1:
        raise ValueError("empty window")
    return w.frames[-1]


@dataclass
class ModelMetrics:
    mspe: float
    picp: float | None
    mpiw: float | None


@dataclass
class MetricReport:
    models: dict
    n_instances: int
    n_windows: int
    n_grid: int

    def to_dict(self) -> dict:
        return {
            "counts": {
                "instances": self.n_instances,
                "windows": self.n_windows,
                "grid": self.n_grid,
            },
            "models": {
                name: {"mspe": m.mspe, "picp": m.picp, "mpiw": m.mpiw}
                for name, m in self.models.items()
            },
        }

    def to_json(self) -> bytes:
        return fio.dump_json(self.to_dict())

    def to_table(self) -> str:
        rows = [("model", "MSPE", "PICP", "MPIW")]
        for name, m in self.models.items():
            rows.append(
                (
                    name,
                    "%.6g" % m.mspe,
                    "-" if m.picp is None else "%.4f" % m.picp,
                    "-" if m.mpiw is None else "%.6g" % m.mpiw,
                )
            )
        widths = [max(len(r[c]) for r in rows) for c in range(4)]
        lines = []
        for r in rows:
            lines.append("  ".join(r[c].ljust(widths[c]) for c in range(4)))
        return "\n".join(lines)


def evaluate(forecasters: dict, windows_per_instance: list) -> MetricReport:
    """Compare forecasters over held-out windows.

    ``forecasters`` maps a model name to a callable taking a HistoryWindow
    and returning (mean, lower, upper); lower/upper may be None for models
    without intervals (persistence).  ``windows_per_instance`` is a list of
    per-instance window lists with targets attached.
    """
    all_windows = [w for inst in windows_per_instance for w in inst]
    if not all_windows:
        raise ValueError("no evaluation windows")
    n = all_windows[0].frames.shape[1]
    truth = np.stack([w.target for w in all_windows])
    models = {}
    for name, fc in forecasters.items():
        means = np.empty_like(truth)
        lowers = np.empty_like(truth)
        uppers = np.empty_like(truth)
        has_intervals = True
        for i, w in enumerate(all_windows):
            mean, lo, hi = fc(w)
            means[i] = mean
            if lo is None or hi is None:
                has_intervals = False
            else:
                lowers[i] = lo
                uppers[i] = hi
        models[name] = ModelMetrics(
            mspe=mspe(truth, means),
            picp=picp(truth, lowers, uppers) if has_intervals else None,
            mpiw=mpiw(lowers, uppers) if has_intervals else None,
        )
    return MetricReport(
        models=models,
        n_instances=len(windows_per_instance),
        n_windows=len(all_windows),
        n_grid=n,
    )

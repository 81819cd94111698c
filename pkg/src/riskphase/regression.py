"""Partial-correlation baselines: regress each stock on a mediating series and
measure the collectivity left in the residual correlations."""

from __future__ import annotations

import datetime as dt
import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ingest import ReturnMatrix, WindowView
from .matrices import SIGMA_FLOOR, correlation, mean_offdiagonal, standardize_rows

MEDIATOR_VAR_FLOOR = 1e-15


class MediatorKind(str, enum.Enum):
    AVERAGE = "avg"
    INDEX = "index"


class AlignmentError(ValueError):
    pass


@dataclass(frozen=True)
class MediatorSeries:
    values: np.ndarray
    kind: MediatorKind


@dataclass(frozen=True)
class RegressionFit:
    alpha: np.ndarray
    beta: np.ndarray
    residuals: np.ndarray
    degenerate: bool = False


def mediator_average(data: np.ndarray) -> MediatorSeries:
    """Cross-sectional mean return at each time step."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    return MediatorSeries(data.mean(axis=0), MediatorKind.AVERAGE)


def mediator_index(index: ReturnMatrix, dates: Sequence[dt.date]) -> MediatorSeries:
    """Slice of an index return series aligned to ``dates``.

    Every date must be present in the index series.
    """
    if index.n_assets != 1:
        raise ValueError(f"index series must have exactly one column, got {index.n_assets}")
    pos = {d: i for i, d in enumerate(index.dates)}
    absent = [d for d in dates if d not in pos]
    if absent:
        shown = ", ".join(d.isoformat() for d in absent[:5])
        more = f" (+{len(absent) - 5} more)" if len(absent) > 5 else ""
        raise AlignmentError(f"index has no returns for {shown}{more}")
    idx = np.fromiter((pos[d] for d in dates), dtype=int, count=len(dates))
    return MediatorSeries(index.values[0, idx], MediatorKind.INDEX)


def mediator_for_window(w: WindowView, kind: MediatorKind, index: ReturnMatrix | None = None) -> MediatorSeries:
    if kind is MediatorKind.AVERAGE:
        return mediator_average(w.data)
    if index is None:
        raise ValueError("index mediator needs an index return series")
    return mediator_index(index, w.dates)


def regress_residuals(data: np.ndarray, mediator: MediatorSeries) -> RegressionFit:
    """Per-row OLS of ``data`` on the mediator, slope = cov(G_i, I) / var(I).

    A mediator with variance below 1e-15 gives zero slopes and demeaned residuals,
    flagged as degenerate.
    """
    g = np.atleast_2d(np.asarray(data, dtype=float))
    m = np.asarray(mediator.values, dtype=float)
    if m.shape[-1] != g.shape[-1]:
        raise ValueError(f"mediator length {m.shape[-1]} does not match window length {g.shape[-1]}")
    g_mean = g.mean(axis=1)
    m_mean = m.mean()
    dm = m - m_mean
    var = float(np.mean(dm * dm))
    if var < MEDIATOR_VAR_FLOOR:
        beta = np.zeros(g.shape[0])
        return RegressionFit(g_mean, beta, g - g_mean[:, None], degenerate=True)
    dg = g - g_mean[:, None]
    beta = (dg @ dm) / (g.shape[1] * var)
    alpha = g_mean - beta * m_mean
    residuals = dg - np.outer(beta, dm)
    return RegressionFit(alpha, beta, residuals)


def residual_collectivity(fit: RegressionFit, sigma_floor: float = SIGMA_FLOOR) -> float | None:
    """Off-diagonal mean of the residual correlation matrix; None if all rows are degenerate."""
    m, degenerate = standardize_rows(fit.residuals, sigma_floor)
    if degenerate.all() or m.shape[0] < 2:
        return None
    return mean_offdiagonal(correlation(m))

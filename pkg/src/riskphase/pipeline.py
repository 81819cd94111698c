"""Window-by-window collectivity analysis with batched eigensolves."""

from __future__ import annotations

import datetime as dt
from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

import numpy as np

from .collectivity import CollectivityRecord, Thresholds, collectivity_measures, label_record
from .ingest import ReturnMatrix, WindowView, sliding_windows
from .matrices import SIGMA_FLOOR, correlation_matrix, covariance_matrix
from .spectral import SpectralDecomposition, eigendecompose_batch, remove_leading_modes, split_market_mode

CHUNK = 128


def _record(
    cov: SpectralDecomposition,
    corr: SpectralDecomposition,
    center_date: dt.date,
    modes: int,
    n_degenerate: int,
    th: Thresholds,
) -> CollectivityRecord:
    k = cov.dim
    higher = modes if 2 <= modes < k else None
    rec = collectivity_measures(
        split_market_mode(cov),
        split_market_mode(corr),
        cov.matrix,
        corr.matrix,
        center_date,
        cov_split_higher=remove_leading_modes(cov, higher) if higher else None,
        corr_split_higher=remove_leading_modes(corr, higher) if higher else None,
        market_vector=cov.top_vector,
        extra_flags=[f"degenerate_rows={n_degenerate}"] if n_degenerate else (),
    )
    return label_record(rec, th)


def analyze_window(
    data: np.ndarray,
    center_date: dt.date,
    modes: int = 2,
    thresholds: Thresholds = Thresholds(),
    sigma_floor: float = SIGMA_FLOOR,
) -> CollectivityRecord:
    """Full measure set for one K x T_sub window of returns."""
    return analyze_chunk(np.asarray(data, dtype=float)[None], [center_date], modes, thresholds, sigma_floor)[0]


def analyze_chunk(
    stack: np.ndarray,
    center_dates: Sequence[dt.date],
    modes: int = 2,
    thresholds: Thresholds = Thresholds(),
    sigma_floor: float = SIGMA_FLOOR,
    window_ids: Sequence[int] | None = None,
) -> list[CollectivityRecord]:
    cov = covariance_matrix(stack)
    corr, degenerate = correlation_matrix(stack, sigma_floor)
    cov_d = eigendecompose_batch(cov, window_ids)
    corr_d = eigendecompose_batch(corr, window_ids)
    return [
        _record(cd, rd, date, modes, int(deg.sum()), thresholds)
        for cd, rd, date, deg in zip(cov_d, corr_d, center_dates, degenerate)
    ]


def analyze_returns(
    returns: ReturnMatrix,
    window: int = 42,
    stride: int = 1,
    modes: int = 2,
    thresholds: Thresholds = Thresholds(),
    threads: int = 1,
    sigma_floor: float = SIGMA_FLOOR,
    chunk: int = CHUNK,
) -> list[CollectivityRecord]:
    """Records for every sliding window, in window order regardless of ``threads``."""
    if returns.n_assets < 2:
        raise ValueError("need at least two instruments")
    views = sliding_windows(returns, window, stride)
    chunks = [views[i : i + chunk] for i in range(0, len(views), chunk)]

    def run(part: list[WindowView]) -> list[CollectivityRecord]:
        stack = np.stack([w.data for w in part])
        return analyze_chunk(
            stack,
            [w.center_date for w in part],
            modes,
            thresholds,
            sigma_floor,
            [w.index for w in part],
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, chunks))
    else:
        results = [run(c) for c in chunks]
    return [rec for part in results for rec in part]

"""Collectivity measures for financial covariance and correlation matrices.

Market-mode removal by spectral decomposition, absolute and relative
collectivities per sliding window, criterion labels and risk-phase data.
"""

__version__ = "0.1.0"

from .collectivity import CollectivityRecord, Label, Thresholds, classify, collectivity_measures
from .ingest import PricePanel, ReturnMatrix, WindowView, log_returns, parse_price_table, sliding_windows
from .matrices import (
    correlation,
    correlation_matrix,
    covariance,
    covariance_matrix,
    demean_rows,
    mean_offdiagonal,
    mean_with_diagonal,
    standardize_rows,
)
from .pipeline import analyze_returns, analyze_window
from .spectral import (
    ModeSplit,
    SpectralDecomposition,
    eigendecompose,
    ipr,
    remove_leading_modes,
    split_market_mode,
)

__all__ = [
    "CollectivityRecord",
    "Label",
    "ModeSplit",
    "PricePanel",
    "ReturnMatrix",
    "SpectralDecomposition",
    "Thresholds",
    "WindowView",
    "analyze_returns",
    "analyze_window",
    "classify",
    "collectivity_measures",
    "correlation",
    "correlation_matrix",
    "covariance",
    "covariance_matrix",
    "demean_rows",
    "eigendecompose",
    "ipr",
    "log_returns",
    "mean_offdiagonal",
    "mean_with_diagonal",
    "parse_price_table",
    "remove_leading_modes",
    "sliding_windows",
    "split_market_mode",
    "standardize_rows",
]

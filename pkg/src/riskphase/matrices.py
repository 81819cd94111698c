"""Standard covariance and correlation matrices and their mean values.

Every function accepts a single data matrix ``(K, T)`` or a stack ``(..., K, T)``.
Normalisation is 1/T throughout, with no Bessel correction.
"""

from __future__ import annotations

import numpy as np

SIGMA_FLOOR = 1e-12


def demean_rows(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x - x.mean(axis=-1, keepdims=True)


def standardize_rows(x: np.ndarray, sigma_floor: float = SIGMA_FLOOR) -> tuple[np.ndarray, np.ndarray]:
    """Rows scaled to zero mean and unit (1/T) standard deviation.

    Returns ``(m, degenerate)``; rows whose standard deviation is below
    ``sigma_floor`` are flagged in the boolean ``degenerate`` mask and set to zero.
    """
    a = demean_rows(x)
    std = np.sqrt(np.mean(a * a, axis=-1, keepdims=True))
    degenerate = std[..., 0] < sigma_floor
    safe = np.where(std < sigma_floor, 1.0, std)
    m = np.where(std < sigma_floor, 0.0, a / safe)
    return m, degenerate


def _gram(a: np.ndarray) -> np.ndarray:
    s = a @ np.swapaxes(a, -1, -2) / a.shape[-1]
    # exact symmetry so dyadic splits and sign flips stay bit-stable
    return 0.5 * (s + np.swapaxes(s, -1, -2))


def covariance(a: np.ndarray) -> np.ndarray:
    """Sigma = A A^T / T for row-demeaned ``a``."""
    return _gram(np.asarray(a, dtype=float))


def correlation(m: np.ndarray) -> np.ndarray:
    """C = M M^T / T for standardized ``m``.

    Degenerate (all-zero) rows give a zero row and column; the whole diagonal is
    set to exactly 1.
    """
    c = _gram(np.asarray(m, dtype=float))
    k = c.shape[-1]
    idx = np.arange(k)
    c[..., idx, idx] = 1.0
    return c


def covariance_matrix(x: np.ndarray) -> np.ndarray:
    return covariance(demean_rows(x))


def correlation_matrix(x: np.ndarray, sigma_floor: float = SIGMA_FLOOR) -> tuple[np.ndarray, np.ndarray]:
    m, degenerate = standardize_rows(x, sigma_floor)
    return correlation(m), degenerate


def mean_with_diagonal(s: np.ndarray) -> np.ndarray | float:
    """(1/K^2) times the sum of all entries, diagonal included."""
    s = np.asarray(s, dtype=float)
    k = s.shape[-1]
    out = s.sum(axis=(-2, -1)) / (k * k)
    return float(out) if out.ndim == 0 else out


def mean_offdiagonal(s: np.ndarray) -> np.ndarray | float:
    """Mean of the K(K-1) off-diagonal entries."""
    s = np.asarray(s, dtype=float)
    k = s.shape[-1]
    if k < 2:
        raise ValueError("off-diagonal mean needs K >= 2")
    total = s.sum(axis=(-2, -1)) - np.trace(s, axis1=-2, axis2=-1)
    out = total / (k * (k - 1))
    return float(out) if out.ndim == 0 else out

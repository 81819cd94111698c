"""Symmetric eigendecomposition, leading-mode removal and inverse participation ratio."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PSD_RTOL = 1e-10
TIE_RTOL = 1e-12


class SpectralError(RuntimeError):
    """Eigensolver failure; ``window`` identifies the offending matrix when known."""

    def __init__(self, message: str, window=None):
        if window is not None:
            message = f"window {window}: {message}"
        super().__init__(message)
        self.window = window


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenpairs of ``matrix`` with eigenvalues ascending; column i of
    ``eigenvectors`` belongs to ``eigenvalues[i]``, so the market mode is last."""

    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def top_vector(self) -> np.ndarray:
        return self.eigenvectors[:, -1]

    def clamped_eigenvalues(self) -> np.ndarray:
        """Eigenvalues with small negative round-off (above -1e-10 * max|S|) set to 0."""
        scale = float(np.max(np.abs(self.matrix))) if self.matrix.size else 0.0
        ev = self.eigenvalues.copy()
        ev[(ev < 0) & (ev >= -PSD_RTOL * scale)] = 0.0
        return ev


@dataclass(frozen=True)
class ModeSplit:
    leading: np.ndarray
    residual: np.ndarray
    removed_count: int
    degenerate: bool = False


def eigendecompose(s: np.ndarray, window=None) -> SpectralDecomposition:
    s = np.asarray(s, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {s.shape}")
    try:
        w, v = np.linalg.eigh(s)
    except np.linalg.LinAlgError as exc:
        raise SpectralError(f"eigensolver did not converge ({exc})", window) from exc
    return SpectralDecomposition(s, w, v)


def eigendecompose_batch(stack: np.ndarray, windows=None) -> list[SpectralDecomposition]:
    """Decompose a ``(n, K, K)`` stack with one LAPACK call per batch.

    Falls back to per-matrix solves if the batch fails so the error can name
    the offending window.
    """
    stack = np.asarray(stack, dtype=float)
    try:
        w, v = np.linalg.eigh(stack)
    except np.linalg.LinAlgError:
        ids = windows if windows is not None else range(len(stack))
        return [eigendecompose(s, window=i) for s, i in zip(stack, ids)]
    return [SpectralDecomposition(stack[i], w[i], v[i]) for i in range(len(stack))]


def _is_tied(ev: np.ndarray, m: int) -> bool:
    k = ev.shape[0]
    if m >= k:
        return False
    upper, lower = ev[k - m], ev[k - m - 1]
    return bool(upper - lower < TIE_RTOL * abs(upper))


def remove_leading_modes(d: SpectralDecomposition, m: int) -> ModeSplit:
    """Subtract the ``m`` largest dyadics kappa_i u_i u_i^T from the matrix.

    ``degenerate`` is set when the m-th and (m+1)-th largest eigenvalues tie, in
    which case the split depends on the basis chosen inside the eigenspace.
    """
    k = d.dim
    if not 1 <= m < k:
        raise ValueError(f"mode count must satisfy 1 <= m < K={k}, got {m}")
    ev = d.clamped_eigenvalues()
    u = d.eigenvectors[:, k - m :]
    leading = (u * ev[k - m :]) @ u.T
    leading = 0.5 * (leading + leading.T)
    residual = d.matrix - leading
    return ModeSplit(leading, residual, m, _is_tied(d.eigenvalues, m))


def split_market_mode(d: SpectralDecomposition) -> ModeSplit:
    if d.dim < 2:
        raise ValueError("market-mode split needs K >= 2")
    return remove_leading_modes(d, 1)


def ipr(v: np.ndarray, tol: float = 1e-10) -> float:
    """Inverse participation ratio sum_j v_j^4 of a unit vector: 1/K if extended, 1 if localized."""
    v = np.asarray(v, dtype=float)
    norm = float(np.sqrt(np.dot(v, v)))
    if abs(norm - 1.0) > tol:
        raise ValueError(f"vector is not normalized (norm {norm!r})")
    v2 = v * v
    return float(np.sum(v2 * v2))

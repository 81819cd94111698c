"""Random-matrix validation of the collectivity measures.

Sample covariance matrices are drawn as ``(1/T) A A^T`` with ``A = L Z``, ``Z`` a
K x T standard-normal matrix and ``L`` the symmetric square root of a block
population covariance. Randomness comes from numpy's PCG64 generator seeded
through ``SeedSequence``; chunks of samples use spawned child seeds so results
do not depend on how the work is scheduled.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .matrices import mean_with_diagonal

SAMPLE_CHUNK = 500
PSD_TOL = 1e-12


class NotPSDError(ValueError):
    def __init__(self, min_eigenvalue: float):
        super().__init__(f"population covariance is not positive semidefinite (smallest eigenvalue {min_eigenvalue:.6g})")
        self.min_eigenvalue = min_eigenvalue


@dataclass(frozen=True)
class BlockSpec:
    block_sizes: tuple[int, ...]
    block_values: tuple[float, ...]
    market_offset: float = 0.0
    diagonal_value: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "block_sizes", tuple(int(s) for s in self.block_sizes))
        values = self.block_values
        if np.isscalar(values):
            values = (values,) * len(self.block_sizes)
        object.__setattr__(self, "block_values", tuple(float(v) for v in values))
        if not self.block_sizes or any(s < 1 for s in self.block_sizes):
            raise ValueError("block sizes must be positive")
        if len(self.block_values) != len(self.block_sizes):
            raise ValueError("need one value per block")

    @property
    def dim(self) -> int:
        return sum(self.block_sizes)

    def block_ids(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.block_sizes)), self.block_sizes)

    @classmethod
    def equal_blocks(cls, k: int, n_blocks: int, value: float, market_offset: float = 0.0, diagonal_value: float = 1.0) -> BlockSpec:
        """``n_blocks`` blocks of near-equal size summing to ``k``."""
        base, extra = divmod(k, n_blocks)
        sizes = [base + (i < extra) for i in range(n_blocks)]
        return cls(tuple(sizes), (value,) * n_blocks, market_offset, diagonal_value)


def build_population(spec: BlockSpec) -> np.ndarray:
    """Block-diagonal population covariance overlaid with a uniform market offset."""
    ids = spec.block_ids()
    same = ids[:, None] == ids[None, :]
    values = np.asarray(spec.block_values)[ids]
    sigma0 = np.where(same, values[:, None], 0.0) + spec.market_offset
    np.fill_diagonal(sigma0, spec.diagonal_value)
    lowest = float(np.linalg.eigvalsh(sigma0)[0])
    if lowest < -PSD_TOL * max(1.0, float(np.max(np.abs(sigma0)))):
        raise NotPSDError(lowest)
    return sigma0


def symmetric_sqrt(sigma0: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(sigma0)
    root = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T
    return 0.5 * (root + root.T)


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_wishart(sigma0: np.ndarray, t: int, seed=None, root: np.ndarray | None = None) -> np.ndarray:
    """One sample covariance (1/T) A A^T with A = sqrt(sigma0) Z."""
    if t < 1:
        raise ValueError("T must be positive")
    root = symmetric_sqrt(sigma0) if root is None else root
    z = _rng(seed).standard_normal((root.shape[0], t))
    a = root @ z
    s = a @ a.T / t
    return 0.5 * (s + s.T)


def sample_wishart_batch(sigma0: np.ndarray, t: int, n: int, seed=None, root: np.ndarray | None = None) -> np.ndarray:
    """``n`` samples stacked as ``(n, K, K)``."""
    root = symmetric_sqrt(sigma0) if root is None else root
    z = _rng(seed).standard_normal((n, root.shape[0], t))
    a = root @ z
    s = a @ np.swapaxes(a, -1, -2) / t
    return 0.5 * (s + np.swapaxes(s, -1, -2))


@dataclass
class EnsembleReport:
    sample_count: int
    population: np.ndarray
    mean: np.ndarray
    std_error: np.ndarray
    max_abs_deviation: float
    max_abs_z: float
    mean_cov_estimate: float
    mean_cov_std_error: float
    mean_cov_analytic: float

    @property
    def mean_cov_z(self) -> float:
        return (self.mean_cov_estimate - self.mean_cov_analytic) / self.mean_cov_std_error

    def zscores(self) -> np.ndarray:
        """Upper-triangle (diagonal included) z-scores of the elementwise mean."""
        iu = np.triu_indices(self.population.shape[0])
        return ((self.mean - self.population) / self.std_error)[iu]


def _kahan_sum(arrays) -> np.ndarray:
    """Elementwise compensated sum of equally shaped arrays."""
    total = comp = None
    for a in arrays:
        if total is None:
            total, comp = np.array(a, dtype=float), np.zeros_like(a, dtype=float)
            continue
        y = a - comp
        s = total + y
        comp = (s - total) - y
        total = s
    return total


def ensemble_mean_check(spec: BlockSpec, t: int, n_samples: int, seed=0) -> EnsembleReport:
    """Monte Carlo estimate of the ensemble mean of the sample covariance.

    Each chunk contributes its own mean and centred second moment. Chunk means
    are combined with compensated summation and the spread with the exact
    within/between split, so the result does not depend on chunk scheduling
    and avoids the cancellation of a raw sum-of-squares variance.
    """
    if n_samples < 2:
        raise ValueError("ensemble check needs at least two samples")
    sigma0 = build_population(spec)
    root = symmetric_sqrt(sigma0)
    n_chunks = -(-n_samples // SAMPLE_CHUNK)
    children = np.random.SeedSequence(seed).spawn(n_chunks)

    counts, means, m2s, scalars = [], [], [], []
    for i, child in enumerate(children):
        n = min(SAMPLE_CHUNK, n_samples - i * SAMPLE_CHUNK)
        stack = sample_wishart_batch(sigma0, t, n, np.random.default_rng(child), root)
        mu = stack.mean(axis=0)
        counts.append(n)
        means.append(mu)
        m2s.append(((stack - mu) ** 2).sum(axis=0))
        scalars.append(mean_with_diagonal(stack))

    n = n_samples
    mean = _kahan_sum(c * mu for c, mu in zip(counts, means)) / n
    m2 = _kahan_sum(m2s) + _kahan_sum(c * (mu - mean) ** 2 for c, mu in zip(counts, means))
    var = m2 / (n - 1)
    se = np.sqrt(var / n)
    scalar = np.concatenate(scalars)
    dev = mean - sigma0
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, dev / se, 0.0)
    return EnsembleReport(
        sample_count=n,
        population=sigma0,
        mean=mean,
        std_error=se,
        max_abs_deviation=float(np.max(np.abs(dev))),
        max_abs_z=float(np.max(np.abs(z))),
        mean_cov_estimate=float(scalar.mean()),
        mean_cov_std_error=float(scalar.std(ddof=1) / np.sqrt(n)),
        mean_cov_analytic=mean_with_diagonal(sigma0),
    )


def independent_zscores(spec: BlockSpec, t: int, n_samples: int, seed=0) -> np.ndarray:
    """One z-score per upper-triangle entry, each from its own independent ensemble.

    Entries of a single sample matrix are correlated, so z-scores pooled from one
    report are not independent draws; this variant is suitable for a
    goodness-of-fit test against the standard normal.
    """
    k = spec.dim
    out = []
    for e, (i, j) in enumerate(zip(*np.triu_indices(k))):
        report = ensemble_mean_check(spec, t, n_samples, seed=[seed, e])
        out.append((report.mean[i, j] - report.population[i, j]) / report.std_error[i, j])
    return np.array(out)


def off_block_mean(sample: np.ndarray, spec: BlockSpec) -> float | None:
    """Mean of entries linking different blocks, minus the market offset; None if there are none."""
    ids = spec.block_ids()
    mask = ids[:, None] != ids[None, :]
    if not mask.any():
        return None
    return float(sample[mask].mean() - spec.market_offset)


@dataclass
class SelfAveragingReport:
    dims: list[int]
    t: int
    per_seed: dict[int, list[float | None]] = field(default_factory=dict)

    def median_abs(self, k: int) -> float | None:
        vals = [abs(v) for v in self.per_seed[k] if v is not None]
        return float(np.median(vals)) if vals else None

    def medians(self) -> list[float | None]:
        return [self.median_abs(k) for k in self.dims]

    def decreasing(self) -> bool:
        meds = self.medians()
        if any(m is None for m in meds):
            return False
        return all(b < a for a, b in zip(meds, meds[1:]))


def self_averaging_check(
    dims: Sequence[int],
    t: int = 42,
    seeds: Sequence[int] = tuple(range(50)),
    block_value: float = 0.5,
    n_blocks: int = 4,
    market_offset: float = 0.0,
    diagonal_value: float = 1.0,
) -> SelfAveragingReport:
    """Off-block mean of one sampled matrix per (K, seed) for growing K."""
    dims = list(dims)
    if any(b <= a for a, b in zip(dims, dims[1:])):
        raise ValueError("dimensions must be strictly increasing")
    report = SelfAveragingReport(dims, t)
    for k in dims:
        spec = BlockSpec.equal_blocks(k, min(n_blocks, k), block_value, market_offset, diagonal_value)
        sigma0 = build_population(spec)
        root = symmetric_sqrt(sigma0)
        report.per_seed[k] = [
            off_block_mean(sample_wishart(sigma0, t, np.random.default_rng([seed, k]), root), spec)
            for seed in seeds
        ]
    return report


def load_ensemble_config(path: str | Path) -> dict:
    """Read a JSON ensemble config.

    Keys: ``block_sizes``, ``block_values`` (list or scalar), ``market_offset``,
    ``diagonal_value``, ``T``, ``n_samples``, ``seed``.
    """
    cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    known = {"block_sizes", "block_values", "market_offset", "diagonal_value", "T", "n_samples", "seed"}
    unknown = set(cfg) - known
    if unknown:
        raise ValueError(f"unknown ensemble config keys: {', '.join(sorted(unknown))}")
    return cfg


def spec_from_config(cfg: dict) -> BlockSpec:
    return BlockSpec(
        tuple(cfg.get("block_sizes", (3, 3))),
        cfg.get("block_values", 0.4),
        float(cfg.get("market_offset", 0.1)),
        float(cfg.get("diagonal_value", 1.0)),
    )

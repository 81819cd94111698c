"""Absolute and relative collectivity measures and the three window criteria."""

from __future__ import annotations

import csv
import datetime as dt
import enum
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .matrices import mean_offdiagonal, mean_with_diagonal
from .spectral import ModeSplit, ipr

UNDEFINED_RTOL = 1e-15

COLUMNS = (
    "center_date",
    "cov_mean_offdiag",
    "cov_BLE",
    "cov_B",
    "rel_cov_BLE",
    "corr_mean_offdiag",
    "cov_LLE",
    "cov_L",
    "rel_corr_LLE",
    "cov_mean_withdiag",
    "corr_mean_withdiag",
    "cov_B2",
    "cov_L2",
    "ipr_market",
    "cov_label",
    "corr_label",
    "flags",
)


class Label(str, enum.Enum):
    HIGH_COL = "HighCol"
    LOW_COL = "LCol"
    HIGH_VAL = "HighVal"
    NONE = "None"

    @property
    def color(self) -> str:
        return {"HighCol": "blue", "LCol": "red", "HighVal": "green", "None": "black"}[self.value]


@dataclass(frozen=True)
class Thresholds:
    high_rel: float = 0.997
    low_rel: float = 0.8
    abs_ble_floor: float = 4.1e-4

    def __post_init__(self):
        if not 0 < self.low_rel < self.high_rel < 1:
            raise ValueError("thresholds need 0 < low < high < 1")
        if self.abs_ble_floor <= 0:
            raise ValueError("absolute floor must be positive")

    @classmethod
    def parse(cls, text: str) -> Thresholds:
        """Parse ``high=0.997,low=0.8,floor=4.1e-4``; omitted keys keep defaults."""
        keys = {"high": "high_rel", "low": "low_rel", "floor": "abs_ble_floor"}
        kwargs = {}
        for part in filter(None, (p.strip() for p in text.split(","))):
            name, sep, value = part.partition("=")
            if not sep or name.strip() not in keys:
                raise ValueError(f"bad threshold item {part!r}")
            kwargs[keys[name.strip()]] = float(value)
        return cls(**kwargs)


@dataclass(frozen=True)
class CollectivityRecord:
    """Per-window collectivity measures. Relative and optional fields are None when undefined."""

    center_date: dt.date
    cov_mean_offdiag: float
    cov_BLE: float
    cov_B: float
    rel_cov_BLE: float | None
    corr_mean_offdiag: float
    cov_LLE: float
    cov_L: float
    rel_corr_LLE: float | None
    cov_mean_withdiag: float
    corr_mean_withdiag: float
    cov_B2: float | None = None
    cov_L2: float | None = None
    ipr_market: float | None = None
    cov_label: Label = Label.NONE
    corr_label: Label = Label.NONE
    flags: tuple[str, ...] = field(default_factory=tuple)

    @property
    def rel_cov_B(self) -> float | None:
        return None if self.rel_cov_BLE is None else self.cov_B / self.cov_mean_offdiag

    @property
    def rel_corr_L(self) -> float | None:
        return None if self.rel_corr_LLE is None else self.cov_L / self.corr_mean_offdiag


def _ratio(num: float, den: float) -> float | None:
    if abs(den) < UNDEFINED_RTOL:
        return None
    return num / den


def collectivity_measures(
    cov_split: ModeSplit,
    corr_split: ModeSplit,
    cov: np.ndarray,
    corr: np.ndarray,
    center_date: dt.date,
    cov_split_higher: ModeSplit | None = None,
    corr_split_higher: ModeSplit | None = None,
    market_vector: np.ndarray | None = None,
    extra_flags: Iterable[str] = (),
) -> CollectivityRecord:
    """Off-diagonal means of the full matrices and their market/residual parts.

    The ``*_higher`` splits (more than one leading mode removed) fill
    ``cov_B2`` / ``cov_L2``; ``market_vector`` fills ``ipr_market``.
    """
    if cov.shape != corr.shape:
        raise ValueError(f"covariance {cov.shape} and correlation {corr.shape} differ in shape")
    flags = list(extra_flags)

    cov_all = mean_offdiagonal(cov)
    cov_ble = mean_offdiagonal(cov_split.leading)
    cov_b = mean_offdiagonal(cov_split.residual)
    corr_all = mean_offdiagonal(corr)
    cov_lle = mean_offdiagonal(corr_split.leading)
    cov_l = mean_offdiagonal(corr_split.residual)

    rel_cov = _ratio(cov_ble, cov_all)
    rel_corr = _ratio(cov_lle, corr_all)
    if rel_cov is None:
        flags.append("cov_rel_undefined")
    elif cov_all < 0:
        flags.append("cov_negative_mean")
    if rel_corr is None:
        flags.append("corr_rel_undefined")
    elif corr_all < 0:
        flags.append("corr_negative_mean")
    if cov_split.degenerate:
        flags.append("cov_top_tie")
    if corr_split.degenerate:
        flags.append("corr_top_tie")

    return CollectivityRecord(
        center_date=center_date,
        cov_mean_offdiag=cov_all,
        cov_BLE=cov_ble,
        cov_B=cov_b,
        rel_cov_BLE=rel_cov,
        corr_mean_offdiag=corr_all,
        cov_LLE=cov_lle,
        cov_L=cov_l,
        rel_corr_LLE=rel_corr,
        cov_mean_withdiag=mean_with_diagonal(cov),
        corr_mean_withdiag=mean_with_diagonal(corr),
        cov_B2=None if cov_split_higher is None else mean_offdiagonal(cov_split_higher.residual),
        cov_L2=None if corr_split_higher is None else mean_offdiagonal(corr_split_higher.residual),
        ipr_market=None if market_vector is None else ipr(market_vector),
        flags=tuple(flags),
    )


def classify_values(
    rel_cov: float | None,
    cov_ble: float,
    rel_corr: float | None,
    th: Thresholds = Thresholds(),
) -> tuple[Label, Label]:
    if rel_cov is None:
        cov_label = Label.NONE
    elif rel_cov > th.high_rel:
        cov_label = Label.HIGH_COL
    elif rel_cov < th.low_rel:
        cov_label = Label.LOW_COL
    elif cov_ble > th.abs_ble_floor:
        cov_label = Label.HIGH_VAL
    else:
        cov_label = Label.NONE

    if rel_corr is None:
        corr_label = Label.NONE
    elif rel_corr > th.high_rel:
        corr_label = Label.HIGH_COL
    elif rel_corr < th.low_rel:
        corr_label = Label.LOW_COL
    else:
        corr_label = Label.NONE
    return cov_label, corr_label


def classify(rec: CollectivityRecord, th: Thresholds = Thresholds()) -> tuple[Label, Label]:
    """(covariance label, correlation label); the green HighVal label exists on the covariance side only."""
    return classify_values(rec.rel_cov_BLE, rec.cov_BLE, rec.rel_corr_LLE, th)


def label_record(rec: CollectivityRecord, th: Thresholds = Thresholds()) -> CollectivityRecord:
    cov_label, corr_label = classify(rec, th)
    return replace(rec, cov_label=cov_label, corr_label=corr_label)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, Label):
        return value.value
    if isinstance(value, dt.date):
        return value.isoformat()
    if isinstance(value, tuple):
        return ";".join(value)
    if isinstance(value, float):
        return "" if math.isnan(value) else repr(value)
    return str(value)


def time_evolution(records: Sequence[CollectivityRecord]) -> list[dict[str, str]]:
    """One string row per record in the fixed output column order."""
    for a, b in zip(records, records[1:]):
        if b.center_date < a.center_date:
            raise ValueError("records must be in chronological order")
    return [{col: _fmt(getattr(rec, col)) for col in COLUMNS} for rec in records]


def write_records_csv(path: str | Path, records: Sequence[CollectivityRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(time_evolution(records))


def _opt(text: str) -> float | None:
    return None if text == "" else float(text)


def read_records_csv(path: str | Path) -> list[CollectivityRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"record file lacks columns: {', '.join(sorted(missing))}")
        out = []
        for row in reader:
            out.append(
                CollectivityRecord(
                    center_date=dt.date.fromisoformat(row["center_date"]),
                    cov_mean_offdiag=float(row["cov_mean_offdiag"]),
                    cov_BLE=float(row["cov_BLE"]),
                    cov_B=float(row["cov_B"]),
                    rel_cov_BLE=_opt(row["rel_cov_BLE"]),
                    corr_mean_offdiag=float(row["corr_mean_offdiag"]),
                    cov_LLE=float(row["cov_LLE"]),
                    cov_L=float(row["cov_L"]),
                    rel_corr_LLE=_opt(row["rel_corr_LLE"]),
                    cov_mean_withdiag=float(row["cov_mean_withdiag"]),
                    corr_mean_withdiag=float(row["corr_mean_withdiag"]),
                    cov_B2=_opt(row["cov_B2"]),
                    cov_L2=_opt(row["cov_L2"]),
                    ipr_market=_opt(row["ipr_market"]),
                    cov_label=Label(row["cov_label"] or "None"),
                    corr_label=Label(row["corr_label"] or "None"),
                    flags=tuple(f for f in row["flags"].split(";") if f),
                )
            )
        return out

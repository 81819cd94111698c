"""Price table parsing, log returns and sliding windows over the return matrix."""

from __future__ import annotations

import csv
import datetime as dt
import io
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

MISSING_TOKENS = frozenset({"", "na", "nan", "n/a", "null", "none", "#n/a", "-"})


class IngestError(ValueError):
    """Raised for malformed price input. ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


@dataclass(frozen=True)
class PricePanel:
    """Aligned close prices, shape (K, number of dates). Missing prices are NaN."""

    tickers: list[str]
    dates: list[dt.date]
    prices: np.ndarray
    diagnostics: list[str] = field(default_factory=list)

    def __post_init__(self):
        # a fixed memory layout keeps BLAS summation order, and so the output bits, format independent
        object.__setattr__(self, "prices", np.ascontiguousarray(self.prices, dtype=float))
        if len(set(self.tickers)) != len(self.tickers):
            raise IngestError("duplicate tickers")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise IngestError("dates must be strictly increasing")
        if self.prices.shape != (len(self.tickers), len(self.dates)):
            raise IngestError(
                f"price grid shape {self.prices.shape} does not match "
                f"{len(self.tickers)} tickers x {len(self.dates)} dates"
            )
        present = self.prices[~np.isnan(self.prices)]
        if np.any(present <= 0):
            raise IngestError("prices must be positive")

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.prices)

    def select(self, tickers: list[str]) -> PricePanel:
        idx = [self.tickers.index(t) for t in tickers]
        return PricePanel(list(tickers), list(self.dates), self.prices[idx], list(self.diagnostics))


@dataclass(frozen=True)
class ReturnMatrix:
    """K x T_tot log returns. ``dates[t]`` is the date on which return ``t`` is realised."""

    tickers: list[str]
    dates: list[dt.date]
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.ascontiguousarray(self.values, dtype=float))

    @property
    def n_assets(self) -> int:
        return self.values.shape[0]

    @property
    def n_times(self) -> int:
        return self.values.shape[1]

    def select(self, tickers: list[str]) -> ReturnMatrix:
        idx = [self.tickers.index(t) for t in tickers]
        return ReturnMatrix(list(tickers), list(self.dates), self.values[idx])


@dataclass(frozen=True)
class WindowView:
    """A read-only T_sub-long slice of a :class:`ReturnMatrix`.

    ``start`` is a 0-based column offset. The center date is the return date at
    offset ``length // 2`` inside the window (the 22nd day of a 42-day window).
    """

    returns: ReturnMatrix
    index: int
    start: int
    length: int

    @property
    def stop(self) -> int:
        return self.start + self.length

    @property
    def data(self) -> np.ndarray:
        view = self.returns.values[:, self.start : self.stop]
        view.flags.writeable = False
        return view

    @property
    def dates(self) -> list[dt.date]:
        return self.returns.dates[self.start : self.stop]

    @property
    def center_date(self) -> dt.date:
        return self.returns.dates[self.start + self.length // 2]


def _parse_date(text: str, line: int) -> dt.date:
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError:
        raise IngestError(f"unparsable date {text!r}", line) from None


def _parse_price(text: str, line: int) -> float:
    token = text.strip()
    if token.lower() in MISSING_TOKENS:
        return math.nan
    try:
        value = float(token)
    except ValueError:
        raise IngestError(f"unparsable price {token!r}", line) from None
    if math.isnan(value):
        return math.nan
    if math.isinf(value):
        raise IngestError(f"non-finite price {token!r}", line)
    return value


def _sniff_delimiter(text: str) -> str:
    first = text.lstrip("﻿").splitlines()[0] if text.strip() else ""
    return "\t" if first.count("\t") > first.count(",") else ","


def _rows(text: str, delimiter: str | None):
    text = text.lstrip("﻿")
    delimiter = delimiter or _sniff_delimiter(text)
    reader = csv.reader(io.StringIO(text), delimiter=delimiter)
    for line_no, row in enumerate(reader, start=1):
        if not row or all(not cell.strip() for cell in row):
            continue
        yield line_no, row


def _parse_wide(text: str, delimiter: str | None) -> PricePanel:
    rows = _rows(text, delimiter)
    try:
        _, header = next(rows)
    except StopIteration:
        raise IngestError("empty price table") from None
    tickers = [h.strip() for h in header[1:]]
    if not tickers:
        raise IngestError("header names no ticker columns", 1)
    if len(set(tickers)) != len(tickers):
        raise IngestError("duplicate ticker columns in header", 1)

    by_date: dict[dt.date, list[float]] = {}
    diagnostics: list[str] = []
    for line, row in rows:
        if len(row) != len(header):
            raise IngestError(f"expected {len(header)} fields, found {len(row)}", line)
        date = _parse_date(row[0], line)
        if date in by_date:
            raise IngestError(f"duplicate date {date.isoformat()}", line)
        values = [_parse_price(cell, line) for cell in row[1:]]
        bad = [t for t, v in zip(tickers, values) if v <= 0]
        if bad:
            msg = f"line {line}: non-positive price for {', '.join(bad)} on {date.isoformat()}; row rejected"
            log.warning(msg)
            diagnostics.append(msg)
            continue
        by_date[date] = values

    dates = sorted(by_date)
    prices = np.array([by_date[d] for d in dates], dtype=float).T.reshape(len(tickers), len(dates))
    return PricePanel(tickers, dates, prices, diagnostics)


def _parse_long(text: str, delimiter: str | None) -> PricePanel:
    rows = _rows(text, delimiter)
    try:
        _, header = next(rows)
    except StopIteration:
        raise IngestError("empty price table") from None
    names = [h.strip().lower() for h in header]
    try:
        i_date, i_tick, i_close = names.index("date"), names.index("ticker"), names.index("close")
    except ValueError:
        raise IngestError("long format needs date, ticker and close columns", 1) from None

    cells: dict[tuple[dt.date, str], float] = {}
    tickers: list[str] = []
    seen_tickers: set[str] = set()
    diagnostics: list[str] = []
    for line, row in rows:
        if len(row) != len(header):
            raise IngestError(f"expected {len(header)} fields, found {len(row)}", line)
        date = _parse_date(row[i_date], line)
        ticker = row[i_tick].strip()
        if not ticker:
            raise IngestError("empty ticker", line)
        if (date, ticker) in cells:
            raise IngestError(f"duplicate date {date.isoformat()} for {ticker}", line)
        if ticker not in seen_tickers:
            seen_tickers.add(ticker)
            tickers.append(ticker)
        value = _parse_price(row[i_close], line)
        if value <= 0:
            msg = f"line {line}: non-positive price for {ticker} on {date.isoformat()}; row rejected"
            log.warning(msg)
            diagnostics.append(msg)
            value = math.nan
        cells[(date, ticker)] = value

    dates = sorted({d for d, _ in cells})
    col = {d: j for j, d in enumerate(dates)}
    row_of = {t: i for i, t in enumerate(tickers)}
    prices = np.full((len(tickers), len(dates)), np.nan)
    for (date, ticker), value in cells.items():
        prices[row_of[ticker], col[date]] = value
    return PricePanel(tickers, dates, prices, diagnostics)


def parse_price_table(text: str, fmt: str = "wide", delimiter: str | None = None) -> PricePanel:
    """Parse a comma- or tab-delimited price table.

    ``fmt="wide"`` expects ``date,TICK1,TICK2,...``; ``fmt="long"`` expects
    ``date,ticker,close`` rows. Blank and NA cells become missing prices. A wide
    row with a non-positive price is dropped and reported in ``diagnostics``.
    """
    if fmt == "wide":
        return _parse_wide(text, delimiter)
    if fmt == "long":
        return _parse_long(text, delimiter)
    raise ValueError(f"unknown format {fmt!r}")


def read_price_table(path: str | Path, fmt: str = "wide") -> PricePanel:
    return parse_price_table(Path(path).read_text(encoding="utf-8"), fmt=fmt)


def log_returns(panel: PricePanel) -> ReturnMatrix:
    """Daily log returns; a return touching a missing price is set to exactly 0."""
    if len(panel.dates) < 2:
        raise IngestError("need at least two dates to form returns")
    p = panel.prices
    with np.errstate(invalid="ignore", divide="ignore"):
        g = np.log(p[:, 1:]) - np.log(p[:, :-1])
    g[np.isnan(p[:, 1:]) | np.isnan(p[:, :-1])] = 0.0
    return ReturnMatrix(list(panel.tickers), list(panel.dates[1:]), g)


def window_count(n_times: int, length: int, stride: int = 1) -> int:
    if length < 1 or stride < 1:
        raise ValueError("window length and stride must be positive")
    if n_times < length:
        return 0
    return (n_times - length) // stride + 1


def sliding_windows(returns: ReturnMatrix, length: int, stride: int = 1) -> list[WindowView]:
    n = window_count(returns.n_times, length, stride)
    if n == 0:
        raise ValueError(
            f"return series of length {returns.n_times} is shorter than the window ({length})"
        )
    return [WindowView(returns, i, i * stride, length) for i in range(n)]

import datetime as dt

import numpy as np
import pytest


def business_days(start: dt.date, n: int) -> list[dt.date]:
    out, day = [], start
    while len(out) < n:
        if day.weekday() < 5:
            out.append(day)
        day += dt.timedelta(days=1)
    return out


def price_csv(prices: np.ndarray, dates, tickers=None, delimiter=",") -> str:
    """Wide price table text; NaN becomes a blank cell. ``prices`` is (n_dates, K)."""
    k = prices.shape[1]
    tickers = tickers or [f"S{i:03d}" for i in range(k)]
    lines = [delimiter.join(["date", *tickers])]
    for d, row in zip(dates, prices):
        cells = ["" if np.isnan(x) else repr(float(x)) for x in row]
        lines.append(delimiter.join([d.isoformat(), *cells]))
    return "\n".join(lines) + "\n"


def random_prices(rng, n_dates: int, k: int, vol: float = 0.01) -> np.ndarray:
    return 100.0 * np.exp(np.cumsum(vol * rng.standard_normal((n_dates, k)), axis=0))


def one_factor_returns(rng, k: int, t: int, noise: float = 1.0, betas=None):
    """Returns G_i = beta_i I + noise_i with a common factor I."""
    factor = rng.standard_normal(t)
    betas = rng.uniform(0.5, 1.5, k) if betas is None else np.asarray(betas)
    return np.outer(betas, factor) + noise * rng.standard_normal((k, t)), factor


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def tiny_panel_csv(tmp_path):
    """5 stocks, 60 business-day prices starting 2007-09-03."""
    rng = np.random.default_rng(5)
    dates = business_days(dt.date(2007, 9, 3), 60)
    path = tmp_path / "prices.csv"
    path.write_text(price_csv(random_prices(rng, 60, 5), dates))
    return path


# one (number, passed, detail) entry per acceptance criterion, echoed in the terminal summary
ACCEPTANCE: list[tuple[int, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")

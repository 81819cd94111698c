"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines as they happen;
they are also repeated in the terminal summary.
"""

import datetime as dt
import time

import numpy as np
import pytest

from riskphase.cli import main
from riskphase.collectivity import Label, Thresholds, classify_values
from riskphase.ensemble import BlockSpec, build_population, ensemble_mean_check, self_averaging_check
from riskphase.ingest import log_returns, parse_price_table, sliding_windows, window_count
from riskphase.matrices import correlation_matrix, covariance_matrix
from riskphase.phases import DEFAULT_EVENTS, DEFAULT_PERIODS, assign_period
from riskphase.pipeline import analyze_window
from riskphase.regression import mediator_average, regress_residuals, residual_collectivity
from riskphase.spectral import eigendecompose, ipr, remove_leading_modes

from conftest import ACCEPTANCE, business_days, one_factor_returns, price_csv, random_prices

DAY = dt.date(2008, 1, 15)


def report(number, passed, detail):
    ACCEPTANCE.append((number, bool(passed), detail))
    print(f"\ncriterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
    assert passed, detail


def random_window(rng):
    """A window with random size, factor strength, sector structure and scale."""
    k = int(rng.integers(2, 51))
    t = 42
    market = rng.uniform(0, 1.5) * rng.standard_normal(t)
    sectors = rng.integers(0, max(1, k // 8) + 1, k)
    sector_f = rng.standard_normal((sectors.max() + 1, t)) * rng.uniform(0, 1)
    x = market + sector_f[sectors] + rng.standard_normal((k, t))
    return x * rng.uniform(1e-3, 5e-2, (k, 1))


def test_01_window_arithmetic():
    rng = np.random.default_rng(1)
    dates = business_days(dt.date(1990, 1, 2), 7962)
    panel = parse_price_table(price_csv(random_prices(rng, 7962, 4), dates))
    returns = log_returns(panel)
    t0 = time.perf_counter()
    n_formula = window_count(returns.n_times, 42, 1)
    n_views = sum(1 for _ in sliding_windows(returns, 42, 1))
    elapsed = time.perf_counter() - t0
    ok = returns.n_times == 7961 and n_formula == n_views == 7920 and elapsed < 1.0
    report(1, ok, f"{returns.n_times} returns -> {n_views} windows in {elapsed:.3f}s")


def test_02_decomposition_identities():
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    worst_abs, worst_rel, n_rel = 0.0, 0.0, 0
    for _ in range(1200):
        rec = analyze_window(random_window(rng), DAY)
        worst_abs = max(
            worst_abs,
            abs(rec.cov_mean_offdiag - (rec.cov_BLE + rec.cov_B)) / max(1, abs(rec.cov_mean_offdiag)),
            abs(rec.corr_mean_offdiag - (rec.cov_LLE + rec.cov_L)) / max(1, abs(rec.corr_mean_offdiag)),
        )
        for a, b in ((rec.rel_cov_BLE, rec.rel_cov_B), (rec.rel_corr_LLE, rec.rel_corr_L)):
            if a is not None:
                worst_rel = max(worst_rel, abs(a + b - 1))
                n_rel += 1
    elapsed = time.perf_counter() - t0
    ok = worst_abs <= 1e-12 and worst_rel <= 1e-10 and elapsed < 30
    report(2, ok, f"1200 windows: additivity {worst_abs:.1e}, relative sum {worst_rel:.1e} ({n_rel} defined), {elapsed:.1f}s")


def test_03_spectral_reconstruction():
    rng = np.random.default_rng(3)
    worst_rec, worst_tr, count = 0.0, 0.0, 0
    for _ in range(300):
        x = random_window(rng)
        if x.shape[0] < 3:
            continue
        mats = [covariance_matrix(x), correlation_matrix(x)[0]]
        a = rng.standard_normal((x.shape[0], x.shape[0] + 3))
        mats.append(a @ a.T)
        for s in mats:
            d = eigendecompose(s)
            for m in (1, 2):
                split = remove_leading_modes(d, m)
                scale = max(1.0, float(np.abs(s).max()))
                worst_rec = max(worst_rec, float(np.abs(split.leading + split.residual - s).max()) / scale)
                retained = float(np.sum(d.eigenvalues[:-m]))
                worst_tr = max(worst_tr, abs(np.trace(split.residual) - retained) / np.trace(s))
                count += 1
    ok = worst_rec <= 1e-10 and worst_tr <= 1e-10
    report(3, ok, f"{count} splits: reconstruction {worst_rec:.1e}, trace {worst_tr:.1e}")


def test_04_ipr_endpoints():
    k = 213
    uniform = np.full(k, 1 / np.sqrt(k))
    local = np.zeros(k)
    local[17] = 1.0
    err_u = abs(ipr(uniform) - 1 / k)
    err_l = abs(ipr(local) - 1.0)
    report(4, err_u <= 1e-14 and err_l <= 1e-14, f"uniform error {err_u:.1e}, localized error {err_l:.1e}")


def test_05_criterion_partition():
    rng = np.random.default_rng(5)
    n = 100_000
    rel = rng.uniform(0.6, 1.1, n)
    # put a share of the draws on the thresholds themselves
    edge = rng.random(n) < 0.1
    rel[edge] = rng.choice([0.8, 0.997, np.nextafter(0.8, 0), np.nextafter(0.997, 1)], edge.sum())
    ble = 10 ** rng.uniform(-6, -2, n)
    ble[rng.random(n) < 0.05] = 4.1e-4
    rel_c = rng.uniform(0.6, 1.1, n)
    th = Thresholds()
    mismatches = 0
    for r, b, rc in zip(rel.tolist(), ble.tolist(), rel_c.tolist()):
        if r > 0.997:
            want_cov = "HighCol"
        elif r < 0.8:
            want_cov = "LCol"
        elif b > 4.1e-4:
            want_cov = "HighVal"
        else:
            want_cov = "None"
        want_corr = "HighCol" if rc > 0.997 else "LCol" if rc < 0.8 else "None"
        cov, corr = classify_values(r, b, rc, th)
        mismatches += (cov.value != want_cov) + (corr.value != want_corr)
    report(5, mismatches == 0, f"{n} cases, {mismatches} mismatches")


def test_06_ensemble_unbiased():
    spec = BlockSpec((3, 3), 0.4, 0.1, 1.0)
    t0 = time.perf_counter()
    r = ensemble_mean_check(spec, 42, 5000, seed=0)
    elapsed = time.perf_counter() - t0
    ok = r.max_abs_z < 5 and abs(r.mean_cov_z) < 5 and elapsed < 60
    report(6, ok, f"max elementwise |z| {r.max_abs_z:.2f}, scalar z {r.mean_cov_z:.2f}, {elapsed:.1f}s")


def test_07_self_averaging():
    t0 = time.perf_counter()
    rep = self_averaging_check([20, 80, 320], t=42, seeds=range(50))
    elapsed = time.perf_counter() - t0
    meds = rep.medians()
    ok = meds[-1] < meds[0] and rep.decreasing() and elapsed < 120
    shown = ", ".join(f"K={k}: {m:.4f}" for k, m in zip(rep.dims, meds))
    report(7, ok, f"median |off-block mean| {shown}, {elapsed:.1f}s")


def test_08_market_mode_removal_blocks():
    k, t = 200, 42
    with_blocks = np.linalg.cholesky(build_population(BlockSpec.equal_blocks(k, 4, 0.3, 0.2, 1.0)))
    offset_only = np.linalg.cholesky(build_population(BlockSpec.equal_blocks(k, 4, 0.0, 0.2, 1.0)))
    a, b = [], []
    for seed in range(50):
        z = np.random.default_rng([seed, 8]).standard_normal((k, t))
        a.append(analyze_window(with_blocks @ z, DAY).cov_B)
        b.append(analyze_window(offset_only @ z, DAY).cov_B)
    ma, mb = float(np.median(a)), float(np.median(b))
    report(8, ma > mb, f"median cov_B with blocks {ma:.3e} > offset only {mb:.3e}")


def test_09_regression_oracle():
    rng = np.random.default_rng(9)
    worst_slope, worst_orth = 0.0, 0.0
    for _ in range(200):
        x = random_window(rng)
        m = mediator_average(x)
        fit = regress_residuals(x, m)
        t = x.shape[1]
        dm = m.values - m.values.mean()
        var = sum(v * v for v in dm) / t
        for i in range(x.shape[0]):
            di = x[i] - x[i].mean()
            cov = sum(p * q for p, q in zip(di, dm)) / t
            worst_slope = max(worst_slope, abs(fit.beta[i] - cov / var))
            e = fit.residuals[i]
            # orthogonality as a correlation, so it is scale free
            worst_orth = max(worst_orth, abs(e @ dm) / (t * np.sqrt(var) * max(e.std(), 1e-300)))
    vals = []
    for seed in range(100):
        x, _ = one_factor_returns(np.random.default_rng([seed, 9]), 50, 42)
        vals.append(residual_collectivity(regress_residuals(x, mediator_average(x))))
    med = float(np.median(vals))
    ok = worst_slope <= 1e-10 and worst_orth <= 1e-10 and abs(med) < 0.05
    report(9, ok, f"slope error {worst_slope:.1e}, residual-mediator corr {worst_orth:.1e}, median LinR1 {med:.4f}")


def test_10_determinism(tmp_path):
    rng = np.random.default_rng(10)
    dates = business_days(dt.date(2007, 6, 1), 300)
    src = tmp_path / "prices.csv"
    src.write_text(price_csv(random_prices(rng, 300, 20), dates))
    outs = [tmp_path / "run1", tmp_path / "run2"]
    for out in outs:
        assert main(["analyze", "--input", str(src), "--subsample", "12", "--seed", "3", "--out", str(out)]) == 0
    names = sorted(p.name for p in outs[0].iterdir())
    same = names == sorted(p.name for p in outs[1].iterdir()) and all(
        (outs[0] / n).read_bytes() == (outs[1] / n).read_bytes() for n in names
    )
    report(10, same, f"{len(names)} output files byte-identical across two runs")


EXPECTED_EVENTS = [
    ("ER", "Early 1990s recession", "1990-07-15"),
    ("AC", "Asian financial crisis", "1997-10-27"),
    ("RC", "Russian financial crisis", "1998-08-17"),
    ("DC", "Dot-com bubble (before burst)", "2000-03-10"),
    ("MD", "Stock market downturn of 2002", "2002-10-09"),
    ("A", "Precursor start", "2007-11-01"),
    ("LB", "Lehman Brothers crash", "2008-09-16"),
    ("ED", "European debt crisis", "2010-04-27"),
    ("AF", "August 2011 stock markets fall", "2011-08-01"),
    ("FC", "The Great Fall of China", "2015-08-18"),
    ("CO", "2020 stock market crash", "2020-02-24"),
]

EXPECTED_PERIODS = [
    ("P1", "Nineties", "1990-01-31", "2000-02-08"),
    ("P2", "Post Dot-com bubble burst", "2000-02-09", "2002-10-09"),
    ("P3", "Pre-Lehman crash", "2002-10-10", "2007-10-31"),
    ("PA", "Precursor period", "2007-11-01", "2008-08-14"),
    ("P4", "Post-Lehman crash", "2008-08-15", "2015-08-18"),
    ("P5", "Post-China crisis", "2015-08-19", "2020-01-22"),
    ("P6", "Post 2020 stock market crash", "2020-01-23", "2021-07-08"),
]


def test_11_default_tables():
    events = [(e.label, e.description, e.date.isoformat()) for e in DEFAULT_EVENTS]
    periods = [(p.label, p.description, p.start.isoformat(), p.end.isoformat()) for p in DEFAULT_PERIODS]
    pa = assign_period(dt.date(2008, 1, 15))
    ok = events == EXPECTED_EVENTS and periods == EXPECTED_PERIODS and pa == "PA"
    report(11, ok, f"{len(events)} events, {len(periods)} periods, 2008-01-15 -> {pa}")

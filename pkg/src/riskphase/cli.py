"""Command line entry point: ``riskphase analyze|regress|ensemble|phases``."""

from __future__ import annotations

import argparse
import contextlib
import csv
import datetime as dt
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .collectivity import CollectivityRecord, Thresholds, read_records_csv, write_records_csv
from .ensemble import ensemble_mean_check, load_ensemble_config, self_averaging_check, spec_from_config
from .ingest import ReturnMatrix, log_returns, read_price_table, sliding_windows
from .matrices import correlation_matrix, covariance_matrix, mean_offdiagonal
from .phases import (
    AXES,
    DEFAULT_EVENTS,
    DEFAULT_PERIODS,
    TRAJECTORY_RANGE,
    annotate_events,
    group_means,
    group_of,
    load_events,
    load_periods,
    phase_points,
    trajectory,
)
from .pipeline import analyze_returns
from .regression import MediatorKind, mediator_for_window, regress_residuals, residual_collectivity
from .spectral import eigendecompose, split_market_mode

log = logging.getLogger("riskphase")


class StageError(Exception):
    def __init__(self, stage: str, exc: BaseException):
        super().__init__(f"[{stage}] {exc}")
        self.stage = stage


@contextlib.contextmanager
def stage(name: str):
    try:
        yield
    except StageError:
        raise
    except (ValueError, RuntimeError, OSError, KeyError) as exc:
        raise StageError(name, exc) from exc


@dataclass
class RunConfig:
    input: Path | None = None
    fmt: str = "wide"
    index: Path | None = None
    window: int = 42
    stride: int = 1
    thresholds: Thresholds = field(default_factory=Thresholds)
    mediator: MediatorKind = MediatorKind.AVERAGE
    modes: int = 2
    subsample: int | None = None
    seed: int = 0
    out: Path = Path("out")
    threads: int = 1
    dump_matrix: int | None = None

    def __post_init__(self):
        if self.window < 2:
            raise ValueError("window must be at least 2")
        if self.stride < 1:
            raise ValueError("stride must be at least 1")
        if self.modes < 1:
            raise ValueError("modes must be at least 1")
        if self.subsample is not None and self.subsample < 1:
            raise ValueError("subsample size must be positive")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, dt.date):
        return v.isoformat()
    return str(v)


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def load_returns(cfg: RunConfig) -> ReturnMatrix:
    with stage("ingest"):
        panel = read_price_table(cfg.input, cfg.fmt)
        returns = log_returns(panel)
    if cfg.subsample is not None:
        with stage("subsample"):
            k = returns.n_assets
            if cfg.subsample > k:
                raise ValueError(f"subsample size {cfg.subsample} exceeds {k} instruments")
            rng = np.random.default_rng(cfg.seed)
            keep = np.sort(rng.choice(k, size=cfg.subsample, replace=False))
            returns = returns.select([returns.tickers[i] for i in keep])
            log.info("subsample: %s", ",".join(returns.tickers))
    return returns


def write_phase_outputs(
    out: Path,
    records: Sequence[CollectivityRecord],
    periods=DEFAULT_PERIODS,
    events=DEFAULT_EVENTS,
    traj_range=TRAJECTORY_RANGE,
    exclude_labeled: bool = True,
) -> None:
    point_rows, center_rows, traj_rows = [], [], []
    for axes in AXES:
        pts = phase_points(records, axes, periods)
        if all(p.y is None for p in pts):
            continue
        for p in pts:
            point_rows.append((axes, p.date, p.x, p.y, p.x_log10, p.label, p.period or "", group_of(p, exclude_labeled)))
        for g in group_means(pts, periods, exclude_labeled):
            center_rows.append((axes, g.group, g.x, g.y, g.count))
        for s in trajectory(pts, *traj_range):
            traj_rows.append((axes, s.date, s.x, s.y, s.dx, s.dy))
    _write_csv(out / "phase_points.csv", ("axes", "center_date", "x", "y", "x_log10", "label", "period", "group"), point_rows)
    _write_csv(out / "phase_centers.csv", ("axes", "group", "x", "y", "count"), center_rows)
    _write_csv(out / "trajectory.csv", ("axes", "center_date", "x", "y", "dx", "dy"), traj_rows)

    markers = annotate_events([r.center_date for r in records], events)
    _write_csv(
        out / "events.csv",
        ("label", "description", "event_date", "window_index", "center_date", "cov_B", "cov_L"),
        (
            (m.event.label, m.event.description, m.event.date, m.window_index, m.center_date,
             records[m.window_index].cov_B, records[m.window_index].cov_L)
            for m in markers
        ),
    )


def _dump_matrices(out: Path, returns: ReturnMatrix, cfg: RunConfig) -> None:
    views = sliding_windows(returns, cfg.window, cfg.stride)
    if not 0 <= cfg.dump_matrix < len(views):
        raise ValueError(f"--dump-matrix {cfg.dump_matrix} outside 0..{len(views) - 1}")
    data = views[cfg.dump_matrix].data
    corr, _ = correlation_matrix(data)
    for name, mat in (("cov", covariance_matrix(data)), ("corr", corr)):
        _write_csv(
            out / f"{name}_window{cfg.dump_matrix}.csv",
            ["ticker", *returns.tickers],
            ([t, *map(float, row)] for t, row in zip(returns.tickers, mat)),
        )


def cmd_analyze(cfg: RunConfig, periods=DEFAULT_PERIODS, events=DEFAULT_EVENTS) -> list[CollectivityRecord]:
    returns = load_returns(cfg)
    with stage("analyze"):
        records = analyze_returns(
            returns, cfg.window, cfg.stride, cfg.modes, cfg.thresholds, cfg.threads
        )
    with stage("output"):
        cfg.out.mkdir(parents=True, exist_ok=True)
        write_records_csv(cfg.out / "collectivity.csv", records)
        write_phase_outputs(cfg.out, records, periods, events)
        if cfg.dump_matrix is not None:
            _dump_matrices(cfg.out, returns, cfg)
    return records


def cmd_regress(cfg: RunConfig) -> list[tuple]:
    if cfg.mediator is MediatorKind.INDEX and cfg.index is None:
        raise StageError("config", ValueError("--mediator index requires --index"))
    returns = load_returns(cfg)
    index = None
    if cfg.index is not None:
        with stage("ingest-index"):
            index = log_returns(read_price_table(cfg.index, "wide"))
            if index.n_assets != 1:
                raise ValueError(f"index file must hold one price column, found {index.n_assets}")
    name = "corr_LinR1" if cfg.mediator is MediatorKind.AVERAGE else "corr_LinR2"

    def run(w):
        fit = regress_residuals(w.data, mediator_for_window(w, cfg.mediator, index))
        corr, _ = correlation_matrix(w.data)
        split = split_market_mode(eigendecompose(corr, window=w.index))
        return (
            w.center_date,
            mean_offdiagonal(split.leading),
            residual_collectivity(fit),
            "degenerate_mediator" if fit.degenerate else "",
        )

    with stage("regress"):
        views = sliding_windows(returns, cfg.window, cfg.stride)
        if cfg.threads > 1:
            with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
                rows = list(pool.map(run, views))
        else:
            rows = [run(w) for w in views]
    with stage("output"):
        cfg.out.mkdir(parents=True, exist_ok=True)
        _write_csv(cfg.out / "regression.csv", ("center_date", "cov_LLE", name, "flags"), rows)
    return rows


def cmd_ensemble(
    cfg: RunConfig,
    config_path: Path | None,
    t: int | None,
    n_samples: int | None,
    self_avg_dims: Sequence[int] | None = None,
) -> dict:
    with stage("ensemble-config"):
        conf = load_ensemble_config(config_path) if config_path else {}
        spec = spec_from_config(conf)
        t = t or int(conf.get("T", 42))
        n = n_samples if n_samples is not None else int(conf.get("n_samples", 5000))
        seed = int(conf.get("seed", cfg.seed))
    with stage("ensemble"):
        report = ensemble_mean_check(spec, t, n, seed)
        summary = {
            "block_sizes": list(spec.block_sizes),
            "block_values": list(spec.block_values),
            "market_offset": spec.market_offset,
            "diagonal_value": spec.diagonal_value,
            "T": t,
            "n_samples": n,
            "seed": seed,
            "max_abs_deviation": report.max_abs_deviation,
            "max_abs_z": report.max_abs_z,
            "mean_cov_estimate": report.mean_cov_estimate,
            "mean_cov_std_error": report.mean_cov_std_error,
            "mean_cov_analytic": report.mean_cov_analytic,
            "mean_cov_z": report.mean_cov_z,
        }
        sa = None
        if self_avg_dims:
            sa = self_averaging_check(self_avg_dims, t, seeds=range(seed, seed + 50))
            summary["self_averaging_medians"] = dict(zip(map(str, sa.dims), sa.medians()))
            summary["self_averaging_decreasing"] = sa.decreasing()
    with stage("output"):
        cfg.out.mkdir(parents=True, exist_ok=True)
        (cfg.out / "ensemble_report.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
        k = report.population.shape[0]
        cols = [str(j) for j in range(k)]
        for fname, mat in (("ensemble_mean.csv", report.mean), ("ensemble_stderr.csv", report.std_error)):
            _write_csv(cfg.out / fname, ["row", *cols], ([i, *map(float, r)] for i, r in enumerate(mat)))
        if sa is not None:
            _write_csv(
                cfg.out / "self_averaging.csv",
                ("K", "seed_index", "off_block_mean"),
                ((kk, i, v) for kk in sa.dims for i, v in enumerate(sa.per_seed[kk])),
            )
    return summary


def cmd_phases(
    records_path: Path,
    out: Path,
    periods_path: Path | None = None,
    events_path: Path | None = None,
    traj_from: dt.date | None = None,
    traj_to: dt.date | None = None,
    exclude_labeled: bool = True,
) -> None:
    with stage("phases-input"):
        records = read_records_csv(records_path)
        periods = load_periods(periods_path) if periods_path else DEFAULT_PERIODS
        events = load_events(events_path) if events_path else DEFAULT_EVENTS
    with stage("output"):
        out.mkdir(parents=True, exist_ok=True)
        rng = (traj_from or TRAJECTORY_RANGE[0], traj_to or TRAJECTORY_RANGE[1])
        write_phase_outputs(out, records, periods, events, rng, exclude_labeled)


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="riskphase", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, need_input=True):
        sp.add_argument("--input", type=Path, required=need_input, help="price table (CSV or TSV)")
        sp.add_argument("--format", dest="fmt", choices=("wide", "long"), default="wide")
        sp.add_argument("--window", type=int, default=42)
        sp.add_argument("--stride", type=int, default=1)
        sp.add_argument("--subsample", type=int, default=None)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", type=Path, default=Path("out"))
        sp.add_argument("--threads", type=int, default=1)

    a = sub.add_parser("analyze", help="collectivity measures per window and risk-phase data")
    common(a)
    a.add_argument("--thresholds", type=Thresholds.parse, default=Thresholds())
    a.add_argument("--modes", type=int, default=2, help="leading modes removed for cov_B2/cov_L2")
    a.add_argument("--dump-matrix", type=int, default=None, metavar="IDX")
    a.add_argument("--periods", type=Path, default=None)
    a.add_argument("--events", type=Path, default=None)

    r = sub.add_parser("regress", help="regression (partial correlation) baseline")
    common(r)
    r.add_argument("--mediator", choices=[m.value for m in MediatorKind], default="avg")
    r.add_argument("--index", type=Path, default=None, help="one-column index price table")

    e = sub.add_parser("ensemble", help="random-matrix ensemble checks")
    e.add_argument("--config", type=Path, default=None, help="JSON block spec")
    e.add_argument("--T", dest="t", type=int, default=None)
    e.add_argument("--samples", type=int, default=None)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--self-averaging", type=_int_list, default=None, metavar="K1,K2,...")
    e.add_argument("--out", type=Path, default=Path("out"))

    ph = sub.add_parser("phases", help="re-aggregate a collectivity.csv with custom tables")
    ph.add_argument("--records", type=Path, required=True)
    ph.add_argument("--periods", type=Path, default=None)
    ph.add_argument("--events", type=Path, default=None)
    ph.add_argument("--from", dest="traj_from", type=dt.date.fromisoformat, default=None)
    ph.add_argument("--to", dest="traj_to", type=dt.date.fromisoformat, default=None)
    ph.add_argument("--keep-labeled", action="store_true", help="include criterion windows in period groups")
    ph.add_argument("--out", type=Path, default=Path("out"))
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "analyze":
            with stage("config"):
                cfg = RunConfig(
                    input=args.input, fmt=args.fmt, window=args.window, stride=args.stride,
                    thresholds=args.thresholds, modes=args.modes, subsample=args.subsample,
                    seed=args.seed, out=args.out, threads=args.threads, dump_matrix=args.dump_matrix,
                )
                periods = load_periods(args.periods) if args.periods else DEFAULT_PERIODS
                events = load_events(args.events) if args.events else DEFAULT_EVENTS
            records = cmd_analyze(cfg, periods, events)
            log.info("wrote %d windows to %s", len(records), cfg.out)
        elif args.command == "regress":
            with stage("config"):
                cfg = RunConfig(
                    input=args.input, fmt=args.fmt, index=args.index, window=args.window,
                    stride=args.stride, mediator=MediatorKind(args.mediator), subsample=args.subsample,
                    seed=args.seed, out=args.out, threads=args.threads,
                )
            cmd_regress(cfg)
        elif args.command == "ensemble":
            cmd_ensemble(RunConfig(seed=args.seed, out=args.out), args.config, args.t, args.samples, args.self_averaging)
        elif args.command == "phases":
            cmd_phases(args.records, args.out, args.periods, args.events, args.traj_from, args.traj_to, not args.keep_labeled)
    except StageError as exc:
        print(f"riskphase: error {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Experiment orchestration: traces, policies, per-cell CSVs and the summary table."""

from __future__ import annotations

import csv
import io
import logging
import shutil
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .baselines import (OfflineProblem, benchmark_run, greedy_schedule, solve_offline_dynamic,
                        solve_offline_pattern, window_ids)
from .config import ConfigError, ExperimentConfig, validate_config
from .environment import build_trace
from .metrics import RunRecord, dod_stats, headline_violation, regret
from .scheduler import run_pattern_aware

log = logging.getLogger(__name__)

SUMMARY_COLUMNS = (
    "param", "value", "seed", "policy", "total_dod", "max_eclipse_depth", "battery_min",
    "terminal_regret", "violation_g1", "violation_g2", "demand",
)
SERIES_COLUMNS = ("t", "regret", "violation1", "violation2")


@dataclass
class CellResult:
    """All policies of one (sweep value, seed) cell."""

    value: object
    seed: int
    runs: dict[str, RunRecord]
    bench: RunRecord
    demand: float
    battery0: float
    seconds: dict[str, float]

    def summary_rows(self, param: str | None) -> list[dict]:
        rows = []
        for policy, run in self.runs.items():
            stats = dod_stats(run, self.battery0)
            v1, v2 = headline_violation(run)
            rows.append({
                "param": param or "",
                "value": "" if param is None else self.value,
                "seed": self.seed,
                "policy": policy,
                "total_dod": stats.total,
                "max_eclipse_depth": stats.max_depth,
                "battery_min": stats.battery_min,
                "terminal_regret": regret(run, self.bench).terminal_regret,
                "violation_g1": v1,
                "violation_g2": v2,
                "demand": self.demand,
            })
        return rows


def run_cell(cfg: ExperimentConfig, value=None, seed: int = 0) -> CellResult:
    """Run every configured policy on one trace.

    The pattern benchmark is always solved since regret is measured against it.
    """
    cfg = cfg.with_seed(seed)
    trace = build_trace(cfg.env, cfg.horizon)
    prob = OfflineProblem(trace, cfg.power)
    seconds: dict[str, float] = {}
    runs: dict[str, RunRecord] = {}

    t0 = time.perf_counter()
    groups = window_ids(trace, cfg.partition, cfg.scheduler.pattern)
    pat = solve_offline_pattern(prob, cfg.partition, cfg.solver, groups)
    bench = benchmark_run(prob, pat, groups, policy="pattern")
    seconds["pattern"] = time.perf_counter() - t0

    for policy in cfg.policies:
        t0 = time.perf_counter()
        if policy == "pattern":
            runs[policy] = bench
        elif policy == "ours":
            runs[policy] = run_pattern_aware(trace, cfg.power, cfg.oco_params(), cfg.partition, cfg.scheduler)
        elif policy == "dynamic":
            runs[policy] = benchmark_run(prob, solve_offline_dynamic(prob, cfg.solver), policy="dynamic")
        elif policy == "greedy":
            runs[policy] = greedy_schedule(trace, cfg.power)
        else:
            raise ConfigError([f"policies: unknown policy {policy!r}"])
        if policy != "pattern":
            seconds[policy] = time.perf_counter() - t0
    return CellResult(value, seed, runs, bench, prob.demand, cfg.power.battery_cap, seconds)


def _cell_job(args):
    cfg, value, seed = args
    return run_cell(cfg, value, seed)


def _cell_name(param: str | None, value, seed: int, policy: str) -> str:
    tag = "base" if param is None else f"{param}={value}"
    return f"{tag}_seed{seed}_{policy}.csv"


def _series_csv(run: RunRecord, bench: RunRecord) -> str:
    rs = regret(run, bench)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SERIES_COLUMNS)
    for t, a, b, c in zip(run["t"], rs.regret, rs.violation1, rs.violation2):
        w.writerow([int(t), f"{a:.9g}", f"{b:.9g}", f"{c:.9g}"])
    return buf.getvalue()


def _table_csv(columns, rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([f"{r[c]:.9g}" if isinstance(r[c], float) else r[c] for c in columns])
    return buf.getvalue()


def run_experiment(cfg: ExperimentConfig, out_dir: str | Path | None = None,
                   param: str | None = None, values=None) -> Path:
    """Run all (value, seed) cells and write CSV outputs under ``out_dir``.

    Layout: ``runs/<cell>.csv`` (per-slot records), ``series/<cell>.csv``
    (cumulative regret and violations), ``summary.csv`` and ``timings.csv``.
    Wall times live only in ``timings.csv`` so ``summary.csv`` is
    reproducible byte for byte.  On any failure the output directory is
    removed.
    """
    errors, warns = validate_config(cfg)
    if errors:
        raise ConfigError(errors)
    for w in warns:
        log.warning(w)
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    if param is None and values is None and cfg.sweep.param is not None:
        param, values = cfg.sweep.param, cfg.sweep.values
    if param is not None and not values:
        raise ConfigError(["sweep.values: need at least one value"])
    cells = [(cfg if param is None else cfg.with_value(param, v), v, s)
             for v in (values if param is not None else [None]) for s in cfg.seeds]
    for c, _, _ in cells:
        errs, _ = validate_config(c)
        if errs:
            raise ConfigError(errs)

    existed = out.exists()
    created: list[Path] = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        for sub in ("runs", "series"):
            (out / sub).mkdir(exist_ok=True)
        if cfg.jobs > 1 and len(cells) > 1:
            with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
                results = list(pool.map(_cell_job, cells))
        else:
            results = [_cell_job(c) for c in cells]
        summary, timings = [], []
        for res in results:
            for policy, run in res.runs.items():
                name = _cell_name(param, res.value, res.seed, policy)
                header = f"policy={policy} seed={res.seed}" + ("" if param is None else f" {param}={res.value}")
                for sub, text in (("runs", run.to_csv(header)), ("series", _series_csv(run, res.bench))):
                    path = out / sub / name
                    path.write_text(text)
                    created.append(path)
                timings.append({"param": param or "", "value": "" if param is None else res.value,
                                "seed": res.seed, "policy": policy,
                                "seconds": float(res.seconds.get(policy, 0.0))})
            summary += res.summary_rows(param)
        for fname, cols, rows in (("summary.csv", SUMMARY_COLUMNS, summary),
                                  ("timings.csv", ("param", "value", "seed", "policy", "seconds"), timings)):
            path = out / fname
            path.write_text(_table_csv(cols, rows))
            created.append(path)
    except BaseException:
        if existed:
            for p in created:
                p.unlink(missing_ok=True)
        else:
            shutil.rmtree(out, ignore_errors=True)
        raise
    log.info("wrote %d run files to %s", len(created), out)
    return out


def read_summary(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def mean_dod(rows: list[dict], policy: str, value=None) -> float:
    sel = [float(r["total_dod"]) for r in rows
           if r["policy"] == policy and (value is None or _same(r["value"], value))]
    return float(np.mean(sel)) if sel else float("nan")


def _same(text: str, value) -> bool:
    try:
        return float(text) == float(value)
    except (TypeError, ValueError):
        return text == str(value)

"""Run records and the statistics computed from them."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .dynamics import Decision, EnergyAccount, PowerParams, SatelliteState, constraint_values, step_state
from .environment import SlotContext

# fixed CSV column order
COLUMNS = (
    "t", "window_id", "cpu_freq", "tx_rate", "e_out", "e_in", "battery", "q_cmp", "q_com",
    "g1", "g2", "vq1", "vq2", "objective", "e_sen", "e_cmp", "e_com", "harvest",
    "in_light", "contact",
)
INT_COLUMNS = {"t", "window_id", "in_light", "contact"}


@dataclass
class RunRecord:
    columns: dict[str, np.ndarray]
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.columns["t"])

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]

    def decisions(self) -> list[Decision]:
        return [Decision(float(f), float(r)) for f, r in zip(self["cpu_freq"], self["tx_rate"])]

    @property
    def total_discharge(self) -> float:
        return float(np.sum(self["e_out"]))

    def to_csv(self, header_comment: str | None = None) -> str:
        buf = io.StringIO()
        if header_comment:
            buf.write(f"# {header_comment}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        cols = [self.columns[c] for c in COLUMNS]
        for i in range(len(self)):
            w.writerow([int(col[i]) if name in INT_COLUMNS else f"{col[i]:.9g}"
                        for name, col in zip(COLUMNS, cols)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "RunRecord":
        lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
        rows = list(csv.reader(lines))
        header, body = rows[0], rows[1:]
        cols = {}
        for j, name in enumerate(header):
            dtype = int if name in INT_COLUMNS else float
            cols[name] = np.array([dtype(r[j]) for r in body])
        return cls(cols)


class Recorder:
    """Accumulates per-slot rows while a policy runs."""

    def __init__(self, pp: PowerParams, battery0: float | None = None):
        self.pp = pp
        self.state = SatelliteState(battery=pp.battery_cap if battery0 is None else battery0)
        self.rows: dict[str, list] = {c: [] for c in COLUMNS}
        self.cum = [0.0, 0.0]

    def record(self, ctx: SlotContext, d: Decision, window_id: int = 0,
               vq: tuple[float, float] = (0.0, 0.0)) -> tuple[SatelliteState, EnergyAccount]:
        new, acct = step_state(self.state, d, ctx, self.pp)
        g1, g2 = constraint_values(d, ctx, self.pp)
        r = self.rows
        r["t"].append(ctx.t)
        r["window_id"].append(window_id)
        r["cpu_freq"].append(d.cpu_freq)
        r["tx_rate"].append(d.tx_rate)
        r["e_out"].append(acct.e_out)
        r["e_in"].append(acct.e_in)
        r["battery"].append(new.battery)
        r["q_cmp"].append(new.q_cmp)
        r["q_com"].append(new.q_com)
        r["g1"].append(g1)
        r["g2"].append(g2)
        r["vq1"].append(float(vq[0]))
        r["vq2"].append(float(vq[1]))
        # the discharge objective equals e_out by construction
        r["objective"].append(acct.e_out)
        r["e_sen"].append(acct.e_sen)
        r["e_cmp"].append(acct.e_cmp)
        r["e_com"].append(acct.e_com)
        r["harvest"].append(ctx.harvest_energy)
        r["in_light"].append(int(ctx.in_light))
        r["contact"].append(int(ctx.contact))
        self.state = new
        return new, acct

    def finish(self, **meta) -> RunRecord:
        cols = {c: np.array(v, dtype=int if c in INT_COLUMNS else float) for c, v in self.rows.items()}
        return RunRecord(cols, meta)


def replay(trace: list[SlotContext], pp: PowerParams, decisions: list[Decision],
           window_ids=None, **meta) -> RunRecord:
    """Run a fixed decision sequence through the dynamics."""
    if len(decisions) != len(trace):
        raise ValueError(f"{len(decisions)} decisions for a trace of {len(trace)} slots")
    rec = Recorder(pp)
    for i, (ctx, d) in enumerate(zip(trace, decisions)):
        rec.record(ctx, d, 0 if window_ids is None else int(window_ids[i]))
    return rec.finish(**meta)


@dataclass
class RegretSeries:
    regret: np.ndarray
    violation1: np.ndarray
    violation2: np.ndarray

    @property
    def terminal_regret(self) -> float:
        return float(self.regret[-1]) if len(self.regret) else 0.0


def violations(run: RunRecord) -> tuple[np.ndarray, np.ndarray]:
    """Raw signed cumulative constraint sums (bit/s summed over slots)."""
    return np.cumsum(run["g1"]), np.cumsum(run["g2"])


def headline_violation(run: RunRecord) -> tuple[float, float]:
    v1, v2 = violations(run)
    return max(0.0, float(v1[-1])), max(0.0, float(v2[-1]))


def regret(run: RunRecord, bench) -> RegretSeries:
    """Cumulative regret of ``run`` against a benchmark evaluated on the same trace.

    ``bench`` is either a benchmark RunRecord or an array of per-slot
    benchmark objective values.
    """
    bench_obj = bench["objective"] if isinstance(bench, RunRecord) else np.asarray(bench, dtype=float)
    if len(bench_obj) != len(run):
        raise ValueError("benchmark and run lengths differ")
    v1, v2 = violations(run)
    return RegretSeries(np.cumsum(run["objective"] - bench_obj), v1, v2)


@dataclass
class DodStats:
    total: float
    eclipse_depths: list[float]
    battery_min: float

    @property
    def max_depth(self) -> float:
        return max(self.eclipse_depths, default=0.0)


def dod_stats(run: RunRecord, initial_battery: float | None = None) -> DodStats:
    """Total discharge, discharge within each contiguous eclipse span, lowest battery level."""
    e_out = run["e_out"]
    dark = run["in_light"] == 0
    depths, cur, inside = [], 0.0, False
    for e, is_dark in zip(e_out, dark):
        if is_dark:
            cur += e
            inside = True
        elif inside:
            depths.append(cur)
            cur, inside = 0.0, False
    if inside:
        depths.append(cur)
    bmin = float(np.min(run["battery"])) if len(run) else float("inf")
    if initial_battery is not None:
        bmin = min(bmin, initial_battery)
    return DodStats(float(np.sum(e_out)), depths, bmin)

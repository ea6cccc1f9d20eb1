"""Comparison policies: greedy, clairvoyant dynamic and pattern-aware benchmarks, grid oracle."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dynamics import Decision, PowerParams, discharge_objective, sensing_energy
from .environment import SlotContext
from .metrics import RunRecord, replay
from .scheduler import PatternPartition, pattern_vector, window_id


class SolverError(RuntimeError):
    """Offline solve did not reach an optimal, feasible point."""

    def __init__(self, msg: str, residuals: tuple[float, float] | None = None):
        super().__init__(msg if residuals is None else f"{msg} (residuals g1={residuals[0]:.3e}, g2={residuals[1]:.3e})")
        self.residuals = residuals


@dataclass(frozen=True)
class SolverOptions:
    solver: str = "CLARABEL"
    max_iters: int = 500
    tolerance: float = 1e-6  # relative to total sensed rate


@dataclass
class OfflineProblem:
    trace: Sequence[SlotContext]
    pp: PowerParams

    def __post_init__(self):
        if len(self.trace) < 1:
            raise ValueError("offline problem needs a non-empty trace")

    @property
    def demand(self) -> float:
        """Total sensed rate, sum_t D f_sen(t), in bit/s."""
        return sum(self.pp.frame_size_bits * c.frame_rate for c in self.trace)


@dataclass
class OfflineSolution:
    decisions: list[Decision]
    objective: float
    residuals: tuple[float, float]  # terminal sums of g1, g2
    window_decisions: dict[int, Decision] | None = None


# ---------------------------------------------------------------------------
# greedy

def greedy_schedule(trace: Sequence[SlotContext], pp: PowerParams) -> RunRecord:
    """Per slot, the least compute and rate keeping both running constraint sums at or below zero.

    Downlink backlog accumulated outside contact is caught up at the next
    contact slots, limited by ``rate_max``.
    """
    s1 = s2 = 0.0
    k, rho = pp.bits_per_cycle, pp.effective_fraction
    decisions = []
    for ctx in trace:
        demand = pp.frame_size_bits * ctx.frame_rate
        f = min(max((s1 + demand) / k, 0.0), pp.cpu_max) if k > 0 else 0.0
        s1 += demand - k * f
        cap = pp.rate_max if ctx.contact else 0.0
        r = min(max(s2 + rho * k * f, 0.0), cap)
        s2 += rho * k * f - r
        decisions.append(Decision(f, r))
    run = replay(trace, pp, decisions, policy="greedy")
    tol = 1e-9 * max(sum(pp.frame_size_bits * c.frame_rate for c in trace), 1.0)
    run.meta["infeasible"] = bool(s1 > tol or s2 > tol)
    run.meta["residuals"] = (s1, s2)
    return run


# ---------------------------------------------------------------------------
# clairvoyant benchmarks

def _slot_terms(prob: OfflineProblem):
    pp = prob.pp
    A = pp.capacitance_coeff * pp.cpu_max ** 3 * pp.slot_duration
    c = math.log(2.0) * pp.rate_max / pp.bandwidth
    comm = np.array([pp.slot_duration / ctx.snr for ctx in prob.trace])
    const = np.array([sensing_energy(pp) + ctx.base_load - ctx.harvest_energy for ctx in prob.trace])
    contact = np.array([ctx.contact for ctx in prob.trace])
    return A, c, comm, const, contact


def _finish(prob: OfflineProblem, u: np.ndarray, v: np.ndarray, opts: SolverOptions,
            windows: dict[int, Decision] | None = None) -> OfflineSolution:
    pp = prob.pp
    _, _, _, _, contact = _slot_terms(prob)
    u = np.clip(u, 0.0, 1.0)
    v = np.where(contact, np.clip(v, 0.0, 1.0), 0.0)
    decisions = [Decision(float(a) * pp.cpu_max, float(b) * pp.rate_max) for a, b in zip(u, v)]
    kf = pp.bits_per_cycle * pp.cpu_max * u
    r1 = prob.demand - float(np.sum(kf))
    r2 = float(np.sum(pp.effective_fraction * kf - pp.rate_max * v))
    scale = max(prob.demand, 1.0)
    if max(r1, r2) > opts.tolerance * scale:
        raise SolverError("offline solution violates the long-term constraints", (r1, r2))
    obj = sum(discharge_objective(d, ctx, pp)[0] for d, ctx in zip(decisions, prob.trace))
    return OfflineSolution(decisions, obj, (r1, r2), windows)


def _solve(prob: OfflineProblem, opts: SolverOptions, groups: np.ndarray | None):
    import cvxpy as cp

    pp = prob.pp
    A, c, comm, const, contact = _slot_terms(prob)
    T = len(prob.trace)
    if groups is None:
        n = T
        u_var = cp.Variable(T, nonneg=True)
        v_var = cp.Variable(T, nonneg=True)
        u, v = u_var, v_var
        v_cap = contact.astype(float)
    else:
        ids = np.unique(groups)
        n = len(ids)
        col = np.searchsorted(ids, groups)
        M = np.zeros((T, n))
        M[np.arange(T), col] = 1.0
        u_var = cp.Variable(n, nonneg=True)
        v_var = cp.Variable(n, nonneg=True)
        # a window's fixed rate is projected onto each slot's box: zero without contact
        u, v = M @ u_var, (contact[:, None] * M) @ v_var
        v_cap = np.array([float(contact[col == j].any()) for j in range(n)])
    need = prob.demand / (pp.bits_per_cycle * pp.cpu_max) if pp.bits_per_cycle > 0 else 0.0
    # small margin so clipping the solver output stays feasible
    margin = 1e-9 * need
    kf_max = pp.bits_per_cycle * pp.cpu_max
    cons = [u_var <= 1.0, v_var <= v_cap, cp.sum(u) >= need + margin,
            pp.rate_max * cp.sum(v) >= pp.effective_fraction * kf_max * (cp.sum(u) + margin)]
    energy = A * cp.power(u, 3) + cp.multiply(comm, cp.exp(c * v)) - comm + const
    problem = cp.Problem(cp.Minimize(cp.sum(cp.pos(energy))), cons)
    kwargs = {"max_iter": opts.max_iters} if opts.solver == "CLARABEL" else {}
    try:
        problem.solve(solver=opts.solver, **kwargs)
    except cp.error.SolverError as exc:
        raise SolverError(f"convex solver failed: {exc}") from exc
    if problem.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) or u_var.value is None:
        raise SolverError(f"convex solver status {problem.status}")
    return np.asarray(u_var.value, dtype=float), np.asarray(v_var.value, dtype=float)


def solve_offline_dynamic(prob: OfflineProblem, opts: SolverOptions | None = None) -> OfflineSolution:
    """Clairvoyant per-slot optimum of total discharge under both long-term constraints."""
    opts = opts or SolverOptions()
    u, v = _solve(prob, opts, None)
    return _finish(prob, u, v, opts)


def window_ids(trace: Sequence[SlotContext], part: PatternPartition, pattern=pattern_vector) -> np.ndarray:
    return np.array([window_id(pattern(ctx), part) for ctx in trace])


def solve_offline_pattern(prob: OfflineProblem, part: PatternPartition | None = None,
                          opts: SolverOptions | None = None, groups: np.ndarray | None = None,
                          pattern=pattern_vector) -> OfflineSolution:
    """Best fixed decision per window, constraints aggregated over the whole horizon.

    The window's rate is played only in its contact slots, so a window that
    never sees contact transmits nothing.  ``groups`` overrides the window
    assignment (one label per slot).
    """
    opts = opts or SolverOptions()
    if groups is None:
        groups = window_ids(prob.trace, part or PatternPartition(), pattern)
    groups = np.asarray(groups)
    uk, vk = _solve(prob, opts, groups)
    ids = np.unique(groups)
    col = np.searchsorted(ids, groups)
    _, _, _, _, contact = _slot_terms(prob)
    vk = np.where([contact[col == j].any() for j in range(len(ids))], vk, 0.0)
    sol = _finish(prob, uk[col], vk[col], opts)
    pp = prob.pp
    sol.window_decisions = {int(k): Decision(float(np.clip(uk[j], 0, 1)) * pp.cpu_max,
                                             float(np.clip(vk[j], 0, 1)) * pp.rate_max)
                            for j, k in enumerate(ids)}
    return sol


def benchmark_run(prob: OfflineProblem, sol: OfflineSolution, groups=None, policy: str = "") -> RunRecord:
    return replay(prob.trace, prob.pp, sol.decisions, groups, policy=policy)


# ---------------------------------------------------------------------------
# grid oracle

def brute_force_oracle(prob: OfflineProblem, grid_levels: int = 20) -> OfflineSolution:
    """Exact minimum over decisions quantized to ``grid_levels`` values per variable.

    Dynamic programming over the integer pair (sum of compute levels,
    sum of rate levels); the long-term constraints only depend on those sums.
    """
    T = len(prob.trace)
    if T > 8:
        raise ValueError("oracle limited to T <= 8")
    if not 2 <= grid_levels <= 25:
        raise ValueError("grid_levels must lie in [2, 25]")
    pp = prob.pp
    A, c, comm, const, contact = _slot_terms(prob)
    m = grid_levels - 1
    lv = np.arange(grid_levels) / m
    size = T * m + 1
    cost = np.full((size, size), np.inf)
    cost[0, 0] = 0.0
    choices = []
    for t in range(T):
        jmax = m if contact[t] else 0
        table = np.maximum(A * lv[:, None] ** 3 + comm[t] * np.expm1(c * lv[None, : jmax + 1]) + const[t], 0.0)
        new = np.full_like(cost, np.inf)
        pick = np.full(cost.shape, -1, dtype=np.int64)
        reach = t * m + 1
        for i, j in itertools.product(range(grid_levels), range(jmax + 1)):
            cand = cost[:reach, :reach] + table[i, j]
            view = new[i:i + reach, j:j + reach]
            better = cand < view
            view[better] = cand[better]
            pick[i:i + reach, j:j + reach][better] = i * grid_levels + j
        cost = new
        choices.append(pick)
    si, sj = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    k, rho = pp.bits_per_cycle, pp.effective_fraction
    kf_sum = k * pp.cpu_max * si / m
    ok = (kf_sum >= prob.demand * (1 - 1e-12)) & (pp.rate_max * sj / m >= rho * kf_sum * (1 - 1e-12))
    masked = np.where(ok, cost, np.inf)
    if not np.isfinite(masked).any():
        raise SolverError("no grid point satisfies the long-term constraints")
    a, b = np.unravel_index(np.argmin(masked), masked.shape)
    best = float(masked[a, b])
    seq = []
    for t in reversed(range(T)):
        code = int(choices[t][a, b])
        i, j = divmod(code, grid_levels)
        seq.append(Decision(lv[i] * pp.cpu_max, lv[j] * pp.rate_max))
        a, b = a - i, b - j
    seq.reverse()
    kf = sum(k * d.cpu_freq for d in seq)
    res = (prob.demand - kf, sum(rho * k * d.cpu_freq - d.tx_rate for d in seq))
    return OfflineSolution(seq, best, res)

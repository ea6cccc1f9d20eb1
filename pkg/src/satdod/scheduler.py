"""Pattern windows and the pattern-aware online scheduling loop."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .dynamics import PowerParams
from .environment import SlotContext
from .metrics import Recorder, RunRecord
from .oco import LearnerSpace, LearnerState, OcoParams, oco_step, vq_update

_EDGE = 1e-12


@dataclass(frozen=True)
class PatternPartition:
    dims: int = 2
    levels: int = 2

    @property
    def window_count(self) -> int:
        return self.levels ** self.dims

    def validate(self) -> list[str]:
        errs = []
        if self.dims < 1:
            errs.append("dims: must be >= 1")
        if self.levels < 1:
            errs.append("levels: must be >= 1")
        return errs


def pattern_vector(ctx: SlotContext) -> tuple[float, float]:
    """(light, contact) indicators placed at the centres of the two halves of [0, 1]."""
    return (0.75 if ctx.in_light else 0.25, 0.75 if ctx.contact else 0.25)


def window_id(c: Sequence[float], part: PatternPartition) -> int:
    if len(c) != part.dims:
        raise ValueError(f"pattern has {len(c)} features, partition expects {part.dims}")
    k = 0
    for n, cn in enumerate(c):
        if not 0.0 <= cn <= 1.0:
            raise ValueError(f"pattern feature {cn!r} outside [0, 1]")
        cell = int(math.floor(min(cn, 1.0 - _EDGE) * part.levels))
        k += cell * part.levels ** n
    return k


@dataclass
class _Queue:
    vq: np.ndarray
    g_last: np.ndarray
    bank: np.ndarray = field(default_factory=lambda: np.zeros(2))


@dataclass
class WindowState:
    window_id: int
    x_prev: np.ndarray | None = None
    grad_prev: np.ndarray | None = None
    queue: _Queue | None = None
    visits: int = 0


@dataclass
class SchedulerOptions:
    scaling: str = "normalized"
    literal: bool = False
    # "global": one virtual queue pair shared by all windows; "window": one per window
    vq_scope: str = "global"
    grad_clip_factor: float | None = 10.0
    snr_min: float = 15.0
    # first decision of a window: "midpoint" of the box, "previous" decision
    # played (projected), or "origin"
    init: str = "previous"
    # "max": Q = max(-g~, Q + g~); "banked": running sum kept unclipped and the
    # max form applied only to the price handed to the step
    queue: str = "banked"
    # learner units: constraints divided by g_scale * bits_per_cycle * cpu_max,
    # objective subgradient multiplied by obj_scale (normalized scaling only)
    g_scale: float = 0.5
    obj_scale: float = 5.0
    pattern: Callable[[SlotContext], Sequence[float]] = field(default=pattern_vector)


def make_space(pp: PowerParams, op: OcoParams, opts: SchedulerOptions) -> LearnerSpace:
    space = LearnerSpace(pp, op.gamma, scaling=opts.scaling, literal=opts.literal,
                         g_scale=opts.g_scale, obj_scale=opts.obj_scale)
    if opts.grad_clip_factor is not None and not opts.literal:
        space.grad_clip = opts.grad_clip_factor * space.grad_bound(opts.snr_min)
    return space


def run_pattern_aware(trace: Sequence[SlotContext], pp: PowerParams, op: OcoParams,
                      part: PatternPartition, opts: SchedulerOptions | None = None,
                      **meta) -> RunRecord:
    """Run the pattern-aware online scheduler over ``trace``.

    Each window keeps its own previous decision and subgradient.  The first
    slot of a window plays the decision chosen by ``opts.init`` (the default
    re-projects the last decision played, the box midpoint at t=1); later
    slots take one projected drift-plus-penalty step from that window's
    previous decision.  The virtual queues are shared by all windows unless
    ``opts.vq_scope == "window"``.
    """
    opts = opts or SchedulerOptions()
    if len(trace) < 1:
        raise ValueError("trace must contain at least one slot")
    if opts.vq_scope not in ("global", "window"):
        raise ValueError(f"vq_scope: unknown value {opts.vq_scope!r}")
    if opts.init not in ("midpoint", "previous", "origin"):
        raise ValueError(f"init: unknown value {opts.init!r}")
    if opts.queue not in ("max", "banked"):
        raise ValueError(f"queue: unknown value {opts.queue!r}")
    space = make_space(pp, op, opts)
    last_x = None
    windows: dict[int, WindowState] = {}
    shared = _Queue(np.zeros(2), np.zeros(2))
    rec = Recorder(pp)
    for ctx in trace:
        k = window_id(opts.pattern(ctx), part)
        w = windows.get(k)
        if w is None:
            w = windows[k] = WindowState(k)
            w.queue = shared if opts.vq_scope == "global" else _Queue(np.zeros(2), np.zeros(2))
            if opts.init == "previous" and last_x is not None:
                x = space.project(last_x, ctx)
            elif opts.init == "origin":
                x = space.bounds(ctx)[0]
            else:
                x = space.initial(ctx)
        else:
            st = LearnerState(w.x_prev, w.queue.vq, w.queue.g_last, w.grad_prev)
            x = oco_step(st, op, ctx, space)
        # channel revealed only after the decision is fixed
        _, grad = space.grad(x, ctx)
        g_t = space.g_tilde(x, ctx)
        q = w.queue
        if opts.queue == "banked":
            q.bank = q.bank + g_t
            q.vq = np.maximum(-g_t, q.bank)
        else:
            q.vq = vq_update(q.vq, g_t)
        q.g_last = g_t
        w.x_prev, w.grad_prev = x, grad
        w.visits += 1
        last_x = x
        rec.record(ctx, space.to_decision(x), k, (q.vq[0], q.vq[1]))
    return rec.finish(policy="ours", visits={k: w.visits for k, w in windows.items()}, **meta)

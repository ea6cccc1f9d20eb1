"""Virtual-queue online convex optimization with affine long-term constraints.

The update rules (``vq_update``, ``direction``, ``project_box``, ``oco_step``)
are generic over vectors.  :class:`LearnerSpace` maps the satellite decision
into the learner's coordinates and supplies the objective subgradient, the
scaled constraints and their (constant) gradient rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import Decision, PowerParams, constraint_values, discharge_objective, energy_balance
from .environment import SlotContext


@dataclass(frozen=True)
class OcoParams:
    alpha: float
    gamma: float
    beta: float
    eta: float

    @classmethod
    def from_horizon(cls, horizon: int, beta: float = 14.0) -> "OcoParams":
        """Theory schedule: gamma = T^(1/4), eta = sqrt(T), alpha = (beta^2 + 1) sqrt(T) / 2."""
        root = math.sqrt(horizon)
        return cls(alpha=0.5 * (beta * beta + 1.0) * root, gamma=horizon ** 0.25, beta=beta, eta=root)

    def alpha_condition(self) -> float:
        """Smallest alpha for which the drift-plus-penalty bound holds."""
        return 0.5 * (self.gamma ** 2 * self.beta ** 2 + self.eta)

    def validate(self, theory_mode: bool = False) -> tuple[list[str], list[str]]:
        errs, warns = [], []
        if not self.alpha > 0:
            errs.append("alpha: must be positive")
        if not self.gamma > 0:
            errs.append("gamma: must be positive")
        if self.beta < 0:
            errs.append("beta: must be non-negative")
        if not self.eta > 0:
            errs.append("eta: must be positive")
        if theory_mode and not errs:
            need = self.alpha_condition()
            if self.alpha < need * (1 - 1e-12):
                warns.append(f"alpha: {self.alpha:.6g} < (gamma^2 beta^2 + eta)/2 = {need:.6g}; "
                             "regret bound requires alpha >= (gamma^2 beta^2 + eta)/2")
        return errs, warns


@dataclass
class LearnerState:
    x_prev: np.ndarray
    vq: np.ndarray
    g_prev: np.ndarray  # scaled constraint value at x_prev
    grad_prev: np.ndarray


def vq_update(vq: np.ndarray, g_tilde: np.ndarray) -> np.ndarray:
    vq = np.asarray(vq, dtype=float)
    g_tilde = np.asarray(g_tilde, dtype=float)
    return np.maximum(-g_tilde, vq + g_tilde)


def direction(grad, vq, g_tilde, g_grad_rows) -> np.ndarray:
    grad = np.asarray(grad, dtype=float)
    w = np.asarray(vq, dtype=float) + np.asarray(g_tilde, dtype=float)
    rows = np.asarray(g_grad_rows, dtype=float)
    if rows.ndim != 2 or rows.shape != (w.shape[0], grad.shape[0]):
        raise ValueError(f"constraint rows shape {rows.shape} incompatible with "
                         f"{w.shape[0]} constraints and dimension {grad.shape[0]}")
    return grad + rows.T @ w


def clamp(x: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    return np.minimum(np.maximum(x, lo), hi)


class LearnerSpace:
    """Learner coordinates for the decision (cpu_freq, tx_rate).

    ``scaling="normalized"`` measures cpu_freq in units of ``cpu_max``,
    tx_rate in units of ``rate_max`` and both constraints in units of the
    peak compute throughput ``bits_per_cycle * cpu_max``; ``"native"`` uses
    cycles/s, bit/s and bit/s directly.  ``literal=True`` prepends the
    discharge energy as a free coordinate with unit gradient, the
    three-variable form in which (cpu_freq, tx_rate) see no objective.
    """

    def __init__(self, pp: PowerParams, gamma: float, scaling: str = "normalized",
                 literal: bool = False, grad_clip: float | None = None, g_scale: float = 1.0,
                 obj_scale: float = 1.0):
        if scaling not in ("normalized", "native"):
            raise ValueError(f"unknown scaling {scaling!r}")
        self.pp = pp
        self.gamma = gamma
        self.literal = literal
        if scaling == "normalized":
            self.f_unit = pp.cpu_max
            self.r_unit = pp.rate_max
            self.g_unit = g_scale * pp.bits_per_cycle * pp.cpu_max
        else:
            self.f_unit = self.r_unit = self.g_unit = 1.0
        self.grad_clip = None if literal else grad_clip
        self.obj_scale = obj_scale
        k, rho = pp.bits_per_cycle, pp.effective_fraction
        rows = gamma / self.g_unit * np.array([
            [-k * self.f_unit, 0.0],
            [rho * k * self.f_unit, -self.r_unit],
        ])
        if literal:
            rows = np.hstack([np.zeros((2, 1)), rows])
        self.g_rows = rows
        self.dim = 3 if literal else 2

    def _off(self) -> int:
        return 1 if self.literal else 0

    def bounds(self, ctx: SlotContext) -> tuple[np.ndarray, np.ndarray]:
        rcap = self.pp.rate_max / self.r_unit if ctx.contact else 0.0
        hi = [self.pp.cpu_max / self.f_unit, rcap]
        if self.literal:
            hi = [math.inf] + hi
        return np.zeros(self.dim), np.array(hi)

    def to_decision(self, x: np.ndarray) -> Decision:
        o = self._off()
        return Decision(cpu_freq=float(x[o]) * self.f_unit, tx_rate=float(x[o + 1]) * self.r_unit)

    def to_vector(self, d: Decision, ctx: SlotContext | None = None) -> np.ndarray:
        v = [d.cpu_freq / self.f_unit, d.tx_rate / self.r_unit]
        if self.literal:
            e_out = 0.0
            if ctx is not None:
                e_out = energy_balance(d, ctx, self.pp, self.pp.battery_cap).e_out
            v = [e_out] + v
        return np.array(v)

    def project(self, x_raw: np.ndarray, ctx: SlotContext) -> np.ndarray:
        lo, hi = self.bounds(ctx)
        return clamp(np.asarray(x_raw, dtype=float), lo, hi)

    def initial(self, ctx: SlotContext) -> np.ndarray:
        """Box midpoint; tx_rate is zero outside contact."""
        lo, hi = self.bounds(ctx)
        mid = 0.5 * (lo + hi)
        if self.literal:
            mid[0] = 0.0
        return mid

    def g_tilde(self, x: np.ndarray, ctx: SlotContext) -> np.ndarray:
        g1, g2 = constraint_values(self.to_decision(x), ctx, self.pp)
        return self.gamma / self.g_unit * np.array([g1, g2])

    def grad(self, x: np.ndarray, ctx: SlotContext) -> tuple[float, np.ndarray]:
        """Realized objective and subgradient in learner coordinates."""
        d = self.to_decision(x)
        value, (df, dr) = discharge_objective(d, ctx, self.pp)
        if self.literal:
            return value, np.array([1.0, 0.0, 0.0])
        g = self.obj_scale * np.array([df * self.f_unit, dr * self.r_unit])
        if self.grad_clip is not None:
            n = float(np.linalg.norm(g))
            if n > self.grad_clip:
                g *= self.grad_clip / n
        return value, g

    def grad_bound(self, snr_min: float) -> float:
        """Norm bound of the composite subgradient over the box at the worst SNR."""
        pp = self.pp
        df = 3.0 * pp.capacitance_coeff * pp.cpu_max ** 2 * pp.slot_duration * self.f_unit
        dr = (math.log(2.0) / pp.bandwidth * 2.0 ** (pp.rate_max / pp.bandwidth)
              * pp.slot_duration / snr_min * self.r_unit)
        return self.obj_scale * math.hypot(df, dr)


def project_box(x: np.ndarray, ctx: SlotContext, space: LearnerSpace) -> Decision:
    return space.to_decision(space.project(x, ctx))


def oco_step(st: LearnerState, p: OcoParams, ctx: SlotContext, space: LearnerSpace) -> np.ndarray:
    """Closed-form drift-plus-penalty update: projected step of length 1/(2 alpha) along d."""
    d = direction(st.grad_prev, st.vq, st.g_prev, space.g_rows)
    return space.project(st.x_prev - d / (2.0 * p.alpha), ctx)


def surrogate(st: LearnerState, p: OcoParams, ctx: SlotContext, space: LearnerSpace,
              x: np.ndarray) -> np.ndarray:
    """Per-slot drift-plus-penalty objective evaluated at points ``x`` (shape (..., dim))."""
    x = np.asarray(x, dtype=float)
    dx = x - st.x_prev
    lin = dx @ st.grad_prev
    w = st.vq + st.g_prev
    # g~ is affine: g~(x) = g~(x_prev) + rows (x - x_prev)
    g_at = st.g_prev + dx @ space.g_rows.T
    return lin + g_at @ w + p.alpha * np.sum(dx * dx, axis=-1)


def reference_min(st: LearnerState, p: OcoParams, ctx: SlotContext, space: LearnerSpace,
                  levels: int = 401) -> np.ndarray:
    """Brute-force grid minimizer of the drift-plus-penalty objective over the box."""
    if space.literal:
        raise ValueError("grid reference needs a bounded box")
    lo, hi = space.bounds(ctx)
    axes = [np.linspace(a, b, levels) if b > a else np.array([a]) for a, b in zip(lo, hi)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    vals = surrogate(st, p, ctx, space, grid)
    idx = np.unravel_index(np.argmin(vals), vals.shape)
    return grid[idx]

"""Physical state updates: battery queue, data queues and per-slot energy accounting.

All quantities are SI (J, s, Hz, bit) except ``cam_power`` which is J/min.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .environment import SlotContext

LN2 = math.log(2.0)
# relative slack when checking decisions against the box
FEAS_TOL = 1e-9


@dataclass(frozen=True)
class PowerParams:
    cam_power: float = 2.0  # J/min
    capacitance_coeff: float = 1e-28  # J s^2 / cycle^3
    bits_per_cycle: float = 0.1
    effective_fraction: float = 0.25
    cpu_max: float = 4e9  # cycles/s
    rate_max: float = 5e8  # bit/s
    battery_cap: float = 10800.0  # J
    bandwidth: float = 80e6  # Hz
    frame_size_bits: float = 60e6
    slot_duration: float = 60.0  # s

    def validate(self) -> list[str]:
        errs = []
        for name in ("cam_power", "capacitance_coeff", "bits_per_cycle", "cpu_max",
                     "rate_max", "battery_cap", "frame_size_bits"):
            if getattr(self, name) < 0:
                errs.append(f"{name}: must be non-negative")
        if not 0.0 <= self.effective_fraction <= 1.0:
            errs.append("effective_fraction: must lie in [0, 1]")
        if self.bandwidth <= 0:
            errs.append("bandwidth: must be positive")
        if self.slot_duration <= 0:
            errs.append("slot_duration: must be positive")
        return errs


@dataclass(frozen=True)
class Decision:
    cpu_freq: float  # cycles/s
    tx_rate: float  # bit/s


@dataclass(frozen=True)
class SatelliteState:
    battery: float  # J
    q_cmp: float = 0.0  # bits
    q_com: float = 0.0  # bits


@dataclass(frozen=True)
class EnergyAccount:
    e_sen: float
    e_cmp: float
    e_com: float
    e_out: float
    e_in: float

    @property
    def consumption(self) -> float:
        return self.e_sen + self.e_cmp + self.e_com


class InfeasibleDecision(ValueError):
    pass


def rate_cap(ctx: SlotContext, pp: PowerParams) -> float:
    return pp.rate_max if ctx.contact else 0.0


def check_decision(d: Decision, ctx: SlotContext, pp: PowerParams) -> None:
    if not -FEAS_TOL * max(pp.cpu_max, 1.0) <= d.cpu_freq <= pp.cpu_max * (1 + FEAS_TOL):
        raise InfeasibleDecision(f"cpu_freq {d.cpu_freq!r} outside [0, {pp.cpu_max}]")
    cap = rate_cap(ctx, pp)
    if not -FEAS_TOL * max(pp.rate_max, 1.0) <= d.tx_rate <= cap + FEAS_TOL * max(pp.rate_max, 1.0):
        raise InfeasibleDecision(f"tx_rate {d.tx_rate!r} outside [0, {cap}] at slot {ctx.t}")


def is_feasible(d: Decision, ctx: SlotContext, pp: PowerParams) -> bool:
    try:
        check_decision(d, ctx, pp)
    except InfeasibleDecision:
        return False
    return True


def sensing_energy(pp: PowerParams) -> float:
    return pp.cam_power * pp.slot_duration / 60.0


def compute_energy(f: float, pp: PowerParams) -> float:
    if not -FEAS_TOL * max(pp.cpu_max, 1.0) <= f <= pp.cpu_max * (1 + FEAS_TOL):
        raise InfeasibleDecision(f"cpu_freq {f!r} outside [0, {pp.cpu_max}]")
    f = max(f, 0.0)
    return pp.capacitance_coeff * f ** 3 * pp.slot_duration


def comm_power(r: float, snr: float, pp: PowerParams) -> float:
    """Transmit power (W) needed to sustain rate ``r`` at linear SNR ``snr``."""
    if snr <= 0:
        raise ValueError(f"snr must be positive, got {snr!r}")
    if r < 0:
        raise ValueError(f"rate must be non-negative, got {r!r}")
    return math.expm1(LN2 * r / pp.bandwidth) / snr


def shannon_rate(power: float, snr: float, pp: PowerParams) -> float:
    return pp.bandwidth * math.log2(1.0 + power * snr)


def comm_energy(r: float, snr: float, pp: PowerParams) -> float:
    return comm_power(r, snr, pp) * pp.slot_duration


def energy_balance(d: Decision, ctx: SlotContext, pp: PowerParams, battery: float) -> EnergyAccount:
    """Split the slot's consumption between harvest, battery charge and discharge.

    Charge and discharge never happen in the same slot; surplus beyond the
    battery headroom is spilled.
    """
    e_sen = sensing_energy(pp)
    e_cmp = compute_energy(d.cpu_freq, pp)
    e_com = comm_energy(max(d.tx_rate, 0.0), ctx.snr, pp)
    need = e_sen + e_cmp + e_com + ctx.base_load
    if ctx.harvest_energy >= need:
        e_in = min(ctx.harvest_energy - need, max(pp.battery_cap - battery, 0.0))
        return EnergyAccount(e_sen, e_cmp, e_com, 0.0, e_in)
    return EnergyAccount(e_sen, e_cmp, e_com, need - ctx.harvest_energy, 0.0)


def battery_step(battery: float, acct: EnergyAccount, pp: PowerParams) -> float:
    return min(max(battery + acct.e_in - acct.e_out, 0.0), pp.battery_cap)


def sensed_amount(ctx: SlotContext, pp: PowerParams) -> float:
    return pp.frame_size_bits * ctx.frame_rate * pp.slot_duration


def q_cmp_step(q: float, ctx: SlotContext, d: Decision, pp: PowerParams) -> float:
    served = pp.bits_per_cycle * d.cpu_freq * pp.slot_duration
    return max(q + sensed_amount(ctx, pp) - served, 0.0)


def processed_amount(q: float, ctx: SlotContext, d: Decision, pp: PowerParams) -> float:
    return min(q + sensed_amount(ctx, pp), pp.bits_per_cycle * d.cpu_freq * pp.slot_duration)


def q_com_step(q: float, a_p: float, d: Decision, pp: PowerParams, ctx: SlotContext) -> float:
    return max(q + pp.effective_fraction * a_p - d.tx_rate * pp.slot_duration, 0.0)


def discharge_objective(d: Decision, ctx: SlotContext, pp: PowerParams) -> tuple[float, tuple[float, float]]:
    """Battery discharge of decision ``d`` and a subgradient w.r.t. (cpu_freq, tx_rate).

    At the kink (consumption exactly meets harvest) the discharging branch is
    returned.
    """
    check_decision(d, ctx, pp)
    f = max(d.cpu_freq, 0.0)
    r = max(d.tx_rate, 0.0)
    td = pp.slot_duration
    need = (sensing_energy(pp) + pp.capacitance_coeff * f ** 3 * td
            + math.expm1(LN2 * r / pp.bandwidth) / ctx.snr * td + ctx.base_load)
    value = need - ctx.harvest_energy
    if value < 0:
        return 0.0, (0.0, 0.0)
    df = 3.0 * pp.capacitance_coeff * f * f * td
    dr = LN2 / pp.bandwidth * 2.0 ** (r / pp.bandwidth) * td / ctx.snr
    return value, (df, dr)


def constraint_values(d: Decision, ctx: SlotContext, pp: PowerParams) -> tuple[float, float]:
    """Long-term constraint integrands in bit/s: compute backlog growth, downlink backlog growth."""
    kf = pp.bits_per_cycle * d.cpu_freq
    g1 = pp.frame_size_bits * ctx.frame_rate - kf
    g2 = pp.effective_fraction * kf - d.tx_rate
    return g1, g2


def step_state(state: SatelliteState, d: Decision, ctx: SlotContext,
               pp: PowerParams) -> tuple[SatelliteState, EnergyAccount]:
    """Advance battery and both data queues by one slot."""
    acct = energy_balance(d, ctx, pp, state.battery)
    a_p = processed_amount(state.q_cmp, ctx, d, pp)
    new = SatelliteState(
        battery=battery_step(state.battery, acct, pp),
        q_cmp=q_cmp_step(state.q_cmp, ctx, d, pp),
        q_com=q_com_step(state.q_com, a_p, d, pp, ctx),
    )
    return new, acct

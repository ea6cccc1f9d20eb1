"""Exogenous per-slot environment: sunlight, harvest, ground contact, channel, sensing load."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EnvParams:
    orbit_period_slots: int = 96
    light_fraction: float = 0.66
    harvest_peak: float = 30.0  # J/min
    contact_windows_per_orbit: int = 4
    contact_window_len: int = 8  # slots
    slot_duration: float = 60.0  # s
    snr_range: tuple[float, float] = (15.0, 20.0)
    frame_rate_range: tuple[float, float] = (0.0, 4.0)
    frame_rate_unit: str = "per_second"
    base_load: float = 0.0  # J per slot
    seed: int = 0

    def validate(self) -> list[str]:
        """Return a list of ``field: message`` strings; empty when consistent."""
        errs = []
        if not isinstance(self.orbit_period_slots, int) or self.orbit_period_slots < 1:
            errs.append("orbit_period_slots: must be a positive integer")
        if not 0.0 < self.light_fraction <= 1.0:
            errs.append("light_fraction: must lie in (0, 1]")
        if self.harvest_peak < 0:
            errs.append("harvest_peak: must be non-negative")
        if self.contact_windows_per_orbit < 0:
            errs.append("contact_windows_per_orbit: must be non-negative")
        if self.contact_window_len < 0:
            errs.append("contact_window_len: must be non-negative")
        if (isinstance(self.orbit_period_slots, int) and self.orbit_period_slots >= 1
                and self.contact_window_len * self.contact_windows_per_orbit > self.orbit_period_slots):
            errs.append("contact_window_len: windows per orbit exceed the orbit period")
        if self.slot_duration <= 0:
            errs.append("slot_duration: must be positive")
        lo, hi = self.snr_range
        if not 0 < lo <= hi:
            errs.append("snr_range: need 0 < lo <= hi")
        lo, hi = self.frame_rate_range
        if not 0 <= lo <= hi:
            errs.append("frame_rate_range: need 0 <= lo <= hi")
        if self.frame_rate_unit not in ("per_second", "per_minute"):
            errs.append("frame_rate_unit: must be 'per_second' or 'per_minute'")
        if self.base_load < 0:
            errs.append("base_load: must be non-negative")
        return errs

    @property
    def lit_slots(self) -> int:
        # round half up: 0.66 * 96 = 63.36 -> 63
        n = int(math.floor(self.light_fraction * self.orbit_period_slots + 0.5))
        return min(max(n, 1), self.orbit_period_slots)


@dataclass(frozen=True)
class SlotContext:
    t: int
    harvest_energy: float  # J over the slot
    in_light: bool
    contact: bool
    snr: float  # linear h/N0
    frame_rate: float  # frames/s
    base_load: float = 0.0  # J


def _phase(t: int, p: EnvParams) -> int:
    return (t - 1) % p.orbit_period_slots


def sun_angle(t: int, p: EnvParams) -> float | None:
    """Angle between panel normal and the Sun, or None in eclipse.

    Sweeps pi/2 -> 0 -> pi/2 across the lit arc so both sunrise and sunset
    slots harvest nothing and mid-arc harvests the peak.
    """
    tau = _phase(t, p)
    n_lit = p.lit_slots
    if tau >= n_lit:
        return None
    if n_lit == 1:
        return 0.0
    return 0.5 * math.pi * abs(2.0 * tau / (n_lit - 1) - 1.0)


def harvest_rate(t: int, p: EnvParams) -> float:
    """Harvest rate in J/min at slot ``t`` (1-based)."""
    theta = sun_angle(t, p)
    if theta is None:
        return 0.0
    return max(p.harvest_peak * math.cos(theta), 0.0)


def contact_mask(p: EnvParams) -> np.ndarray:
    """Boolean ground-contact pattern over one orbit.

    Windows alternate between the lit arc and the eclipse arc, first one in
    the light, and are spaced evenly and centred inside their arc.  With no
    eclipse every window goes in the light.
    """
    period, n_lit = p.orbit_period_slots, p.lit_slots
    mask = np.zeros(period, dtype=bool)
    n_win, wlen = p.contact_windows_per_orbit, p.contact_window_len
    if n_win == 0 or wlen == 0:
        return mask
    n_dark = n_win // 2 if n_lit < period else 0
    arcs = [(0, n_lit, n_win - n_dark), (n_lit, period - n_lit, n_dark)]
    for start, length, count in arcs:
        if count == 0:
            continue
        slot = length // count
        if slot < wlen:
            raise ValueError("contact_window_len: windows do not fit inside their light/eclipse arc")
        for j in range(count):
            lo = start + j * slot + (slot - wlen) // 2
            mask[lo:lo + wlen] = True
    return mask


def build_trace(p: EnvParams, horizon: int) -> list[SlotContext]:
    if horizon < 1:
        raise ValueError(f"horizon: must be >= 1, got {horizon}")
    errs = p.validate()
    if errs:
        raise ValueError("; ".join(errs))
    rng = np.random.default_rng(p.seed)
    snr = rng.uniform(p.snr_range[0], p.snr_range[1], size=horizon)
    fr = rng.uniform(p.frame_rate_range[0], p.frame_rate_range[1], size=horizon)
    if p.frame_rate_unit == "per_minute":
        fr = fr / 60.0
    mask = contact_mask(p)
    minutes = p.slot_duration / 60.0
    trace = []
    for i in range(horizon):
        t = i + 1
        ph = _phase(t, p)
        trace.append(SlotContext(
            t=t,
            harvest_energy=harvest_rate(t, p) * minutes,
            in_light=ph < p.lit_slots,
            contact=bool(mask[ph]),
            snr=float(snr[i]),
            frame_rate=float(fr[i]),
            base_load=p.base_load,
        ))
    return trace

"""Randomized invariants of the core building blocks."""

import numpy as np
from hypothesis import given, settings, strategies as st

from satdod.dynamics import Decision, PowerParams, SatelliteState, discharge_objective, is_feasible, step_state
from satdod.oco import OcoParams, vq_update
from satdod.scheduler import PatternPartition, SchedulerOptions, make_space, window_id

from conftest import make_ctx

PP = PowerParams()
finite = st.floats(-1e6, 1e6, allow_nan=False)
unit = st.floats(0.0, 1.0)
vec2 = st.tuples(finite, finite).map(np.array)


@st.composite
def contexts(draw):
    light = draw(st.booleans())
    return make_ctx(light=light, harvest=draw(st.floats(0, 200)) if light else 0.0,
                    contact=draw(st.booleans()), snr=draw(st.floats(15, 20)),
                    frame_rate=draw(st.floats(0, 4)), base_load=draw(st.floats(0, 5)))


@st.composite
def decisions(draw, ctx, pp=PP):
    f = draw(unit) * pp.cpu_max
    r = draw(unit) * pp.rate_max if ctx.contact else 0.0
    return Decision(f, r)


class TestVirtualQueue:
    @given(vec2, vec2)
    def test_update_invariants(self, vq, g):
        new = vq_update(vq, g)
        assert np.all(new + g >= 0)
        assert np.all(new >= vq + g)

    @given(st.lists(vec2, min_size=1, max_size=30))
    def test_penalty_weight_nonnegative(self, gs):
        vq = np.zeros(2)
        for g in gs:
            vq = vq_update(vq, g)
            assert np.all(vq + g >= 0)


class TestWindowId:
    @given(st.integers(1, 4), st.integers(1, 6), st.data())
    def test_total_and_in_range(self, dims, levels, data):
        part = PatternPartition(dims, levels)
        c = data.draw(st.lists(unit, min_size=dims, max_size=dims))
        k = window_id(c, part)
        assert 0 <= k < part.window_count

    @given(st.integers(1, 6), unit, unit)
    def test_monotone_in_each_feature(self, levels, a, b):
        part = PatternPartition(2, levels)
        lo, hi = sorted((a, b))
        assert window_id([lo, 0.5], part) <= window_id([hi, 0.5], part)


class TestProjection:
    @given(contexts(), st.tuples(finite, finite))
    def test_idempotent_and_feasible(self, ctx, raw):
        space = make_space(PP, OcoParams.from_horizon(1440), SchedulerOptions())
        x = space.project(np.array(raw) * 1e-3, ctx)
        assert np.array_equal(space.project(x, ctx), x)
        assert is_feasible(space.to_decision(x), ctx, PP)


class TestDynamicsInvariants:
    @settings(max_examples=200)
    @given(st.data(), st.floats(0, 1), st.floats(1, 20000))
    def test_random_walk(self, data, rho, cap):
        pp = PowerParams(effective_fraction=rho, battery_cap=cap)
        state = SatelliteState(data.draw(st.floats(0, cap)))
        for _ in range(data.draw(st.integers(1, 8))):
            ctx = data.draw(contexts())
            d = data.draw(decisions(ctx, pp))
            state, acct = step_state(state, d, ctx, pp)
            assert 0.0 <= state.battery <= cap
            assert state.q_cmp >= 0 and state.q_com >= 0
            assert acct.e_out * acct.e_in == 0.0
            assert acct.e_out >= 0 and acct.e_in >= 0

    @given(st.data(), st.floats(0, 1))
    def test_objective_convex(self, data, lam):
        ctx = data.draw(contexts())
        a, b = data.draw(decisions(ctx)), data.draw(decisions(ctx))
        mid = Decision(lam * a.cpu_freq + (1 - lam) * b.cpu_freq, lam * a.tx_rate + (1 - lam) * b.tx_rate)
        fa, fb, fm = (discharge_objective(d, ctx, PP)[0] for d in (a, b, mid))
        assert fm <= lam * fa + (1 - lam) * fb + 1e-9 * max(1.0, fa, fb)

    @given(st.data())
    def test_subgradient_inequality(self, data):
        ctx = data.draw(contexts())
        a, b = data.draw(decisions(ctx)), data.draw(decisions(ctx))
        fa, (df, dr) = discharge_objective(a, ctx, PP)
        fb = discharge_objective(b, ctx, PP)[0]
        lin = fa + df * (b.cpu_freq - a.cpu_freq) + dr * (b.tx_rate - a.tx_rate)
        assert fb >= lin - 1e-9 * max(1.0, abs(fa), abs(fb))

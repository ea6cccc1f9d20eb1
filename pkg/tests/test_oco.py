import itertools
import math

import numpy as np
import pytest

from satdod.dynamics import Decision
from satdod.oco import (LearnerSpace, LearnerState, OcoParams, direction, oco_step, project_box,
                        reference_min, surrogate, vq_update)
from satdod.scheduler import SchedulerOptions, make_space

from conftest import make_ctx


def random_state(space, ctx, rng):
    lo, hi = space.bounds(ctx)
    x = rng.uniform(lo, hi)
    _, grad = space.grad(x, ctx)
    return LearnerState(x_prev=x, vq=rng.uniform(0, 50, 2), g_prev=space.g_tilde(x, ctx), grad_prev=grad)


class TestParams:
    def test_schedule(self):
        p = OcoParams.from_horizon(1440, 14.0)
        assert p.gamma == pytest.approx(1440 ** 0.25)
        assert p.eta == pytest.approx(math.sqrt(1440))
        assert p.alpha == pytest.approx(0.5 * 197 * math.sqrt(1440))

    def test_schedule_meets_condition(self):
        for T, beta in itertools.product((1, 360, 1440), (0.0, 7.0, 14.0)):
            p = OcoParams.from_horizon(T, beta)
            assert p.alpha >= p.alpha_condition() * (1 - 1e-12)
            assert p.validate(theory_mode=True) == ([], [])

    def test_condition_warning(self):
        p = OcoParams(alpha=1.0, gamma=2.0, beta=14.0, eta=1.0)
        errs, warns = p.validate(theory_mode=True)
        assert errs == []
        assert len(warns) == 1 and "(gamma^2 beta^2 + eta)/2" in warns[0]
        assert p.validate(theory_mode=False) == ([], [])

    def test_errors(self):
        errs, _ = OcoParams(alpha=0.0, gamma=-1.0, beta=-1.0, eta=0.0).validate()
        assert [e.split(":")[0] for e in errs] == ["alpha", "gamma", "beta", "eta"]


class TestVirtualQueue:
    def test_examples(self):
        assert list(vq_update([0, 0], [-5, -5])) == [5, 5]
        assert list(vq_update([3, 0], [2, 0])) == [5, 0]
        assert list(vq_update([0, 0], [0, 0])) == [0, 0]

    def test_nonnegative(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            q = rng.uniform(0, 10, 2)
            g = rng.normal(0, 10, 2)
            new = vq_update(q, g)
            assert np.all(new >= 0) and np.all(new + g >= 0)

    def test_increment_bound(self, pp):
        # |Q(t) - Q(t-1)| <= max |g~| over the box corners
        ctx = make_ctx(contact=True, frame_rate=4.0)
        space = LearnerSpace(pp, gamma=1440 ** 0.25)
        lo, hi = space.bounds(ctx)
        corners = [np.array(c) for c in itertools.product(*zip(lo, hi))]
        g2 = max(np.linalg.norm(space.g_tilde(c, ctx)) for c in corners)
        rng = np.random.default_rng(1)
        q = np.zeros(2)
        for _ in range(300):
            g = space.g_tilde(rng.uniform(lo, hi), ctx)
            new = vq_update(q, g)
            assert np.linalg.norm(new - q) <= g2 + 1e-9
            q = new


class TestDirection:
    def test_no_penalty(self):
        rows = np.array([[-0.1, 0.0], [0.025, -1.0]])
        assert list(direction([1.0, 2.0], [0, 0], [0, 0], rows)) == [1.0, 2.0]

    def test_compute_backlog(self, pp):
        space = LearnerSpace(pp, gamma=1.0, scaling="native")
        d = direction([0, 0], [1, 0], [0, 0], space.g_rows)
        assert d == pytest.approx([-pp.bits_per_cycle, 0.0])

    def test_native_rows(self, pp):
        space = LearnerSpace(pp, gamma=2.0, scaling="native")
        k, rho = pp.bits_per_cycle, pp.effective_fraction
        assert space.g_rows == pytest.approx(2.0 * np.array([[-k, 0.0], [rho * k, -1.0]]))

    def test_linear_in_weight(self):
        rows = np.array([[-0.1, 0.0], [0.025, -1.0]])
        d1 = direction([0, 0], [1, 2], [0.5, 0.5], rows)
        d2 = direction([0, 0], [2.5, 4.5], [0.5, 0.5], rows)
        assert d2 == pytest.approx(2 * d1)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape"):
            direction([0, 0], [0, 0, 0], [0, 0, 0], np.zeros((2, 2)))

    def test_rows_match_constraints(self, pp):
        # rows are the exact gradient of the affine g~
        ctx = make_ctx(contact=True, frame_rate=1.5)
        space = LearnerSpace(pp, gamma=3.0)
        x, dx = np.array([0.3, 0.4]), np.array([0.05, -0.1])
        assert space.g_tilde(x + dx, ctx) - space.g_tilde(x, ctx) == pytest.approx(space.g_rows @ dx)


class TestProjection:
    def test_in_box_unchanged(self, pp):
        space = LearnerSpace(pp, 1.0, scaling="native")
        d = project_box(np.array([1e9, 2e8]), make_ctx(contact=True), space)
        assert d == Decision(1e9, 2e8)

    def test_clamp(self, pp):
        space = LearnerSpace(pp, 1.0, scaling="native")
        d = project_box(np.array([-1e9, 9e8]), make_ctx(contact=True), space)
        assert d == Decision(0.0, 5e8)

    def test_no_contact(self, pp):
        space = LearnerSpace(pp, 1.0, scaling="native")
        assert project_box(np.array([1e9, 3e8]), make_ctx(contact=False), space).tx_rate == 0.0

    def test_idempotent(self, pp):
        space = LearnerSpace(pp, 1.0)
        ctx = make_ctx(contact=True)
        rng = np.random.default_rng(2)
        for _ in range(50):
            x = space.project(rng.normal(0, 2, 2), ctx)
            assert list(space.project(x, ctx)) == list(x)


class TestStep:
    def test_zero_direction(self, pp):
        space = LearnerSpace(pp, 1.0)
        ctx = make_ctx(contact=True)
        st = LearnerState(np.array([0.4, 0.3]), np.zeros(2), np.zeros(2), np.zeros(2))
        assert list(oco_step(st, OcoParams(10.0, 1.0, 0.0, 1.0), ctx, space)) == [0.4, 0.3]

    def test_vanishing_step(self, pp):
        space = LearnerSpace(pp, 1.0)
        ctx = make_ctx(contact=True, frame_rate=2.0)
        st = random_state(space, ctx, np.random.default_rng(3))
        x = oco_step(st, OcoParams(1e12, 1.0, 0.0, 1.0), ctx, space)
        assert x == pytest.approx(st.x_prev, abs=1e-9)

    def test_reference_at_stationary_state(self, pp):
        space = LearnerSpace(pp, 1.0)
        ctx = make_ctx(contact=True)
        st = LearnerState(np.array([0.5, 0.5]), np.zeros(2), np.zeros(2), np.zeros(2))
        assert reference_min(st, OcoParams(10.0, 1.0, 0.0, 1.0), ctx, space) == pytest.approx([0.5, 0.5])

    def test_matches_grid_minimizer(self, pp):
        op = OcoParams.from_horizon(1440)
        space = make_space(pp, op, SchedulerOptions())
        rng = np.random.default_rng(4)
        cell = 1.0 / 400
        for i in range(25):
            ctx = make_ctx(contact=bool(i % 2), light=True, harvest=rng.uniform(0, 30),
                           snr=rng.uniform(15, 20), frame_rate=rng.uniform(0, 4))
            st = random_state(space, ctx, rng)
            x = oco_step(st, op, ctx, space)
            ref = reference_min(st, op, ctx, space)
            assert np.max(np.abs(x - ref)) <= cell + 1e-6

    def test_surrogate_minimized_by_step(self, pp):
        # the closed form is at least as good as any grid point
        op = OcoParams(50.0, 2.0, 1.0, 1.0)
        space = LearnerSpace(pp, op.gamma)
        ctx = make_ctx(contact=True, frame_rate=3.0)
        st = random_state(space, ctx, np.random.default_rng(5))
        x = oco_step(st, op, ctx, space)
        grid = np.stack(np.meshgrid(np.linspace(0, 1, 101), np.linspace(0, 1, 101), indexing="ij"), -1)
        assert surrogate(st, op, ctx, space, x) <= surrogate(st, op, ctx, space, grid).min() + 1e-9


class TestLearnerSpace:
    def test_round_trip(self, pp):
        space = LearnerSpace(pp, 1.0)
        d = Decision(1.2e9, 3e8)
        assert space.to_decision(space.to_vector(d)) == d

    def test_initial_midpoint(self, pp):
        space = LearnerSpace(pp, 1.0)
        assert list(space.initial(make_ctx(contact=True))) == [0.5, 0.5]
        assert list(space.initial(make_ctx(contact=False))) == [0.5, 0.0]

    def test_grad_clip(self, pp):
        space = LearnerSpace(pp, 1.0, grad_clip=1.0)
        _, g = space.grad(np.array([1.0, 1.0]), make_ctx(contact=True, snr=15.0))
        assert np.linalg.norm(g) == pytest.approx(1.0)

    def test_grad_bound_holds(self, pp):
        space = LearnerSpace(pp, 1.0, obj_scale=3.0)
        bound = space.grad_bound(15.0)
        rng = np.random.default_rng(6)
        for _ in range(100):
            _, g = space.grad(rng.uniform(0, 1, 2), make_ctx(contact=True, snr=rng.uniform(15, 20)))
            assert np.linalg.norm(g) <= bound * (1 + 1e-12)

    def test_literal_form(self, pp):
        space = LearnerSpace(pp, 1.0, literal=True)
        ctx = make_ctx(contact=True, frame_rate=1.0)
        value, g = space.grad(np.array([0.0, 0.5, 0.5]), ctx)
        assert list(g) == [1.0, 0.0, 0.0]
        assert space.g_rows.shape == (2, 3) and np.all(space.g_rows[:, 0] == 0)
        assert value > 0

    def test_unknown_scaling(self, pp):
        with pytest.raises(ValueError, match="scaling"):
            LearnerSpace(pp, 1.0, scaling="log")

import numpy as np
import pytest

from shapereg.errors import ContractError
from shapereg.kernel import (
    curve_normal,
    metric_inverse,
    momentum_deposit_scale,
    spline_eval_grid,
    spread_to_grid,
)
from shapereg.scenarios import template_circle
from shapereg.shooting import (
    hamiltonian,
    shoot,
    shoot_adjoint,
    shoot_jvp,
    shoot_phase,
    velocity_field,
)
from shapereg.types import PhaseState, ScalarLoopField, ShootConfig

# frozen oracle: shoot(p0 == 1) on the template circle with n_p=1000,
# steps=800 gives a concentric circle of this radius (drift 5e-15)
REFERENCE_RADIUS_CONST_P0 = 1.077066859998


def knots(n):
    return 2.0 * np.pi * np.arange(n) / n


def smooth_p0(s):
    return 0.8 * np.cos(s) + 0.5 * np.sin(2 * s) + 0.3


class TestShoot:
    def test_zero_momentum_fixed_point(self, circle100, cfg_default):
        traj = shoot(ScalarLoopField.zeros(100), circle100, cfg_default)
        assert np.array_equal(traj.final.q, circle100.points)
        assert np.all(traj.final.p == 0.0)
        assert len(traj.states) == cfg_default.steps + 1

    def test_constant_momentum_concentric_circle(self, circle100, cfg_default):
        traj = shoot(ScalarLoopField(np.ones(100)), circle100, cfg_default)
        radii = np.hypot(traj.final.q[:, 0] - np.pi, traj.final.q[:, 1] - np.pi)
        assert radii.max() - radii.min() < 1e-4
        assert abs(radii.mean() - REFERENCE_RADIUS_CONST_P0) < 1e-3

    def test_rk4_temporal_order(self, circle100):
        # error vs a steps=800 reference drops ~16x from steps=50 to 100
        p0 = ScalarLoopField(smooth_p0(knots(100)))
        ref = shoot(p0, circle100, ShootConfig(steps=800), check_drift=False).final.q
        errs = {}
        for steps in (50, 100):
            q = shoot(p0, circle100, ShootConfig(steps=steps), check_drift=False).final.q
            errs[steps] = np.sqrt(np.mean((q - ref) ** 2))
        ratio = errs[50] / errs[100]
        assert 8 < ratio < 40

    def test_index_rotation_equivariance(self, circle100, cfg_fast):
        n, m = 100, 13
        p0 = smooth_p0(knots(n))
        base = shoot(ScalarLoopField(p0), circle100, cfg_fast, check_drift=False).final.q
        from shapereg.types import ClosedCurve2D

        rolled_curve = ClosedCurve2D(np.roll(circle100.points, -m, axis=0))
        rolled = shoot(
            ScalarLoopField(np.roll(p0, -m)), rolled_curve, cfg_fast, check_drift=False
        ).final.q
        np.testing.assert_allclose(rolled, np.roll(base, -m, axis=0), atol=1e-11)

    def test_length_mismatch_rejected(self, circle100, cfg_fast):
        with pytest.raises(ContractError):
            shoot(ScalarLoopField.zeros(64), circle100, cfg_fast)


class TestHamiltonian:
    def test_zero_momentum(self, circle48, cfg_fast):
        state = PhaseState(np.zeros((48, 2)), circle48.points)
        assert hamiltonian(state, cfg_fast) == 0.0

    def test_quadratic_scaling(self, circle48, cfg_fast, rng):
        p = rng.standard_normal((48, 2))
        state = PhaseState(p, circle48.points)
        h1 = hamiltonian(state, cfg_fast)
        h3 = hamiltonian(PhaseState(3.0 * p, circle48.points), cfg_fast)
        assert h3 == pytest.approx(9.0 * h1, rel=1e-12)
        assert h1 > 0.0

    def test_two_route_identity(self, circle48, cfg_fast, rng):
        # 0.5 <p, eval(u, q)> equals 0.5 <J, A^-1 J> for the weighted deposit
        p = rng.standard_normal((48, 2))
        state = PhaseState(p, circle48.points)
        h = hamiltonian(state, cfg_fast)
        w = momentum_deposit_scale(48, cfg_fast.n_g)
        J = spread_to_grid(w * p, circle48.points, cfg_fast.n_g)
        other = 0.5 * np.sum(J.data * metric_inverse(J, cfg_fast.metric).data) / w
        assert h == pytest.approx(other, rel=1e-12)

    def test_drift_small_for_prior_draws(self, circle100, cfg_default):
        from shapereg.prior import paper_default_priors, sample_prior

        rng = np.random.default_rng(77)
        priors = paper_default_priors()
        for _ in range(5):
            p0 = sample_prior(priors.momentum_prior, rng, 100)
            traj = shoot(p0, circle100, cfg_default, check_drift=False)
            assert traj.drift <= 1e-3


class TestVelocityField:
    def test_zero(self, circle48, cfg_fast):
        state = PhaseState(np.zeros((48, 2)), circle48.points)
        assert np.all(velocity_field(state, cfg_fast).data == 0.0)

    def test_linearity(self, circle48, cfg_fast, rng):
        p = rng.standard_normal((48, 2))
        u1 = velocity_field(PhaseState(p, circle48.points), cfg_fast).data
        u2 = velocity_field(PhaseState(2.5 * p, circle48.points), cfg_fast).data
        np.testing.assert_allclose(u2, 2.5 * u1, atol=1e-13)

    def test_single_particle_symmetry(self, cfg_fast):
        # place one particle at a grid node: u_x must be even in both axes
        n_g = cfg_fast.n_g
        node = 16
        q = np.full((4, 2), 2 * np.pi * node / n_g)
        q += 1e-9 * np.arange(4)[:, None]  # distinct consecutive points
        p = np.zeros((4, 2))
        p[0, 0] = 1.0
        state = PhaseState(p, q)
        u = velocity_field(state, cfg_fast).data
        ux = np.roll(u[..., 0], -node, axis=(0, 1))
        np.testing.assert_allclose(ux, np.flip(np.roll(ux, -1, axis=0), axis=0), atol=1e-9)
        np.testing.assert_allclose(ux, np.flip(np.roll(ux, -1, axis=1), axis=1), atol=1e-9)


class TestAdjoint:
    def make_traj(self, n=60, steps=20):
        circ = template_circle(n)
        cfg = ShootConfig(steps=steps)
        p0 = ScalarLoopField(smooth_p0(knots(n)))
        return shoot(p0, circ, cfg, cache_stages=True), circ, cfg

    def test_zero_cotangent(self):
        traj, _, _ = self.make_traj()
        gP, gQ = shoot_adjoint(traj, np.zeros((60, 2)))
        assert np.all(gP == 0.0) and np.all(gQ == 0.0)

    def test_transpose_identity(self, rng):
        traj, _, _ = self.make_traj()
        cobar = rng.standard_normal((60, 2))
        dP = rng.standard_normal((60, 2))
        dQ = rng.standard_normal((60, 2))
        _, dQ1 = shoot_jvp(traj, dP, dQ)
        gP, gQ = shoot_adjoint(traj, cobar)
        lhs = np.sum(cobar * dQ1)
        rhs = np.sum(gP * dP) + np.sum(gQ * dQ)
        assert abs(lhs - rhs) <= 1e-10 * abs(lhs)

    def test_gradient_vs_finite_differences(self, rng):
        traj, circ, cfg = self.make_traj()
        cobar = rng.standard_normal((60, 2))
        gP, _ = shoot_adjoint(traj, cobar)
        normals = curve_normal(circ)
        g_scalar = np.sum(gP * normals, axis=1)
        p0 = smooth_p0(knots(60))

        def loss(values):
            t = shoot(ScalarLoopField(values), circ, cfg, check_drift=False)
            return np.sum(cobar * t.final.q)

        eps = 1e-6
        for _ in range(3):
            d = rng.standard_normal(60)
            fd = (loss(p0 + eps * d) - loss(p0 - eps * d)) / (2 * eps)
            ad = np.sum(g_scalar * d)
            assert abs(fd - ad) <= 1e-5 * abs(fd)

    def test_zero_momentum_perturbation_gradient(self, rng):
        # gradient at p0 = 0 against central differences
        n = 48
        circ = template_circle(n)
        cfg = ShootConfig(steps=15)
        traj = shoot(ScalarLoopField.zeros(n), circ, cfg, cache_stages=True)
        cobar = rng.standard_normal((n, 2))
        gP, _ = shoot_adjoint(traj, cobar)
        g_scalar = np.sum(gP * curve_normal(circ), axis=1)
        d = np.zeros(n)
        d[7] = 1.0
        eps = 1e-6

        def loss(values):
            t = shoot(ScalarLoopField(values), circ, cfg, check_drift=False)
            return np.sum(cobar * t.final.q)

        fd = (loss(eps * d) - loss(-eps * d)) / (2 * eps)
        assert abs(fd - np.sum(g_scalar * d)) <= 1e-6 * max(abs(fd), 1e-12)

    def test_missing_cache_rejected(self, circle48, cfg_fast):
        traj = shoot(ScalarLoopField.zeros(48), circle48, cfg_fast)
        with pytest.raises(ContractError):
            shoot_adjoint(traj, np.zeros((48, 2)))


def test_blow_up_guard(circle48):
    # gigantic momentum produces a non-finite state within a step or two
    from shapereg.errors import BlowUpError, IntegrationAccuracyError

    with pytest.raises((BlowUpError, IntegrationAccuracyError)):
        shoot(ScalarLoopField(np.full(48, 1e14)), circle48, ShootConfig(steps=2))

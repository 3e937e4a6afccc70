"""Geodesic shooting: RK4 flow of the momentum-curve system with exact
discrete adjoint and forward linearisation.

The flow solves qdot = u(q), pdot = -(grad u(q))^T p with the velocity
obtained by spreading the momentum to the grid and inverting the metric
spectrally. The time stepper is classical RK4 with the Hamiltonian monitored
as a conservation check; the adjoint is the exact transpose of the stepped
linearisation (reverse sweep over the cached RK4 stages).

Internally the two velocity components travel through the spectral solve
packed as one complex field (x real, y imaginary); the multiplier is real
and even, so the components stay exactly independent.
"""

import numpy as np
import scipy.fft as sfft

from . import _stencils
from .errors import BlowUpError, ContractError, IntegrationAccuracyError
from .kernel import (
    _prefilter_symbol_full,
    curve_normal,
    metric_inverse,
    metric_symbol,
    momentum_deposit_scale,
    spread_to_grid,
)
from .types import ClosedCurve2D, PhaseState, ScalarLoopField, ShootConfig


class FlowOps:
    """Precomputed symbols, scales, and scratch buffers for one shoot."""

    def __init__(self, n_p, cfg):
        self.n_p = n_p
        self.n_g = cfg.n_g
        self.w = momentum_deposit_scale(n_p, cfg.n_g)
        b = _prefilter_symbol_full(cfg.n_g)
        b2 = (b[:, None] * b[None, :]) ** 2
        lam_inv = metric_symbol(cfg.n_g, cfg.metric, inverse=True, rfft_layout=False)
        # raw deposit -> velocity B-spline coefficients: two prefilter inverses
        # (spread transpose and value->coefficient) around the metric inverse
        self.sym_ucoef = lam_inv / b2
        self._dep = np.zeros((cfg.n_g, cfg.n_g), dtype=np.complex128)

    def apply_symbol(self, z):
        return sfft.ifft2(sfft.fft2(z) * self.sym_ucoef)

    def ucoef(self, P, Q):
        """Velocity B-spline coefficients generated by the phase state."""
        self._dep[:] = 0.0
        _stencils.grid_deposit(Q, self.w * P, self.n_g, self._dep)
        return self.apply_symbol(self._dep)

    def rates(self, P, Q):
        coef = self.ucoef(P, Q)
        pdot = np.empty_like(P)
        qdot = np.empty_like(Q)
        _stencils.stage_rates(coef, P, Q, pdot, qdot)
        return pdot, qdot, coef

    def hamiltonian(self, P, Q, coef=None):
        if coef is None:
            coef = self.ucoef(P, Q)
        u = np.empty_like(Q)
        _stencils.grid_eval(coef, Q, u)
        return 0.5 * float(np.sum(P * u))


class Trajectory:
    """Time-node states of one shoot, with optional per-stage adjoint cache."""

    def __init__(self, states, cfg, h0, h1, stage_P=None, stage_Q=None, stage_coef=None):
        self.states = states
        self.cfg = cfg
        self.h0 = h0
        self.h1 = h1
        self.stage_P = stage_P
        self.stage_Q = stage_Q
        self.stage_coef = stage_coef

    @property
    def initial(self):
        return self.states[0]

    @property
    def final(self):
        return self.states[-1]

    @property
    def drift(self):
        return abs(self.h1 - self.h0) / max(self.h0, 1e-30)

    @property
    def has_stage_cache(self):
        return self.stage_P is not None


def velocity_field(state, cfg):
    """Velocity node values: metric inverse of the spread momentum."""
    w = momentum_deposit_scale(state.n_p, cfg.n_g)
    return metric_inverse(spread_to_grid(w * state.p, state.q, cfg.n_g), cfg.metric)


def hamiltonian(state, cfg):
    """Conserved quantity 0.5 <p, u(q)> of the flow; nonnegative."""
    ops = FlowOps(state.n_p, cfg)
    return ops.hamiltonian(state.p, state.q)


def shoot_phase(state, cfg, cache_stages=False, check_drift=True, keep_path=True):
    """Integrate the flow from an arbitrary phase state to time 1.

    keep_path=False skips intermediate state objects (sampler hot path);
    the returned trajectory then holds the initial and final states only.
    """
    ops = FlowOps(state.n_p, cfg)
    dt = 1.0 / cfg.steps
    P = state.p.copy()
    Q = state.q.copy()
    h0 = ops.hamiltonian(P, Q)
    states = [state]
    stage_P = [] if cache_stages else None
    stage_Q = [] if cache_stages else None
    stage_coef = [] if cache_stages else None
    for _ in range(cfg.steps):
        p1, q1, c1 = ops.rates(P, Q)
        P2 = P + 0.5 * dt * p1
        Q2 = Q + 0.5 * dt * q1
        p2, q2, c2 = ops.rates(P2, Q2)
        P3 = P + 0.5 * dt * p2
        Q3 = Q + 0.5 * dt * q2
        p3, q3, c3 = ops.rates(P3, Q3)
        P4 = P + dt * p3
        Q4 = Q + dt * q3
        p4, q4, c4 = ops.rates(P4, Q4)
        if cache_stages:
            stage_P.append(np.stack([P, P2, P3, P4]))
            stage_Q.append(np.stack([Q, Q2, Q3, Q4]))
            stage_coef.append(np.stack([c1, c2, c3, c4]))
        P = P + (dt / 6.0) * (p1 + 2.0 * p2 + 2.0 * p3 + p4)
        Q = Q + (dt / 6.0) * (q1 + 2.0 * q2 + 2.0 * q3 + q4)
        if not np.isfinite(P.sum() + Q.sum()):
            raise BlowUpError("non-finite phase state during shooting")
        if keep_path:
            states.append(PhaseState(P, Q))
    if not (np.all(np.isfinite(P)) and np.all(np.isfinite(Q))):
        raise BlowUpError("non-finite phase state during shooting")
    if not keep_path:
        states.append(PhaseState(P, Q))
    h1 = ops.hamiltonian(P, Q)
    traj = Trajectory(states, cfg, h0, h1, stage_P, stage_Q, stage_coef)
    if check_drift and traj.drift > cfg.hamiltonian_tol:
        raise IntegrationAccuracyError(
            f"Hamiltonian drift {traj.drift:.3e} exceeds tolerance {cfg.hamiltonian_tol:.3e};"
            " raise the step count"
        )
    return traj


def shoot(p0, q0, cfg, cache_stages=False, check_drift=True, keep_path=True):
    """Shoot from a scalar normal momentum on a curve: p(0) = p0 * n."""
    values = p0.values if isinstance(p0, ScalarLoopField) else np.asarray(p0, dtype=np.float64)
    if not isinstance(q0, ClosedCurve2D):
        q0 = ClosedCurve2D(q0)
    if values.shape[0] != q0.n_p:
        raise ContractError(f"p0 has {values.shape[0]} samples but curve has {q0.n_p}")
    P0 = values[:, None] * curve_normal(q0)
    return shoot_phase(PhaseState(P0, q0.points), cfg, cache_stages, check_drift, keep_path)


def _stage_transpose(ops, P, Q, coef, gpd, gqd):
    gP = np.zeros_like(P)
    gQ = np.zeros_like(Q)
    gcoef = np.zeros_like(coef)
    _stencils.stage_adjoint_local(coef, P, Q, gpd, gqd, gP, gQ, gcoef)
    gm = ops.apply_symbol(gcoef)
    _stencils.stage_adjoint_deposit(gm, P, Q, ops.w, gP, gQ)
    return gP, gQ


def shoot_adjoint(traj, cobar, cfg=None):
    """Gradient of <cobar, q(1)> with respect to the initial covectors.

    Returns (grad_p_covectors, grad_q): the exact transpose of the stepped
    linearisation, so the pair also feeds the reparameterisation adjoint.
    """
    if not traj.has_stage_cache:
        raise ContractError("trajectory was shot without cache_stages=True")
    cfg = cfg or traj.cfg
    ops = FlowOps(traj.initial.n_p, cfg)
    dt = 1.0 / cfg.steps
    gP = np.zeros_like(traj.initial.p)
    gQ = np.asarray(cobar, dtype=np.float64).copy()
    if gQ.shape != gP.shape:
        raise ContractError(f"cobar must be (n_p, 2), got {gQ.shape}")
    for step in reversed(range(len(traj.stage_P))):
        Ps = traj.stage_P[step]
        Qs = traj.stage_Q[step]
        Cs = traj.stage_coef[step]
        gk4 = (dt / 6.0) * gP, (dt / 6.0) * gQ
        jt4 = _stage_transpose(ops, Ps[3], Qs[3], Cs[3], *gk4)
        gk3 = (dt / 3.0) * gP + dt * jt4[0], (dt / 3.0) * gQ + dt * jt4[1]
        jt3 = _stage_transpose(ops, Ps[2], Qs[2], Cs[2], *gk3)
        gk2 = (dt / 3.0) * gP + 0.5 * dt * jt3[0], (dt / 3.0) * gQ + 0.5 * dt * jt3[1]
        jt2 = _stage_transpose(ops, Ps[1], Qs[1], Cs[1], *gk2)
        gk1 = (dt / 6.0) * gP + 0.5 * dt * jt2[0], (dt / 6.0) * gQ + 0.5 * dt * jt2[1]
        jt1 = _stage_transpose(ops, Ps[0], Qs[0], Cs[0], *gk1)
        gP = gP + jt1[0] + jt2[0] + jt3[0] + jt4[0]
        gQ = gQ + jt1[1] + jt2[1] + jt3[1] + jt4[1]
    return gP, gQ


def _stage_linearize(ops, P, Q, coef, dP, dQ):
    draw = np.zeros((ops.n_g, ops.n_g), dtype=np.complex128)
    _stencils.deposit_linearized(P, Q, dP, dQ, ops.w, ops.n_g, draw)
    dcoef = ops.apply_symbol(draw)
    dpdot = np.empty_like(P)
    dqdot = np.empty_like(Q)
    _stencils.stage_rates_linearized(coef, dcoef, P, Q, dP, dQ, dpdot, dqdot)
    return dpdot, dqdot


def shoot_jvp(traj, dP0, dQ0, cfg=None):
    """Directional derivative of the final state along (dP0, dQ0)."""
    if not traj.has_stage_cache:
        raise ContractError("trajectory was shot without cache_stages=True")
    cfg = cfg or traj.cfg
    ops = FlowOps(traj.initial.n_p, cfg)
    dt = 1.0 / cfg.steps
    dP = np.asarray(dP0, dtype=np.float64).copy()
    dQ = np.asarray(dQ0, dtype=np.float64).copy()
    for step in range(len(traj.stage_P)):
        Ps = traj.stage_P[step]
        Qs = traj.stage_Q[step]
        Cs = traj.stage_coef[step]
        k1 = _stage_linearize(ops, Ps[0], Qs[0], Cs[0], dP, dQ)
        k2 = _stage_linearize(ops, Ps[1], Qs[1], Cs[1], dP + 0.5 * dt * k1[0], dQ + 0.5 * dt * k1[1])
        k3 = _stage_linearize(ops, Ps[2], Qs[2], Cs[2], dP + 0.5 * dt * k2[0], dQ + 0.5 * dt * k2[1])
        k4 = _stage_linearize(ops, Ps[3], Qs[3], Cs[3], dP + dt * k3[0], dQ + dt * k3[1])
        dP = dP + (dt / 6.0) * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        dQ = dQ + (dt / 6.0) * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
    return dP, dQ

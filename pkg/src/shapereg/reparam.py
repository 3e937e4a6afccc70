"""Circle reparameterisations from a generator field, and the cotangent lift.

A periodic scalar field nu generates an orientation-preserving circle map as
the time-1 flow of dchi/dt = nu(chi). The derivative eta' is integrated
alongside through the variational equation (rather than differentiating eta
samples) so the adjoint of the whole stage is an exact transpose.
"""

import numpy as np

from .errors import ContractError, InputError, NonDiffeomorphismError
from .kernel import LoopSpline, loop_deposit, loop_values_to_coef, normals_at
from .types import TWO_PI, ClosedCurve2D, ScalarLoopField


class Reparameterisation:
    """Orientation-preserving circle map sampled at the loop knots.

    eta holds monotone lifted angles (eta(s + 2pi) = eta(s) + 2pi);
    eta_prime holds the derivative samples, positive everywhere.
    """

    __slots__ = ("eta", "eta_prime")

    def __init__(self, eta, eta_prime):
        eta = np.asarray(eta, dtype=np.float64)
        eta_prime = np.asarray(eta_prime, dtype=np.float64)
        if eta.shape != eta_prime.shape or eta.ndim != 1:
            raise ContractError("eta and eta_prime must be equal-length 1-d arrays")
        if np.any(eta_prime <= 0.0):
            raise NonDiffeomorphismError("eta_prime must be positive everywhere")
        lifted = np.append(eta, eta[0] + TWO_PI)
        if np.any(np.diff(lifted) <= 0.0):
            raise NonDiffeomorphismError("eta samples are not strictly increasing in the lift")
        self.eta = eta
        self.eta_prime = eta_prime

    @property
    def n_p(self):
        return self.eta.shape[0]

    @classmethod
    def identity(cls, n_p):
        return cls(TWO_PI * np.arange(n_p) / n_p, np.ones(n_p))

    def eval(self, s):
        """Evaluate the lifted map at arbitrary angles via its periodic part."""
        knots = TWO_PI * np.arange(self.n_p) / self.n_p
        periodic = LoopSpline(self.eta - knots)
        s = np.asarray(s, dtype=np.float64)
        return s + periodic.eval(s)


class LieCache:
    """Stage states of the generator flow, kept for the adjoint sweep."""

    def __init__(self, nu_coef, steps, stage_chi, stage_d):
        self.nu_coef = nu_coef
        self.steps = steps
        self.stage_chi = stage_chi
        self.stage_d = stage_d


def _lie_flow(nu_values, steps):
    from . import _stencils

    n = nu_values.shape[0]
    coef = loop_values_to_coef(nu_values)
    chi = TWO_PI * np.arange(n) / n
    d = np.ones(n)
    stage_chi = np.empty((steps, 4, n))
    stage_d = np.empty((steps, 4, n))
    with np.errstate(over="ignore", invalid="ignore"):
        _stencils.lie_rk4(coef, steps, chi, d, stage_chi, stage_d)
    if not (np.all(np.isfinite(chi)) and np.all(np.isfinite(d))):
        raise NonDiffeomorphismError("generator flow blew up; nu too large for the step count")
    return chi, d, LieCache(coef, steps, stage_chi, stage_d)


def lie_exponential(nu, steps=50):
    """Time-1 flow of the generator field: an orientation-preserving map."""
    values = nu.values if isinstance(nu, ScalarLoopField) else np.asarray(nu, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise InputError("generator field must be finite")
    if steps < 1:
        raise InputError("steps must be >= 1")
    eta, eta_prime, _ = _lie_flow(values, steps)
    return Reparameterisation(eta, eta_prime)


def cotangent_lift(p0, q1, eta):
    """Apply the reparameterisation to the initial data (p0 * n, q1).

    Returns (pbar, qbar): pbar_j = p0(eta_j) * n(eta_j) * eta'_j and
    qbar_j = q1(eta_j), all spline-evaluated.
    """
    p0v = p0.values if isinstance(p0, ScalarLoopField) else np.asarray(p0, dtype=np.float64)
    if not isinstance(q1, ClosedCurve2D):
        q1 = ClosedCurve2D(q1)
    if p0v.shape[0] != q1.n_p or eta.n_p != q1.n_p:
        raise ContractError("p0, q1, and eta must share a resolution")
    q_spline = LoopSpline(q1.points)
    theta = eta.eta
    a = LoopSpline(p0v).eval(theta)
    normals = normals_at(q_spline, theta)
    pbar = (a * eta.eta_prime)[:, None] * normals
    qbar = q_spline.eval(theta)
    return pbar, ClosedCurve2D(qbar)


class ReparamCache:
    """Forward quantities of the lift, kept for reparam_adjoint."""

    def __init__(self, lie_cache, theta, d, p0_values, q1_points):
        self.lie_cache = lie_cache
        self.theta = theta
        self.d = d
        self.p0_values = p0_values
        self.q1_points = q1_points


def reparam_forward(p0, q1, nu, lie_steps=50):
    """Lie exponential plus cotangent lift with the adjoint cache."""
    p0v = p0.values if isinstance(p0, ScalarLoopField) else np.asarray(p0, dtype=np.float64)
    nuv = nu.values if isinstance(nu, ScalarLoopField) else np.asarray(nu, dtype=np.float64)
    if not isinstance(q1, ClosedCurve2D):
        q1 = ClosedCurve2D(q1)
    theta, d, lie_cache = _lie_flow(nuv, lie_steps)
    rep = Reparameterisation(theta, d)  # validates monotonicity
    pbar, qbar = cotangent_lift(ScalarLoopField(p0v), q1, rep)
    cache = ReparamCache(lie_cache, theta, d, p0v, q1.points)
    return pbar, qbar, cache


def _lie_adjoint(cache, g_chi, g_d):
    """Transpose of the generator flow: cotangents on (chi(1), chi'(1)) to
    the gradient with respect to the nu samples."""
    from . import _stencils

    n = cache.nu_coef.shape[0]
    g_cnu = np.zeros(n)
    gc = np.ascontiguousarray(g_chi, dtype=np.float64)
    gd = np.ascontiguousarray(g_d, dtype=np.float64)
    _stencils.lie_rk4_adjoint(
        cache.nu_coef, cache.steps, cache.stage_chi, cache.stage_d, gc, gd, g_cnu
    )
    # chi(0) is the identity map and d(0) = 1: no dependence on nu remains;
    # the accumulated coefficient cotangent maps back through the prefilter
    return loop_values_to_coef(g_cnu)


def reparam_adjoint(cache, gpbar, gqbar):
    """Exact transpose of reparam_forward: gradients w.r.t. p0 and nu samples."""
    if not isinstance(cache, ReparamCache):
        raise ContractError("reparam_adjoint needs the cache from reparam_forward")
    theta = cache.theta
    d = cache.d
    n = cache.p0_values.shape[0]
    p0_spline = LoopSpline(cache.p0_values)
    q_spline = LoopSpline(cache.q1_points)

    a = p0_spline.eval(theta)
    tau = q_spline.deriv(theta)
    tau_norm = np.hypot(tau[:, 0], tau[:, 1])
    nhat = np.stack([tau[:, 1], -tau[:, 0]], axis=1) / tau_norm[:, None]

    gpbar = np.asarray(gpbar, dtype=np.float64)
    gqbar = np.asarray(gqbar, dtype=np.float64)
    pn = np.sum(nhat * gpbar, axis=1)
    g_a = d * pn
    g_d = a * pn
    g_nhat = (a * d)[:, None] * gpbar
    # nhat = R tau / |tau| with R(x, y) = (y, -x):
    # g_tau = R^T g_nhat / |tau| - tau (nhat . g_nhat) / |tau|^2
    rt = np.stack([-g_nhat[:, 1], g_nhat[:, 0]], axis=1)
    g_tau = rt / tau_norm[:, None] - tau * (np.sum(nhat * g_nhat, axis=1) / tau_norm**2)[:, None]

    g_theta = p0_spline.deriv(theta) * g_a
    g_theta += np.sum(q_spline.deriv2(theta) * g_tau, axis=1)
    g_theta += np.sum(tau * gqbar, axis=1)

    g_p0 = loop_values_to_coef(loop_deposit(theta, g_a, n, kind="value"))
    g_nu = _lie_adjoint(cache.lie_cache, g_theta, g_d)
    return g_p0, g_nu

"""The observation operator, misfit potential, and its exact gradient.

The operator chains the generator flow, the cotangent lift, the geodesic
shoot, and spline evaluation of the time-1 curve at fixed parameters.
Forward failures (lost diffeomorphism, integrator blow-up, excessive drift)
map to an infinite potential so the sampler stays total.
"""

import numpy as np

from .errors import (
    BlowUpError,
    ContractError,
    DegenerateCurveError,
    InputError,
    IntegrationAccuracyError,
    NonDiffeomorphismError,
    ObservationFailure,
)
from .kernel import dense_eval_matrix
from .reparam import reparam_adjoint, reparam_forward
from .shooting import shoot_adjoint, shoot_phase
from .types import TWO_PI, ClosedCurve2D, PhaseState, ScalarLoopField, ShootConfig

FORWARD_FAILURES = (
    NonDiffeomorphismError,
    BlowUpError,
    IntegrationAccuracyError,
    DegenerateCurveError,
    InputError,
)


class ObservationSet:
    """Observed target points with their evaluation parameters and noise."""

    def __init__(self, y, s_index=None, sigma2=1e-4):
        y = np.asarray(y, dtype=np.float64)
        if y.ndim != 2 or y.shape[1] != 2 or y.shape[0] < 1:
            raise InputError(f"observations must be (N, 2) with N >= 1, got {y.shape}")
        if not np.all(np.isfinite(y)):
            raise InputError("observations must be finite")
        n = y.shape[0]
        if s_index is None:
            s_index = TWO_PI * np.arange(n) / n
        s_index = np.asarray(s_index, dtype=np.float64)
        if s_index.shape != (n,):
            raise ContractError("s_index length must match the observation count")
        sigma2 = np.broadcast_to(np.asarray(sigma2, dtype=np.float64), (n,)).copy()
        if not np.all(sigma2 > 0):
            raise InputError("noise variances must be positive")
        self.y = y
        self.s_index = s_index
        self.sigma2 = sigma2

    @property
    def n_obs(self):
        return self.y.shape[0]


def observation_angles(n_obs):
    """Default evaluation parameters s_i = 2*pi*i/N."""
    return TWO_PI * np.arange(n_obs) / n_obs


class ForwardOperator:
    """Caches per-template machinery for repeated observation evaluations."""

    def __init__(self, template, cfg=None, s_obs=None, n_obs=None, lie_steps=50):
        if not isinstance(template, ClosedCurve2D):
            template = ClosedCurve2D(template)
        self.template = template
        self.cfg = cfg or ShootConfig()
        if s_obs is None:
            if n_obs is None:
                raise ContractError("provide s_obs or n_obs")
            s_obs = observation_angles(n_obs)
        self.s_obs = np.asarray(s_obs, dtype=np.float64)
        self.lie_steps = lie_steps
        self.eval_matrix = dense_eval_matrix(template.n_p, self.s_obs)

    def _values(self, field):
        v = field.values if isinstance(field, ScalarLoopField) else np.asarray(field, dtype=np.float64)
        if v.shape[0] != self.template.n_p:
            raise ContractError(
                f"field has {v.shape[0]} samples but template has {self.template.n_p}"
            )
        return v

    def observe(self, p0, nu, want_cache=False):
        """Observed points (N, 2); raises FORWARD_FAILURES members on failure."""
        p0v = self._values(p0)
        nuv = self._values(nu)
        pbar, qbar, rcache = reparam_forward(p0v, self.template, nuv, self.lie_steps)
        traj = shoot_phase(
            PhaseState(pbar, qbar.points),
            self.cfg,
            cache_stages=want_cache,
            keep_path=False,
        )
        points = self.eval_matrix @ traj.final.q
        if want_cache:
            return points, (rcache, traj)
        return points

    def misfit(self, p0, nu, obs, sigma2=None):
        """(phi, unweighted residual norm squared); (inf, inf) on failure."""
        try:
            points = self.observe(p0, nu)
        except FORWARD_FAILURES:
            return np.inf, np.inf
        res = points - obs.y
        res_sq = float(np.sum(res * res))
        s2 = obs.sigma2 if sigma2 is None else np.broadcast_to(
            np.asarray(sigma2, dtype=np.float64), (obs.n_obs,)
        )
        phi = 0.5 * float(np.sum((res * res) / s2[:, None]))
        return phi, res_sq

    def gradient(self, p0, nu, obs, sigma2=None):
        """Exact gradient of phi w.r.t. the p0 and nu samples.

        Returns (phi, res_sq, grad_p0, grad_nu); raises ObservationFailure when
        the forward map cannot be evaluated.
        """
        try:
            points, (rcache, traj) = self.observe(p0, nu, want_cache=True)
        except FORWARD_FAILURES as exc:
            raise ObservationFailure(str(exc)) from exc
        res = points - obs.y
        res_sq = float(np.sum(res * res))
        s2 = obs.sigma2 if sigma2 is None else np.broadcast_to(
            np.asarray(sigma2, dtype=np.float64), (obs.n_obs,)
        )
        phi = 0.5 * float(np.sum((res * res) / s2[:, None]))
        cobar = self.eval_matrix.T @ (res / s2[:, None])
        gP, gQ = shoot_adjoint(traj, cobar)
        g_p0, g_nu = reparam_adjoint(rcache, gP, gQ)
        return phi, res_sq, g_p0, g_nu


def observe(p0, nu, template, cfg=None, n_obs=None, s_obs=None, lie_steps=50):
    """Observation operator: lift by the generator flow, shoot, evaluate."""
    op = ForwardOperator(template, cfg, s_obs=s_obs, n_obs=n_obs, lie_steps=lie_steps)
    return op.observe(p0, nu)


def potential(p0, nu, obs, template, cfg=None, lie_steps=50):
    """Covariance-weighted misfit 0.5 ||G - y||^2; +inf on forward failure."""
    op = ForwardOperator(template, cfg, s_obs=obs.s_index, lie_steps=lie_steps)
    phi, _ = op.misfit(p0, nu, obs)
    return phi


def observe_gradient(p0, nu, obs, template, cfg=None, lie_steps=50):
    """Gradient of the potential as a pair of scalar loop fields."""
    op = ForwardOperator(template, cfg, s_obs=obs.s_index, lie_steps=lie_steps)
    _, _, g_p0, g_nu = op.gradient(p0, nu, obs)
    return ScalarLoopField(g_p0), ScalarLoopField(g_nu)

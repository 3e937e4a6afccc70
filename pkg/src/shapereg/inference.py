"""Function-space pCN sampling over (p0, nu) with optional noise-variance
Gibbs updates.

Chain states live in spectral coefficient space (mesh-independent); the
proposal sqrt(1-beta^2) u + beta w preserves the Gaussian prior exactly, so
the acceptance probability depends only on the misfit difference and the
chain remains well behaved under mesh refinement. The step size adapts only
during burn-in and is frozen afterwards so the post-burn-in kernel is exact.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, InputError
from .observation import ForwardOperator
from .prior import (
    cameron_martin_norm_coeffs,
    layout_for,
    sample_prior_coeffs,
    validate_spec,
)
from .stats import effective_sample_size
from .types import TWO_PI, ShootConfig


@dataclass(frozen=True)
class SamplerConfig:
    beta: float = 0.2
    n_iters: int = 100_000
    thinning: int = 10
    burn_in: int = 10_000
    adapt_beta: bool = True
    target_accept: float = 0.25
    infer_sigma2: bool = False
    ig_a0: float = 1e-4
    ig_b0: float = 1e-4

    def __post_init__(self):
        if not (0.0 < self.beta <= 1.0):
            raise InputError(f"beta must be in (0, 1], got {self.beta}")
        if not (0.0 < self.target_accept < 1.0):
            raise InputError("target_accept must be in (0, 1)")
        if self.n_iters < 1 or self.thinning < 1:
            raise InputError("n_iters and thinning must be >= 1")


@dataclass
class ChainState:
    """Current sampler state in coefficient space with its cached misfit."""

    p0_coeffs: np.ndarray
    nu_coeffs: np.ndarray
    sigma2: float
    phi: float = math.inf
    residual_sq: float = math.inf

    def copy(self):
        return ChainState(
            self.p0_coeffs.copy(), self.nu_coeffs.copy(), self.sigma2, self.phi, self.residual_sq
        )


@dataclass
class ChainRecord:
    iteration: int
    accept: bool
    phi: float
    sigma2: float
    p0_coeffs: np.ndarray
    nu_coeffs: np.ndarray


class PosteriorTarget:
    """Misfit evaluations for coefficient-space states."""

    def __init__(self, obs, template, shoot_cfg, priors, lie_steps=50):
        self.obs = obs
        self.op = ForwardOperator(template, shoot_cfg, s_obs=obs.s_index, lie_steps=lie_steps)
        self.layout_p = layout_for(priors.momentum_prior, self.op.template.n_p)
        self.layout_nu = layout_for(priors.reparam_prior, self.op.template.n_p)

    def misfit(self, p0_coeffs, nu_coeffs, sigma2=None):
        p0 = self.layout_p.to_samples(p0_coeffs)
        nu = self.layout_nu.to_samples(nu_coeffs)
        return self.op.misfit(p0, nu, self.obs, sigma2)

    @property
    def n_obs(self):
        return self.obs.n_obs


class PriorOnlyTarget:
    """Zero misfit: the chain should reproduce the prior exactly."""

    def __init__(self, n_p, priors):
        self.layout_p = layout_for(priors.momentum_prior, n_p)
        self.layout_nu = layout_for(priors.reparam_prior, n_p)
        self.n_obs = 0

    def misfit(self, p0_coeffs, nu_coeffs, sigma2=None):
        return 0.0, 0.0


def initial_state(target, cfg, p0_coeffs=None, nu_coeffs=None, sigma2=None):
    """Fresh chain state with its misfit evaluated."""
    cp = np.zeros(target.layout_p.dim) if p0_coeffs is None else np.asarray(p0_coeffs, float).copy()
    cv = np.zeros(target.layout_nu.dim) if nu_coeffs is None else np.asarray(nu_coeffs, float).copy()
    s2 = 1.0 if sigma2 is None else float(sigma2)
    phi, rsq = target.misfit(cp, cv, s2 if cfg.infer_sigma2 else None)
    return ChainState(cp, cv, s2, phi, rsq)


def pcn_step(state, cfg, priors, target, rng, beta=None):
    """One preconditioned Crank-Nicolson proposal and accept/reject.

    The acceptance ratio reads only the misfit difference: the Gaussian
    reference measure is preserved by the proposal, so no prior-norm term
    appears. Infinite-misfit proposals are always rejected.
    """
    b = cfg.beta if beta is None else beta
    contraction = math.sqrt(1.0 - b * b)
    w_p = sample_prior_coeffs(priors.momentum_prior, rng, target.layout_p)
    w_nu = sample_prior_coeffs(priors.reparam_prior, rng, target.layout_nu)
    prop_p = contraction * state.p0_coeffs + b * w_p
    prop_nu = contraction * state.nu_coeffs + b * w_nu
    phi_prop, rsq_prop = target.misfit(
        prop_p, prop_nu, state.sigma2 if cfg.infer_sigma2 else None
    )
    u = rng.uniform()
    if math.isinf(phi_prop):
        accept = False
    elif math.isinf(state.phi):
        accept = True
    else:
        accept = math.log(u) < state.phi - phi_prop
    if accept:
        return ChainState(prop_p, prop_nu, state.sigma2, phi_prop, rsq_prop), True
    return state, False


def gibbs_sigma2(residual_sq, n_obs, cfg, rng):
    """Conjugate inverse-gamma draw of the shared noise variance.

    Posterior shape a0 + N (N points, two coordinates each) and rate
    b0 + residual_sq / 2 under an InverseGamma(a0, b0) prior.
    """
    if residual_sq < 0:
        raise ContractError("residual_sq must be nonnegative")
    shape = cfg.ig_a0 + n_obs
    rate = cfg.ig_b0 + 0.5 * residual_sq
    return rate / rng.gamma(shape)


@dataclass
class ChainResult:
    records: list
    final_state: ChainState
    beta: float
    accept_rate: float


def run_chain(init, cfg, priors, target, rng, record_callback=None):
    """Execute the sampler; returns thinned records and the final state.

    With infer_sigma2 the shared noise variance is Gibbs-updated every
    iteration and the misfit is recomputed with the new value. Step-size
    adaptation (Robbins-Monro toward target_accept) runs during burn-in only.
    """
    validate_spec(priors).raise_if_invalid()
    state = init.copy()
    if math.isinf(state.phi) and math.isinf(state.residual_sq):
        phi, rsq = target.misfit(
            state.p0_coeffs, state.nu_coeffs, state.sigma2 if cfg.infer_sigma2 else None
        )
        state.phi, state.residual_sq = phi, rsq
    beta = cfg.beta
    records = []
    n_accept = 0
    for i in range(1, cfg.n_iters + 1):
        state, accepted = pcn_step(state, cfg, priors, target, rng, beta=beta)
        n_accept += accepted
        if cfg.infer_sigma2 and math.isfinite(state.residual_sq):
            state.sigma2 = gibbs_sigma2(state.residual_sq, target.n_obs, cfg, rng)
            state.phi = 0.5 * state.residual_sq / state.sigma2
        if cfg.adapt_beta and i <= cfg.burn_in:
            gain = 1.0 / (1.0 + 0.1 * i) ** 0.7
            beta = min(1.0, max(1e-6, beta * math.exp(gain * (accepted - cfg.target_accept))))
        if i % cfg.thinning == 0:
            rec = ChainRecord(
                i, bool(accepted), state.phi, state.sigma2,
                state.p0_coeffs.copy(), state.nu_coeffs.copy(),
            )
            records.append(rec)
            if record_callback is not None:
                record_callback(rec)
    return ChainResult(records, state, beta, n_accept / cfg.n_iters)


@dataclass
class ChainSummary:
    n_records: int
    accept_rate: float
    p0_mode_mean: np.ndarray
    p0_mode_std: np.ndarray
    nu_mode_mean: np.ndarray
    nu_mode_std: np.ndarray
    p0_point_mean: np.ndarray
    p0_point_std: np.ndarray
    nu_point_mean: np.ndarray
    nu_point_std: np.ndarray
    s_grid: np.ndarray
    sigma2_mean: float
    sigma2_quantiles: dict
    sigma2_hist: dict
    ess_min: float
    ess_median: float
    mode_histograms: dict
    phi_mean: float

    def to_dict(self):
        def arr(a):
            return np.asarray(a).tolist()

        return {
            "n_records": self.n_records,
            "accept_rate": self.accept_rate,
            "p0_mode_mean": arr(self.p0_mode_mean),
            "p0_mode_std": arr(self.p0_mode_std),
            "nu_mode_mean": arr(self.nu_mode_mean),
            "nu_mode_std": arr(self.nu_mode_std),
            "p0_point_mean": arr(self.p0_point_mean),
            "p0_point_std": arr(self.p0_point_std),
            "nu_point_mean": arr(self.nu_point_mean),
            "nu_point_std": arr(self.nu_point_std),
            "s_grid": arr(self.s_grid),
            "sigma2_mean": self.sigma2_mean,
            "sigma2_quantiles": self.sigma2_quantiles,
            "sigma2_hist": self.sigma2_hist,
            "ess_min": self.ess_min,
            "ess_median": self.ess_median,
            "mode_histograms": self.mode_histograms,
            "phi_mean": self.phi_mean,
        }


def _field_stats(coeff_matrix, layout):
    samples = np.stack([layout.to_samples(c) for c in coeff_matrix])
    return samples.mean(axis=0), samples.std(axis=0)


def _fixed_histogram(values, bins=60):
    lo, hi = float(np.min(values)), float(np.max(values))
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    return {"edges": edges.tolist(), "counts": counts.tolist()}


def chain_summary(records, layout_p, layout_nu, n_hist_modes=4):
    """Posterior summaries of a record stream.

    Means and standard deviations per retained mode and per sample point,
    acceptance rate, noise-variance marginal, per-mode histograms with a
    deterministic binning, and autocorrelation-truncated effective sample
    sizes.
    """
    if not records:
        raise ContractError("chain_summary needs a non-empty record stream")
    P = np.stack([r.p0_coeffs for r in records])
    V = np.stack([r.nu_coeffs for r in records])
    phi = np.array([r.phi for r in records])
    sigma2 = np.array([r.sigma2 for r in records])
    accept = np.array([r.accept for r in records])

    p0_point_mean, p0_point_std = _field_stats(P, layout_p)
    nu_point_mean, nu_point_std = _field_stats(V, layout_nu)

    ess = [effective_sample_size(P[:, j]) for j in range(min(P.shape[1], 16))]
    ess += [effective_sample_size(V[:, j]) for j in range(min(V.shape[1], 16))]

    qs = {str(q): float(np.quantile(sigma2, q)) for q in (0.025, 0.25, 0.5, 0.75, 0.975)}
    mode_histograms = {
        "p0": [_fixed_histogram(P[:, j]) for j in range(min(n_hist_modes, P.shape[1]))],
        "nu": [_fixed_histogram(V[:, j]) for j in range(min(n_hist_modes, V.shape[1]))],
    }
    return ChainSummary(
        n_records=len(records),
        accept_rate=float(accept.mean()),
        p0_mode_mean=P.mean(axis=0),
        p0_mode_std=P.std(axis=0),
        nu_mode_mean=V.mean(axis=0),
        nu_mode_std=V.std(axis=0),
        p0_point_mean=p0_point_mean,
        p0_point_std=p0_point_std,
        nu_point_mean=nu_point_mean,
        nu_point_std=nu_point_std,
        s_grid=TWO_PI * np.arange(layout_p.n_p) / layout_p.n_p,
        sigma2_mean=float(sigma2.mean()),
        sigma2_quantiles=qs,
        sigma2_hist=_fixed_histogram(sigma2),
        ess_min=float(np.min(ess)),
        ess_median=float(np.median(ess)),
        mode_histograms=mode_histograms,
        phi_mean=float(phi[np.isfinite(phi)].mean()) if np.any(np.isfinite(phi)) else math.inf,
    )

"""Synthetic data generation and the three study designs.

Data are always synthesised at a finer curve resolution than the inference
model uses, so the inversion never sees its own discretisation. Sub-cases
are independent (own seeds) and may run concurrently.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import InputError
from .inference import (
    PosteriorTarget,
    SamplerConfig,
    chain_summary,
    initial_state,
    run_chain,
)
from .map_optimizer import MapObjective, OptimizerConfig, minimize_bfgs
from .observation import ForwardOperator, ObservationSet, observation_angles
from .prior import paper_default_priors, sample_prior
from .types import TWO_PI, ClosedCurve2D, ScalarLoopField, ShootConfig


def template_circle(n_p):
    """Unit circle centred at (pi, pi), sampled counterclockwise."""
    if n_p < 4:
        raise InputError("need at least 4 points")
    s = TWO_PI * np.arange(n_p) / n_p
    return ClosedCurve2D(np.stack([np.cos(s) + np.pi, np.sin(s) + np.pi], axis=1))


def rounded_square_perimeter(r):
    return 8.0 * (1.0 - r) + TWO_PI * r


def rounded_square_target(r, n):
    """Square of side 2 centred (pi, pi) with quarter-circle corners.

    Returns n points equispaced in arc length, starting at the midpoint of
    the right edge and proceeding counterclockwise. r=1 gives the unit
    circle; r=0 the sharp square.
    """
    if not (0.0 <= r <= 1.0):
        raise InputError(f"corner radius must lie in [0, 1], got {r}")
    if n < 4:
        raise InputError("need at least 4 points")
    cx = cy = np.pi
    e = 1.0 - r  # half-length of each straight edge piece

    segments = []

    def line(p0, p1):
        p0 = np.asarray(p0)
        p1 = np.asarray(p1)
        length = float(np.hypot(*(p1 - p0)))
        if length > 0:
            segments.append((length, lambda t, p0=p0, p1=p1: p0 + t[:, None] * (p1 - p0)))

    def arc(center, a0, a1):
        length = abs(a1 - a0) * r
        if length > 0:
            segments.append(
                (
                    length,
                    lambda t, c=np.asarray(center), a0=a0, a1=a1: np.stack(
                        [
                            c[0] + r * np.cos(a0 + t * (a1 - a0)),
                            c[1] + r * np.sin(a0 + t * (a1 - a0)),
                        ],
                        axis=1,
                    ),
                )
            )

    line((cx + 1, cy), (cx + 1, cy + e))
    arc((cx + e, cy + e), 0.0, 0.5 * np.pi)
    line((cx + e, cy + 1), (cx - e, cy + 1))
    arc((cx - e, cy + e), 0.5 * np.pi, np.pi)
    line((cx - 1, cy + e), (cx - 1, cy - e))
    arc((cx - e, cy - e), np.pi, 1.5 * np.pi)
    line((cx - e, cy - 1), (cx + e, cy - 1))
    arc((cx + e, cy - e), 1.5 * np.pi, TWO_PI)
    line((cx + 1, cy - e), (cx + 1, cy))

    lengths = np.array([seg[0] for seg in segments])
    cum = np.concatenate([[0.0], np.cumsum(lengths)])
    perimeter = cum[-1]
    ell = perimeter * np.arange(n) / n
    idx = np.clip(np.searchsorted(cum, ell, side="right") - 1, 0, len(segments) - 1)
    points = np.empty((n, 2))
    for j, (length, fn) in enumerate(segments):
        mask = idx == j
        if np.any(mask):
            t = (ell[mask] - cum[j]) / length
            points[mask] = fn(t)
    return points


@dataclass(frozen=True)
class ScenarioSpec:
    kind: str
    data_resolution: int = 1000
    model_resolution: int = 100
    seed: int = 0
    data_steps: int = 100
    # consistency ladder
    n_ladder: tuple = (10, 25, 50, 100)
    noise_sigma: float = 1e-2
    # multimodality sweep
    r_values: tuple = (1.0, 0.75, 0.5, 0.25)
    n_obs: int = 1000
    likelihood_sigma: float = 1e-2
    # partial observations
    sigma_good: float = 1e-4
    sigma_bad: float = 0.1

    def __post_init__(self):
        if self.kind not in ("consistency", "multimodality", "partial"):
            raise InputError(f"unknown scenario kind: {self.kind}")
        if self.data_resolution <= self.model_resolution:
            raise InputError("data_resolution must exceed model_resolution")


@dataclass
class TruthRecord:
    p0_values: np.ndarray
    nu_values: np.ndarray
    sigma2: np.ndarray
    n_p: int


def synthesize_observations(p0, nu, spec, noise_variances, rng, shoot_cfg=None):
    """Observe at the data resolution and add independent Gaussian noise.

    noise_variances is one variance per observation point (or a scalar).
    Returns (ObservationSet, TruthRecord).
    """
    template = template_circle(spec.data_resolution)
    cfg = shoot_cfg or ShootConfig(steps=spec.data_steps)
    p0v = p0.values if isinstance(p0, ScalarLoopField) else np.asarray(p0, dtype=np.float64)
    nuv = nu.values if isinstance(nu, ScalarLoopField) else np.asarray(nu, dtype=np.float64)
    variances = np.atleast_1d(np.asarray(noise_variances, dtype=np.float64))
    n = variances.shape[0]
    op = ForwardOperator(template, cfg, n_obs=n)
    clean = op.observe(p0v, nuv)
    noisy = clean + np.sqrt(variances)[:, None] * rng.standard_normal((n, 2))
    obs = ObservationSet(noisy, observation_angles(n), variances)
    truth = TruthRecord(p0v.copy(), nuv.copy(), variances.copy(), spec.data_resolution)
    return obs, truth


@dataclass
class SubCaseResult:
    label: str
    obs: ObservationSet
    summary: object
    records: list
    map_value: float
    map_initial_value: float
    truth: TruthRecord | None
    accept_rate: float
    beta_final: float


def _fit_one_case(args):
    """BFGS burn-in then a pCN chain for one sub-case (process-friendly)."""
    (label, y, s_index, sigma2, model_n_p, shoot_cfg, priors, sampler_cfg, opt_cfg, seed, truth) = args
    obs = ObservationSet(y, s_index, sigma2)
    template = template_circle(model_n_p)
    objective = MapObjective(obs, priors, template, shoot_cfg)
    x0 = np.zeros(objective.dim)
    f0, _ = objective(x0)
    opt_res = minimize_bfgs(objective, x0, opt_cfg)
    cp, cv = objective.split(opt_res.x)

    target = PosteriorTarget(obs, template, shoot_cfg, priors)
    rng = np.random.default_rng(seed)
    init = initial_state(
        target,
        sampler_cfg,
        p0_coeffs=cp,
        nu_coeffs=cv,
        sigma2=float(np.mean(sigma2)),
    )
    result = run_chain(init, sampler_cfg, priors, target, rng)
    post_burn = [r for r in result.records if r.iteration > sampler_cfg.burn_in]
    summary = chain_summary(post_burn or result.records, target.layout_p, target.layout_nu)
    return SubCaseResult(
        label=label,
        obs=obs,
        summary=summary,
        records=result.records,
        map_value=opt_res.value,
        map_initial_value=f0,
        truth=truth,
        accept_rate=result.accept_rate,
        beta_final=result.beta,
    )


def _run_cases(case_args, workers):
    if workers <= 1 or len(case_args) <= 1:
        return [_fit_one_case(a) for a in case_args]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_fit_one_case, case_args))


def default_shoot_config():
    return ShootConfig()


def run_scenario(spec, sampler_cfg=None, opt_cfg=None, priors=None, shoot_cfg=None, workers=1):
    """Execute one study design; returns a list of SubCaseResult."""
    priors = priors or paper_default_priors()
    shoot_cfg = shoot_cfg or default_shoot_config()
    opt_cfg = opt_cfg or OptimizerConfig(max_iters=400, grad_tol=1e-3)
    rng = np.random.default_rng(spec.seed)

    if spec.kind == "consistency":
        sampler_cfg = sampler_cfg or SamplerConfig(n_iters=50_000, burn_in=10_000, infer_sigma2=True)
        if not sampler_cfg.infer_sigma2:
            sampler_cfg = replace(sampler_cfg, infer_sigma2=True)
        n_max = max(spec.n_ladder)
        if any(n_max % n for n in spec.n_ladder):
            raise InputError("ladder entries must divide the largest one")
        p0_t = sample_prior(priors.momentum_prior, rng, spec.data_resolution)
        nu_t = sample_prior(priors.reparam_prior, rng, spec.data_resolution)
        variances = np.full(n_max, spec.noise_sigma**2)
        obs_full, truth = synthesize_observations(p0_t, nu_t, spec, variances, rng)
        cases = []
        for j, n in enumerate(sorted(spec.n_ladder)):
            stride = n_max // n
            idx = np.arange(n) * stride
            cases.append(
                (
                    f"N{n}",
                    obs_full.y[idx],
                    observation_angles(n),
                    obs_full.sigma2[idx],
                    spec.model_resolution,
                    shoot_cfg,
                    priors,
                    sampler_cfg,
                    opt_cfg,
                    spec.seed + 1000 + j,
                    truth,
                )
            )
        return _run_cases(cases, workers)

    if spec.kind == "multimodality":
        sampler_cfg = sampler_cfg or SamplerConfig(n_iters=50_000, burn_in=10_000, infer_sigma2=False)
        if sampler_cfg.infer_sigma2:
            sampler_cfg = replace(sampler_cfg, infer_sigma2=False)
        cases = []
        for j, r in enumerate(spec.r_values):
            y = rounded_square_target(r, spec.n_obs)
            cases.append(
                (
                    f"r{r:g}",
                    y,
                    observation_angles(spec.n_obs),
                    np.full(spec.n_obs, spec.likelihood_sigma**2),
                    spec.model_resolution,
                    shoot_cfg,
                    priors,
                    sampler_cfg,
                    opt_cfg,
                    spec.seed + 2000 + j,
                    None,
                )
            )
        return _run_cases(cases, workers)

    # partial observations
    sampler_cfg = sampler_cfg or SamplerConfig(n_iters=50_000, burn_in=10_000, infer_sigma2=True)
    if not sampler_cfg.infer_sigma2:
        sampler_cfg = replace(sampler_cfg, infer_sigma2=True)
    p0_t = sample_prior(priors.momentum_prior, rng, spec.data_resolution)
    nu_t = sample_prior(priors.reparam_prior, rng, spec.data_resolution)
    n = spec.n_obs
    n_bad = n // 4
    variances = np.full(n, spec.sigma_good**2)
    variances[n - n_bad :] = spec.sigma_bad**2
    obs, truth = synthesize_observations(p0_t, nu_t, spec, variances, rng)
    cases = [
        (
            "partial",
            obs.y,
            obs.s_index,
            obs.sigma2,
            spec.model_resolution,
            shoot_cfg,
            priors,
            sampler_cfg,
            opt_cfg,
            spec.seed + 3000,
            truth,
        )
    ]
    return _run_cases(cases, workers)


def posterior_shape_samples(records, model_n_p, shoot_cfg, count=20, s_eval=None, n_dense=200):
    """Forward-shoot `count` retained states; returns (s_eval, curves).

    curves has shape (count, n_eval, 2), evaluated at the given parameters
    (n_dense equispaced ones by default).
    """
    if count > len(records):
        raise InputError(f"requested {count} shapes from {len(records)} retained states")
    template = template_circle(model_n_p)
    if s_eval is None:
        s_eval = observation_angles(n_dense)
    op = ForwardOperator(template, shoot_cfg, s_obs=s_eval)
    picks = np.linspace(0, len(records) - 1, count).astype(int)
    curves = []
    for i in picks:
        rec = records[i]
        lay_p = SpectralShim(rec.p0_coeffs.shape[0], model_n_p)
        lay_v = SpectralShim(rec.nu_coeffs.shape[0], model_n_p)
        p0 = lay_p.to_samples(rec.p0_coeffs)
        nu = lay_v.to_samples(rec.nu_coeffs)
        curves.append(op.observe(p0, nu))
    return np.asarray(s_eval), np.stack(curves)


class SpectralShim:
    """Expand a flat coefficient vector of any retained length to samples."""

    def __init__(self, dim, n_p):
        from .prior import SpectralLayout

        n_modes = n_p // 2
        layout = SpectralLayout(n_p, n_modes)
        while layout.dim > dim:
            n_modes -= 1
            layout = SpectralLayout(n_p, n_modes)
        if layout.dim != dim:
            raise InputError(f"coefficient length {dim} does not fit resolution {n_p}")
        self._layout = layout

    def to_samples(self, c):
        return self._layout.to_samples(c)

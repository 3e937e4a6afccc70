"""Command-line surface: simulate, sample, map, diagnose, scenario."""

import argparse
import os
import sys
from dataclasses import asdict, replace

import numpy as np

from . import io as sio
from .errors import (
    BlowUpError,
    ContractError,
    InputError,
    IntegrationAccuracyError,
    NonDiffeomorphismError,
    ObservationFailure,
    ShapeRegError,
    ValidationError,
)
from .inference import (
    PosteriorTarget,
    PriorOnlyTarget,
    SamplerConfig,
    chain_summary,
    initial_state,
    run_chain,
)
from .map_optimizer import MapObjective, OptimizerConfig, minimize_bfgs
from .prior import PriorPair, PriorSpec, paper_default_priors, validate_spec
from .scenarios import (
    ScenarioSpec,
    posterior_shape_samples,
    rounded_square_target,
    run_scenario,
    sample_prior,
    synthesize_observations,
    template_circle,
)
from .types import MetricSpec, ShootConfig

USAGE_ERROR = 1
NUMERICAL_ERROR = 2

NUMERICAL_FAILURES = (
    BlowUpError,
    IntegrationAccuracyError,
    NonDiffeomorphismError,
    ObservationFailure,
)


def _load_config(path):
    if path is None:
        return {}
    return sio.read_config_ini(path)


def build_shoot_config(cfg):
    metric = MetricSpec(**cfg.get("metric", {}))
    return ShootConfig(metric=metric, **cfg.get("shoot", {}))


def build_priors(cfg):
    base = paper_default_priors()
    p0 = cfg.get("prior.p0", {})
    nu = cfg.get("prior.nu", {})
    return PriorPair(
        replace(base.momentum_prior, **p0) if p0 else base.momentum_prior,
        replace(base.reparam_prior, **nu) if nu else base.reparam_prior,
    )


def build_sampler_config(cfg, seed_unused=None):
    return SamplerConfig(**cfg.get("sampler", {}))


def build_optimizer_config(cfg):
    return OptimizerConfig(**cfg.get("optimizer", {}))


def build_scenario_spec(kind, cfg, seed):
    sc = dict(cfg.get("scenario", {}))
    sc.pop("workers", None)
    if "n_ladder" in sc:
        sc["n_ladder"] = tuple(int(tok) for tok in sc["n_ladder"].split(","))
    if "r_values" in sc:
        sc["r_values"] = tuple(float(tok) for tok in sc["r_values"].split(","))
    return ScenarioSpec(kind=kind, seed=seed, **sc)


def _params_of(shoot_cfg, priors, sampler_cfg=None, opt_cfg=None, extra=None):
    params = {
        "metric": asdict(shoot_cfg.metric),
        "shoot": {
            "steps": shoot_cfg.steps,
            "n_g": shoot_cfg.n_g,
            "hamiltonian_tol": shoot_cfg.hamiltonian_tol,
        },
        "prior.p0": asdict(priors.momentum_prior),
        "prior.nu": asdict(priors.reparam_prior),
    }
    if sampler_cfg is not None:
        params["sampler"] = asdict(sampler_cfg)
    if opt_cfg is not None:
        params["optimizer"] = asdict(opt_cfg)
    if extra:
        params.update(extra)
    return params


def _write_manifest(out_dir, seed, scenario, params, spec, shoot_cfg, model_n_p):
    manifest = sio.RunManifest(
        seed=seed,
        scenario=scenario,
        params=params,
        n_p_data=spec.data_resolution if spec is not None else model_n_p,
        n_p_model=model_n_p,
        n_g=shoot_cfg.n_g,
        steps=shoot_cfg.steps,
    )
    sio.write_manifest(os.path.join(out_dir, "manifest.json"), manifest)


def cmd_simulate(args):
    cfg = _load_config(args.config)
    shoot_cfg = build_shoot_config(cfg)
    priors = build_priors(cfg)
    spec = build_scenario_spec(args.scenario, cfg, args.seed)
    rng = np.random.default_rng(args.seed)
    out = args.out
    os.makedirs(out, exist_ok=True)

    if spec.kind == "consistency":
        p0_t = sample_prior(priors.momentum_prior, rng, spec.data_resolution)
        nu_t = sample_prior(priors.reparam_prior, rng, spec.data_resolution)
        n_max = max(spec.n_ladder)
        variances = np.full(n_max, spec.noise_sigma**2)
        obs, truth = synthesize_observations(p0_t, nu_t, spec, variances, rng)
        for n in sorted(spec.n_ladder):
            idx = np.arange(n) * (n_max // n)
            subset = type(obs)(obs.y[idx], 2 * np.pi * np.arange(n) / n, obs.sigma2[idx])
            sio.write_observations_csv(os.path.join(out, f"observations_N{n}.csv"), subset)
        sio.write_truth_json(os.path.join(out, "truth.json"), truth)
    elif spec.kind == "multimodality":
        for r in spec.r_values:
            y = rounded_square_target(r, spec.n_obs)
            obs = _obs_from_points(y, spec.likelihood_sigma**2)
            sio.write_observations_csv(os.path.join(out, f"observations_r{r:g}.csv"), obs)
    else:
        p0_t = sample_prior(priors.momentum_prior, rng, spec.data_resolution)
        nu_t = sample_prior(priors.reparam_prior, rng, spec.data_resolution)
        n = spec.n_obs
        variances = np.full(n, spec.sigma_good**2)
        variances[n - n // 4 :] = spec.sigma_bad**2
        obs, truth = synthesize_observations(p0_t, nu_t, spec, variances, rng)
        sio.write_observations_csv(os.path.join(out, "observations.csv"), obs)
        sio.write_truth_json(os.path.join(out, "truth.json"), truth)

    params = _params_of(shoot_cfg, priors, extra={"scenario_spec": _spec_params(spec)})
    _write_manifest(out, args.seed, spec.kind, params, spec, shoot_cfg, spec.model_resolution)
    return 0


def _spec_params(spec):
    d = asdict(spec)
    d["n_ladder"] = list(spec.n_ladder)
    d["r_values"] = list(spec.r_values)
    return d


def _obs_from_points(y, sigma2):
    from .observation import ObservationSet, observation_angles

    return ObservationSet(y, observation_angles(len(y)), sigma2)


def cmd_sample(args):
    cfg = _load_config(args.config)
    shoot_cfg = build_shoot_config(cfg)
    priors = build_priors(cfg)
    sampler_cfg = build_sampler_config(cfg)
    validate_spec(priors, shoot_cfg.metric).raise_if_invalid()
    model_n_p = args.model_res
    rng = np.random.default_rng(args.seed)
    out = args.out
    os.makedirs(out, exist_ok=True)

    if args.prior_only:
        target = PriorOnlyTarget(model_n_p, priors)
        spec = None
    else:
        if args.data is None:
            raise ValidationError("data", "sample needs --data unless --prior-only is given")
        obs = sio.read_observations_csv(args.data)
        template = template_circle(model_n_p)
        target = PosteriorTarget(obs, template, shoot_cfg, priors)
        spec = None

    init_kwargs = {}
    if args.init_map:
        blob = sio.read_json(args.init_map)
        init_kwargs = {
            "p0_coeffs": np.asarray(blob["p0_coeffs"]),
            "nu_coeffs": np.asarray(blob["nu_coeffs"]),
        }
    init = initial_state(target, sampler_cfg, **init_kwargs)
    chain_path = os.path.join(out, "chain.ndjson")
    with sio.ChainWriter(chain_path) as writer:
        result = run_chain(init, sampler_cfg, priors, target, rng, record_callback=writer)
    post = [r for r in result.records if r.iteration > sampler_cfg.burn_in]
    summary = chain_summary(post or result.records, target.layout_p, target.layout_nu)
    sio.write_json(os.path.join(out, "summary.json"), summary.to_dict())
    params = _params_of(shoot_cfg, priors, sampler_cfg)
    manifest = sio.RunManifest(
        seed=args.seed,
        scenario="prior-only" if args.prior_only else "sample",
        params=params,
        n_p_data=model_n_p,
        n_p_model=model_n_p,
        n_g=shoot_cfg.n_g,
        steps=shoot_cfg.steps,
    )
    sio.write_manifest(os.path.join(out, "manifest.json"), manifest)
    return 0


def cmd_map(args):
    cfg = _load_config(args.config)
    shoot_cfg = build_shoot_config(cfg)
    priors = build_priors(cfg)
    opt_cfg = build_optimizer_config(cfg)
    validate_spec(priors, shoot_cfg.metric).raise_if_invalid()
    obs = sio.read_observations_csv(args.data)
    template = template_circle(args.model_res)
    objective = MapObjective(obs, priors, template, shoot_cfg)
    x0 = np.zeros(objective.dim)
    value0, _ = objective(x0)
    result = minimize_bfgs(objective, x0, opt_cfg)
    cp, cv = objective.split(result.x)
    os.makedirs(args.out, exist_ok=True)
    sio.write_json(
        os.path.join(args.out, "map.json"),
        {
            "value": result.value,
            "initial_value": value0,
            "iterations": result.iterations,
            "converged": result.converged,
            "degraded": result.degraded,
            "p0_coeffs": cp.tolist(),
            "nu_coeffs": cv.tolist(),
        },
    )
    params = _params_of(shoot_cfg, priors, opt_cfg=opt_cfg)
    manifest = sio.RunManifest(
        seed=args.seed,
        scenario="map",
        params=params,
        n_p_data=args.model_res,
        n_p_model=args.model_res,
        n_g=shoot_cfg.n_g,
        steps=shoot_cfg.steps,
    )
    sio.write_manifest(os.path.join(args.out, "manifest.json"), manifest)
    return 0


def cmd_diagnose(args):
    cfg = _load_config(args.config)
    shoot_cfg = build_shoot_config(cfg)
    priors = build_priors(cfg)
    records = sio.read_chain_ndjson(args.chain)
    if not records:
        raise ValidationError("chain", "chain file holds no records")
    from .prior import layout_for

    model_n_p = args.model_res
    layout_p = layout_for(priors.momentum_prior, model_n_p)
    layout_nu = layout_for(priors.reparam_prior, model_n_p)
    summary = chain_summary(records, layout_p, layout_nu)
    os.makedirs(args.out, exist_ok=True)
    sio.write_json(os.path.join(args.out, "summary.json"), summary.to_dict())

    hist_path = os.path.join(args.out, "histograms.csv")
    with open(hist_path, "w") as fh:
        fh.write("field,mode,bin_lo,bin_hi,count\n")
        for name in ("p0", "nu"):
            for mode, hist in enumerate(summary.mode_histograms[name]):
                edges = hist["edges"]
                for b, count in enumerate(hist["counts"]):
                    fh.write(
                        f"{name},{mode},{sio.fmt(edges[b])},{sio.fmt(edges[b + 1])},{count}\n"
                    )

    if args.export_shapes:
        s_eval, curves = posterior_shape_samples(
            records, model_n_p, shoot_cfg, count=args.export_shapes
        )
        sio.write_shapes_csv(os.path.join(args.out, "shapes.csv"), s_eval, curves)
    return 0


def cmd_scenario(args):
    cfg = _load_config(args.config)
    shoot_cfg = build_shoot_config(cfg)
    priors = build_priors(cfg)
    opt_cfg = build_optimizer_config(cfg)
    sampler_cfg = build_sampler_config(cfg) if "sampler" in cfg else None
    spec = build_scenario_spec(args.scenario_kind, cfg, args.seed)
    workers = cfg.get("scenario", {}).get("workers", 1)
    out = args.out
    os.makedirs(out, exist_ok=True)
    results = run_scenario(
        spec, sampler_cfg, opt_cfg, priors=priors, shoot_cfg=shoot_cfg, workers=workers
    )
    combined = {}
    for res in results:
        sub = os.path.join(out, res.label)
        sio.write_subcase_dir(sub, res)
        combined[res.label] = {
            "accept_rate": res.summary.accept_rate,
            "sigma2_quantiles": res.summary.sigma2_quantiles,
            "map_value": res.map_value,
            "map_initial_value": res.map_initial_value,
            "nu_point_std_mean": float(np.mean(res.summary.nu_point_std)),
        }
    sio.write_json(os.path.join(out, "summary_combined.json"), combined)
    params = _params_of(
        shoot_cfg,
        priors,
        sampler_cfg or SamplerConfig(),
        opt_cfg,
        extra={"scenario_spec": _spec_params(spec)},
    )
    _write_manifest(out, args.seed, spec.kind, params, spec, shoot_cfg, spec.model_resolution)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="shapereg",
        description="Bayesian registration of closed planar curves",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--config", default=None)
        p.add_argument("--out", default=".")

    p_sim = sub.add_parser("simulate", help="synthesise scenario data files")
    p_sim.add_argument("--scenario", required=True, choices=["consistency", "multimodality", "partial"])
    common(p_sim)
    p_sim.set_defaults(fn=cmd_simulate)

    p_sample = sub.add_parser("sample", help="run a pCN chain on observations")
    p_sample.add_argument("--data", default=None)
    p_sample.add_argument("--model-res", type=int, default=100)
    p_sample.add_argument("--prior-only", action="store_true")
    p_sample.add_argument("--init-map", default=None)
    common(p_sample)
    p_sample.set_defaults(fn=cmd_sample)

    p_map = sub.add_parser("map", help="BFGS high-density state")
    p_map.add_argument("--data", required=True)
    p_map.add_argument("--model-res", type=int, default=100)
    common(p_map)
    p_map.set_defaults(fn=cmd_map)

    p_diag = sub.add_parser("diagnose", help="summaries and histogram tables from a chain file")
    p_diag.add_argument("--chain", required=True)
    p_diag.add_argument("--model-res", type=int, default=100)
    p_diag.add_argument("--export-shapes", type=int, default=0)
    common(p_diag)
    p_diag.set_defaults(fn=cmd_diagnose)

    p_scen = sub.add_parser("scenario", help="full preset studies")
    p_scen.add_argument("scenario_kind", choices=["consistency", "multimodality", "partial"])
    common(p_scen)
    p_scen.set_defaults(fn=cmd_scenario)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else USAGE_ERROR
    try:
        return args.fn(args)
    except NUMERICAL_FAILURES as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return NUMERICAL_ERROR
    except (ValidationError, InputError, ContractError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except ShapeRegError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())

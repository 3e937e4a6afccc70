"""Bit-exact file formats: curve/observation tables, chain streams, configs,
and run manifests.

Floats are written as 17-significant-digit decimals so every value round-trips
exactly; chains are newline-delimited JSON records holding spectral
coefficients (mesh-independent).
"""

import configparser
import hashlib
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .inference import ChainRecord
from .observation import ObservationSet

TOOL_VERSION = "0.1.0"


def fmt(x):
    """Full round-trip decimal representation."""
    return format(float(x), ".17g")


# ---------------------------------------------------------------- curve CSV


def write_curve_csv(path, points, s=None):
    pts = np.asarray(points, dtype=np.float64)
    if s is None:
        s = 2.0 * np.pi * np.arange(pts.shape[0]) / pts.shape[0]
    with open(path, "w") as fh:
        fh.write("index,s,x,y\n")
        for i, (si, (x, y)) in enumerate(zip(s, pts)):
            fh.write(f"{i},{fmt(si)},{fmt(x)},{fmt(y)}\n")


def _read_table(path, required):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        for col in required:
            if col not in header:
                raise ValidationError(col, f"missing column in {path}")
        idx = {c: header.index(c) for c in header}
        rows = []
        for line in fh:
            line = line.strip()
            if line:
                rows.append(line.split(","))
    return header, idx, rows


def read_curve_csv(path):
    _, idx, rows = _read_table(path, ("index", "s", "x", "y"))
    s = np.array([float(r[idx["s"]]) for r in rows])
    pts = np.array([[float(r[idx["x"]]), float(r[idx["y"]])] for r in rows])
    return s, pts


def write_observations_csv(path, obs):
    with open(path, "w") as fh:
        fh.write("index,s,x,y,sigma2\n")
        for i in range(obs.n_obs):
            fh.write(
                f"{i},{fmt(obs.s_index[i])},{fmt(obs.y[i, 0])},{fmt(obs.y[i, 1])},{fmt(obs.sigma2[i])}\n"
            )


def read_observations_csv(path):
    _, idx, rows = _read_table(path, ("index", "s", "x", "y", "sigma2"))
    s = np.array([float(r[idx["s"]]) for r in rows])
    y = np.array([[float(r[idx["x"]]), float(r[idx["y"]])] for r in rows])
    sigma2 = np.array([float(r[idx["sigma2"]]) for r in rows])
    return ObservationSet(y, s, sigma2)


def write_shapes_csv(path, s_eval, curves):
    """Posterior shape samples: one row per (sample, parameter) pair."""
    with open(path, "w") as fh:
        fh.write("sample,s,x,y\n")
        for k, curve in enumerate(curves):
            for si, (x, y) in zip(s_eval, curve):
                fh.write(f"{k},{fmt(si)},{fmt(x)},{fmt(y)}\n")


def read_shapes_csv(path):
    _, idx, rows = _read_table(path, ("sample", "s", "x", "y"))
    ks = np.array([int(r[idx["sample"]]) for r in rows])
    s = np.array([float(r[idx["s"]]) for r in rows])
    pts = np.array([[float(r[idx["x"]]), float(r[idx["y"]])] for r in rows])
    count = ks.max() + 1
    per = len(rows) // count
    return s[:per], pts.reshape(count, per, 2)


# ---------------------------------------------------------------- chains


def record_to_json(rec):
    return json.dumps(
        {
            "iteration": rec.iteration,
            "accept": bool(rec.accept),
            "phi": float(rec.phi),
            "sigma2": float(rec.sigma2),
            "p0": rec.p0_coeffs.tolist(),
            "nu": rec.nu_coeffs.tolist(),
        }
    )


def record_from_json(line):
    obj = json.loads(line)
    for key in ("iteration", "accept", "phi", "sigma2", "p0", "nu"):
        if key not in obj:
            raise ValidationError(key, "missing field in chain record")
    return ChainRecord(
        int(obj["iteration"]),
        bool(obj["accept"]),
        float(obj["phi"]),
        float(obj["sigma2"]),
        np.asarray(obj["p0"], dtype=np.float64),
        np.asarray(obj["nu"], dtype=np.float64),
    )


def write_chain_ndjson(path, records):
    with open(path, "w") as fh:
        for rec in records:
            fh.write(record_to_json(rec))
            fh.write("\n")


def read_chain_ndjson(path):
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(record_from_json(line))
    return records


class ChainWriter:
    """Streaming single-writer for chain records."""

    def __init__(self, path):
        self._fh = open(path, "w")

    def __call__(self, rec):
        self._fh.write(record_to_json(rec))
        self._fh.write("\n")

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


# ---------------------------------------------------------------- JSON blobs


def write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def write_subcase_dir(path, result):
    """Write one scenario sub-case (observations, chain, summary, map, truth)."""
    import os

    os.makedirs(path, exist_ok=True)
    write_observations_csv(os.path.join(path, "observations.csv"), result.obs)
    write_chain_ndjson(os.path.join(path, "chain.ndjson"), result.records)
    write_json(os.path.join(path, "summary.json"), result.summary.to_dict())
    write_json(
        os.path.join(path, "map.json"),
        {"value": result.map_value, "initial_value": result.map_initial_value},
    )
    if result.truth is not None:
        write_truth_json(os.path.join(path, "truth.json"), result.truth)


def write_truth_json(path, truth):
    write_json(
        path,
        {
            "n_p": truth.n_p,
            "p0_values": truth.p0_values.tolist(),
            "nu_values": truth.nu_values.tolist(),
            "sigma2": truth.sigma2.tolist(),
        },
    )


# ---------------------------------------------------------------- manifest


def config_digest(params):
    """Stable digest over every numeric parameter affecting results."""
    canon = json.dumps(params, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


@dataclass
class RunManifest:
    seed: int
    scenario: str
    params: dict
    n_p_data: int
    n_p_model: int
    n_g: int
    steps: int
    version: str = TOOL_VERSION
    created_at: str = field(default_factory=lambda: time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()))

    def to_dict(self):
        return {
            "version": self.version,
            "seed": self.seed,
            "scenario": self.scenario,
            "config_digest": config_digest(
                {
                    "seed": self.seed,
                    "scenario": self.scenario,
                    "n_p_data": self.n_p_data,
                    "n_p_model": self.n_p_model,
                    "n_g": self.n_g,
                    "steps": self.steps,
                    **self.params,
                }
            ),
            "params": self.params,
            "n_p_data": self.n_p_data,
            "n_p_model": self.n_p_model,
            "n_g": self.n_g,
            "steps": self.steps,
            "created_at": self.created_at,
        }


def write_manifest(path, manifest):
    write_json(path, manifest.to_dict())


# ---------------------------------------------------------------- config INI

CONFIG_SCHEMA = {
    "metric": {"alpha": float, "gamma": int},
    "shoot": {"steps": int, "n_g": int, "hamiltonian_tol": float},
    "prior.p0": {"delta": float, "alpha": float, "ell": float, "n_modes": int},
    "prior.nu": {"delta": float, "alpha": float, "ell": float, "n_modes": int},
    "sampler": {
        "beta": float,
        "n_iters": int,
        "thinning": int,
        "burn_in": int,
        "adapt_beta": bool,
        "target_accept": float,
        "infer_sigma2": bool,
        "ig_a0": float,
        "ig_b0": float,
    },
    "optimizer": {
        "max_iters": int,
        "grad_tol": float,
        "step_tol": float,
        "wolfe_c1": float,
        "wolfe_c2": float,
    },
    "scenario": {
        "data_resolution": int,
        "model_resolution": int,
        "data_steps": int,
        "n_obs": int,
        "noise_sigma": float,
        "likelihood_sigma": float,
        "sigma_good": float,
        "sigma_bad": float,
        "n_ladder": str,
        "r_values": str,
        "workers": int,
    },
}


def read_config_ini(path):
    """Parse the declarative key-value config; unknown fields are errors."""
    parser = configparser.ConfigParser()
    with open(path) as fh:
        parser.read_file(fh)
    out = {}
    for section in parser.sections():
        if section not in CONFIG_SCHEMA:
            raise ValidationError(section, "unknown config section")
        schema = CONFIG_SCHEMA[section]
        out[section] = {}
        for key, raw in parser.items(section):
            if key not in schema:
                raise ValidationError(f"{section}.{key}", "unknown config field")
            typ = schema[key]
            try:
                if typ is bool:
                    value = raw.strip().lower() in ("1", "true", "yes", "on")
                elif typ is str:
                    value = raw.strip()
                else:
                    value = typ(raw)
            except ValueError as exc:
                raise ValidationError(f"{section}.{key}", f"cannot parse {raw!r}") from exc
            out[section][key] = value
    return out


def write_config_ini(path, sections):
    parser = configparser.ConfigParser()
    for name, kv in sections.items():
        parser[name] = {
            k: (fmt(v) if isinstance(v, float) else str(v)) for k, v in kv.items()
        }
    with open(path, "w") as fh:
        parser.write(fh)
